"""Pure states, overlaps, Haar sampling and the unitaries used to move fiducials."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

NORM_TOL = 1e-12
PHASE_TOL = 1e-12
UNITARY_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def canonical_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first significant amplitude is real and >= 0."""
    vec = np.asarray(vec, dtype=complex)
    idx = np.flatnonzero(np.abs(vec) > PHASE_TOL)
    if idx.size == 0:
        return vec.copy()
    lead = vec[idx[0]]
    if lead.imag == 0 and lead.real > 0:
        return vec.copy()
    out = vec *(np.conj(lead) / abs(lead))
    out[idx[0]] = abs(lead)
    return out


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector in the computational basis, phase-canonical."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 1:
            raise DimensionError(f"amplitudes must be a non-empty vector, got shape {amps.shape}")
        norm_dev = abs(np.vdot(amps, amps).real - 1.0)
        if norm_dev > NORM_TOL:
            raise ValueError(f"state is not normalized (|<psi|psi> - 1| = {norm_dev:.3e})")
        object.__setattr__(self, "amplitudes", _frozen(canonical_phase(amps)))

    @classmethod
    def from_vector(cls, vec) -> "PureState":
        """Normalize an arbitrary non-zero vector and wrap it."""
        vec = np.asarray(vec, dtype=complex)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(vec / norm)

    @classmethod
    def basis(cls, d: int, k: int) -> "PureState":
        if not 0 <= k < d:
            raise DimensionError(f"basis index {k} out of range for d={d}")
        v = np.zeros(d, dtype=complex)
        v[k] = 1.0
        return cls(v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PureState":
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
        if re.shape != im.shape or re.size != int(obj["dim"]):
            raise DimensionError("state JSON has inconsistent dim/re/im lengths")
        return cls.from_vector(re + 1j * im)

    def __repr__(self) -> str:
        return f"PureState(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"unitary must be square, got shape {m.shape}")
        resid = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]))
        if resid > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (||U^dag U - 1||_F = {resid:.3e})")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, state: PureState) -> PureState:
        if state.dim != self.dim:
            raise DimensionError(f"unitary dim {self.dim} != state dim {state.dim}")
        return PureState.from_vector(self.matrix @ state.amplitudes)

    def __matmul__(self, other: "Unitary") -> "Unitary":
        return Unitary(self.matrix @ other.matrix)

    @classmethod
    def identity(cls, d: int) -> "Unitary":
        return cls(np.eye(d, dtype=complex))

    @classmethod
    def swap(cls, d: int, k: int) -> "Unitary":
        """Permutation exchanging |0> and |k>."""
        perm = np.arange(d)
        perm[[0, k]] = perm[[k, 0]]
        return cls(np.eye(d, dtype=complex)[:, perm])


def haar_random_state(d: int, rng: np.random.Generator) -> PureState:
    """Draw a Haar-uniform pure state by normalizing i.i.d. complex Gaussians."""
    if d < 2:
        raise DimensionError(f"dimension must be >= 2, got {d}")
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState.from_vector(z)


def random_unitary(d: int, rng: np.random.Generator) -> Unitary:
    """Haar-random unitary from a phase-corrected QR decomposition."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return Unitary(q * (diag / np.abs(diag)))


def _vec(x) -> np.ndarray:
    return x.amplitudes if isinstance(x, PureState) else np.asarray(x, dtype=complex)


def fidelity(a, b) -> float:
    """|<a|b>|^2 for two pure states."""
    va, vb = _vec(a), _vec(b)
    if va.shape != vb.shape:
        raise DimensionError(f"dimension mismatch: {va.size} vs {vb.size}")
    return float(min(1.0, abs(np.vdot(va, vb)) ** 2))


def infidelity(a, b) -> float:
    """1 - |<a|b>|^2 for unit vectors, evaluated without cancellation.

    Uses the Lagrange identity ||a||^2 ||b||^2 - |<a|b>|^2 = 1/2 sum_ij |a_i b_j - a_j b_i|^2,
    so infidelities far below machine epsilon are resolved.
    """
    va, vb = _vec(a), _vec(b)
    if va.shape != vb.shape:
        raise DimensionError(f"dimension mismatch: {va.size} vs {vb.size}")
    cross = np.outer(va, vb)
    return float(0.5 * np.sum(np.abs(cross - cross.T) ** 2))


def householder_to(target: PureState) -> Unitary:
    """Unitary U with U|0> = target, built from one complex Householder reflection."""
    t = _vec(target)
    d = t.size
    lead = t[0]
    phase = lead / abs(lead) if abs(lead) > PHASE_TOL else 1.0
    y = t * np.conj(phase)  # <0|y> real and >= 0
    v = -y
    v[0] += 1.0
    vv = np.vdot(v, v).real
    if vv < NORM_TOL**2:
        return Unitary(phase * np.eye(d, dtype=complex))
    h = np.eye(d, dtype=complex) - (2.0 / vv) * np.outer(v, v.conj())
    return Unitary(phase * h)
