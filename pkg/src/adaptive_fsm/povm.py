"""Rank-1 POVMs and Fisher-symmetric measurements (FSMs).

An FSM with fiducial |0> is described by real coefficient vectors
beta0 (length n), beta and gamma ((d-1) x n), with elements

    |phi^a> = beta0^a |0> + sum_k (beta_k^a + i gamma_k^a) |k>.

Writing omega_0 = beta0 and omega_k = beta_k + i gamma_k, the FSM conditions are
sum_a omega_k^a omega_j^a = 0 for j, k >= 1 and sum_a omega_k^a conj(omega_j^a) = delta_jk
for j, k >= 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, FsmConditionError, FsmConstructionError
from .states import PureState, Unitary

COMPLETENESS_TOL = 1e-10
FSM_TOL = 1e-10


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Povm:
    """Rank-1 POVM; row ``a`` of ``vectors`` holds the components of |phi^a>."""

    vectors: np.ndarray
    label: str = ""
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=complex)
        if vecs.ndim != 2 or vecs.shape[0] < 1:
            raise DimensionError(f"POVM vectors must be an (n, d) array, got shape {vecs.shape}")
        object.__setattr__(self, "vectors", _frozen(vecs, complex))
        if self.check:
            resid = self.completeness_residual()
            if resid > COMPLETENESS_TOL:
                raise ValueError(f"POVM is not complete (||sum E - 1||_F = {resid:.3e})")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def elements(self) -> np.ndarray:
        """Dense (n, d, d) array of the operators |phi><phi|."""
        return np.einsum("ai,aj->aij", self.vectors, self.vectors.conj())

    def completeness_residual(self) -> float:
        total = self.vectors.T @ self.vectors.conj()
        return float(np.linalg.norm(total - np.eye(self.dim)))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "elements": [{"re": v.real.tolist(), "im": v.imag.tolist()} for v in self.vectors],
        }

    @classmethod
    def from_json(cls, obj: dict, label: str = "", check: bool = True) -> "Povm":
        d = int(obj["dim"])
        rows = []
        for el in obj["elements"]:
            re = np.asarray(el["re"], dtype=float)
            im = np.asarray(el["im"], dtype=float)
            if re.size != d or im.size != d:
                raise DimensionError(f"element length does not match dim={d}")
            rows.append(re + 1j * im)
        return cls(np.array(rows), label=label, check=check)


@dataclass(frozen=True, eq=False)
class FsmCoefficients:
    """Real coefficients (beta0, beta, gamma) of a candidate FSM with fiducial |0>.

    Construction only checks shapes; whether the set is actually Fisher-symmetric
    is answered by :func:`check_fsm`, so defective sets can be represented and reported.
    """

    beta0: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        b0 = np.asarray(self.beta0, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        if b0.ndim != 1:
            raise DimensionError("beta0 must be a vector")
        if b.ndim != 2 or b.shape != g.shape or b.shape[1] != b0.size:
            raise DimensionError(
                f"beta/gamma must both be (d-1, n) with n={b0.size}; got {b.shape}, {g.shape}"
            )
        if np.any(b0 < 0):
            raise ValueError("beta0 entries must be non-negative")
        object.__setattr__(self, "beta0", _frozen(b0, float))
        object.__setattr__(self, "beta", _frozen(b, float))
        object.__setattr__(self, "gamma", _frozen(g, float))

    @property
    def dim(self) -> int:
        return self.beta.shape[0] + 1

    @property
    def n(self) -> int:
        return self.beta0.size

    def omega(self) -> np.ndarray:
        """(d, n) complex array; row 0 is beta0, row k is beta_k + i gamma_k."""
        return np.vstack([self.beta0.astype(complex), self.beta + 1j * self.gamma])

    def flipped(self) -> "FsmCoefficients":
        return FsmCoefficients(self.beta0, -self.beta, -self.gamma)

    def to_povm(self, sign: int = +1, label: str = "", check: bool = True) -> Povm:
        om = self.omega()
        om[1:] *= sign
        return Povm(om.T, label=label, check=check)

    @classmethod
    def from_povm(cls, povm: Povm) -> "FsmCoefficients":
        """Read coefficients off a rank-1 POVM, fixing each element's phase so <0|phi> >= 0."""
        vecs = np.array(povm.vectors)
        lead = vecs[:, 0]
        mag = np.abs(lead)
        rot = np.where(mag > 0, np.conj(lead) / np.where(mag > 0, mag, 1.0), 1.0)
        vecs = vecs * rot[:, None]
        return cls(mag, vecs[:, 1:].real.T, vecs[:, 1:].imag.T)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "beta0": self.beta0.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FsmCoefficients":
        d = int(obj["dim"])
        beta = np.asarray(obj["beta"], dtype=float).reshape(d - 1, -1)
        gamma = np.asarray(obj["gamma"], dtype=float).reshape(d - 1, -1)
        return cls(obj["beta0"], beta, gamma)


@dataclass(frozen=True)
class ConditionReport:
    """Violations of the FSM conditions for one coefficient set."""

    dim: int
    n: int
    orthogonality: float  # max |sum_a omega_k omega_j|, j,k >= 1
    completeness: float  # max |sum_a omega_k conj(omega_j) - delta_jk|, j,k >= 0
    tolerance: float = FSM_TOL

    @property
    def max_violation(self) -> float:
        return max(self.orthogonality, self.completeness)

    @property
    def minimal_count(self) -> int:
        return 2 * self.dim - 1

    @property
    def passed(self) -> bool:
        return self.max_violation < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] d={self.dim} n={self.n} (minimum {self.minimal_count}): "
            f"orthogonality {self.orthogonality:.3e}, completeness {self.completeness:.3e}"
        )


def check_fsm(c: FsmCoefficients, tol: float = FSM_TOL) -> ConditionReport:
    om = c.omega()
    gram = om @ om.conj().T
    ortho = om[1:] @ om[1:].T
    return ConditionReport(
        dim=c.dim,
        n=c.n,
        orthogonality=float(np.max(np.abs(ortho), initial=0.0)),
        completeness=float(np.max(np.abs(gram - np.eye(c.dim)))),
        tolerance=tol,
    )


def require_fsm(c: FsmCoefficients) -> ConditionReport:
    report = check_fsm(c)
    if not report.passed:
        raise FsmConditionError(report.summary())
    return report


def canonical_fsm(d: int) -> FsmCoefficients:
    """Minimal (2d-1)-element FSM with fiducial |0>, "+" branch.

    Elements (n = 2d - 1, s = 1/(sqrt(n)+1), w = e^{i pi/4}):
        phi^0      = (|0> + w sum_j |j>) / sqrt(n)
        phi^{2k-1} = (|0> + w (z |k> + s sum_{j != k} |j>)) / sqrt(n)
        phi^{2k}   = (|0> + w (z* |k> + s sum_{j != k} |j>)) / sqrt(n)
    with z = s - sqrt(n/2) e^{-i pi/4}.
    """
    if d < 2:
        raise DimensionError(f"dimension must be >= 2, got {d}")
    n = 2 * d - 1
    rn = np.sqrt(n)
    s = 1.0 / (rn + 1.0)
    w = np.exp(1j * np.pi / 4)
    z = s - np.sqrt(n / 2) * np.exp(-1j * np.pi / 4)

    tail = np.empty((n, d - 1), dtype=complex)
    tail[0] = w
    for k in range(1, d):
        for row, zk in ((2 * k - 1, z), (2 * k, np.conj(z))):
            tail[row] = w * s
            tail[row, k - 1] = w * zk
    tail /= rn
    coeffs = FsmCoefficients(np.full(n, 1.0 / rn), tail.real.T, tail.imag.T)

    report = check_fsm(coeffs)
    if not report.passed:
        raise FsmConstructionError(f"canonical FSM failed verification: {report.summary()}")
    return coeffs


def signed_pair(c: FsmCoefficients) -> tuple[Povm, Povm]:
    """The POVMs E_+ and E_- whose |k> components carry opposite signs."""
    require_fsm(c)
    return c.to_povm(+1, label="E+"), c.to_povm(-1, label="E-")


def phase_rotate(c: FsmCoefficients, phi: float) -> FsmCoefficients:
    """Multiply every |k> component (k >= 1) by e^{i phi}."""
    cos, sin = np.cos(phi), np.sin(phi)
    return FsmCoefficients(c.beta0, cos * c.beta - sin * c.gamma, cos * c.gamma + sin * c.beta)


def combine(parts: Sequence[FsmCoefficients], weights: Sequence[float]) -> FsmCoefficients:
    """Concatenate FSMs with element amplitudes scaled by weights (sum of squares = 1)."""
    if len(parts) == 0 or len(parts) != len(weights):
        raise ValueError("need one weight per part and at least one part")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if abs(np.sum(w**2) - 1.0) > 1e-12:
        raise ValueError(f"weights must satisfy sum tau^2 = 1, got {np.sum(w**2):.15g}")
    dims = {p.dim for p in parts}
    if len(dims) != 1:
        raise DimensionError(f"all parts must share one dimension, got {sorted(dims)}")
    for p in parts:
        require_fsm(p)
    return FsmCoefficients(
        np.concatenate([t * p.beta0 for t, p in zip(w, parts)]),
        np.hstack([t * p.beta for t, p in zip(w, parts)]),
        np.hstack([t * p.gamma for t, p in zip(w, parts)]),
    )


def adapt(p: Povm, u: Unitary) -> Povm:
    """Conjugate every element by U, moving the fiducial from |0> to U|0>."""
    if p.dim != u.dim:
        raise DimensionError(f"POVM dim {p.dim} != unitary dim {u.dim}")
    return Povm(p.vectors @ u.matrix.T, label=p.label)


def born_probabilities(p: Povm, s: PureState) -> np.ndarray:
    if p.dim != s.dim:
        raise DimensionError(f"POVM dim {p.dim} != state dim {s.dim}")
    return np.abs(p.vectors.conj() @ s.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class CountRecord:
    counts: np.ndarray
    shots: int
    povm_label: str = ""

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.sum() != self.shots:
            raise ValueError("counts do not sum to the recorded shot number")
        object.__setattr__(self, "counts", _frozen(counts, np.int64))

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["outcome_index", "count"])
            writer.writerows(enumerate(self.counts.tolist()))

    @classmethod
    def from_csv(cls, path, povm_label: str = "") -> "CountRecord":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        counts = np.zeros(len(rows), dtype=np.int64)
        for row in rows:
            counts[int(row["outcome_index"])] = int(row["count"])
        return cls(counts, int(counts.sum()), povm_label)


def sample_counts(p: Povm, s: PureState, shots: int, rng: np.random.Generator) -> CountRecord:
    """Multinomial outcome counts for ``shots`` independent measurements of ``s``."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = born_probabilities(p, s)
    probs = probs / probs.sum()
    return CountRecord(rng.multinomial(shots, probs), shots, p.label)
