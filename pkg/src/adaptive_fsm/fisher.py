"""Classical and quantum Fisher information at the fiducial state |0>.

States near the fiducial are parametrized as

    |chi(x)> = |0> + sum_j (x^{j0} + i x^{j1}) |j>,   j = 1..d-1,

with the 2d-2 real parameters ordered (x^{10}, x^{11}, x^{20}, x^{21}, ...).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularFiducialError
from .povm import FsmCoefficients, Povm
from .splits import get_split

SYMMETRY_TOL = 1e-10


def param_index(j: int, sigma: int) -> int:
    """Position of x^{j sigma} (j >= 1, sigma in {0, 1}) in the parameter vector."""
    return 2 * (j - 1) + sigma


def fiducial_tangents(d: int) -> np.ndarray:
    """(2d-2, d) array of d|psi>/dx^{j sigma} at x = 0.

    The normalization factor has zero first derivative at the fiducial, so the
    tangent of the normalized state is |j> for sigma = 0 and i|j> for sigma = 1.
    """
    t = np.zeros((2 * d - 2, d), dtype=complex)
    for j in range(1, d):
        t[param_index(j, 0), j] = 1.0
        t[param_index(j, 1), j] = 1j
    return t


def quantum_fim_pure(psi: np.ndarray, tangents: np.ndarray) -> np.ndarray:
    """Q = 4 Re[<d_a psi|d_b psi> - <d_a psi|psi><psi|d_b psi>] for a pure state."""
    overlap = tangents.conj() @ tangents.T
    proj = tangents.conj() @ psi
    return 4.0 * np.real(overlap - np.outer(proj, proj.conj()))


def quantum_fim_at_fiducial(d: int) -> np.ndarray:
    if d < 2:
        raise DimensionError(f"dimension must be >= 2, got {d}")
    psi = np.zeros(d, dtype=complex)
    psi[0] = 1.0
    q = quantum_fim_pure(psi, fiducial_tangents(d))
    dev = np.max(np.abs(q - 4.0 * np.eye(2 * d - 2)))
    if dev > SYMMETRY_TOL:
        raise AssertionError(f"quantum FIM deviates from 4*I by {dev:.3e}")
    return q


def classical_fim(c: FsmCoefficients | Povm) -> np.ndarray:
    """Classical FIM of the measurement at x = 0.

    With p(a|0) = (beta0^a)^2 and dp/dx^{j0} = 2 beta0^a beta_j^a,
    dp/dx^{j1} = 2 beta0^a gamma_j^a, the sum over outcomes of
    (dp/dx)(dp/dx)/p is accumulated element by element.
    """
    if isinstance(c, Povm):
        c = FsmCoefficients.from_povm(c)
    b0 = c.beta0
    # rows: derivative of every outcome probability w.r.t. one parameter
    deriv = np.empty((2 * c.dim - 2, c.n))
    deriv[0::2] = 2.0 * b0 * c.beta
    deriv[1::2] = 2.0 * b0 * c.gamma
    prob = b0**2

    zero = prob == 0
    if np.any(zero):
        bad = zero & (np.any(c.beta != 0, axis=0) | np.any(c.gamma != 0, axis=0))
        if np.any(bad):
            raise SingularFiducialError(
                f"elements {np.flatnonzero(bad).tolist()} have beta0 = 0 but a non-zero "
                "off-fiducial part; the classical FIM is singular at |0>"
            )
    keep = ~zero
    return (deriv[:, keep] / prob[keep]) @ deriv[:, keep].T


@dataclass(frozen=True, eq=False)
class FimPair:
    classical: np.ndarray
    quantum: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.classical, dtype=float)
        q = np.asarray(self.quantum, dtype=float)
        if c.shape != q.shape or c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionError(f"FIM shapes differ or are not square: {c.shape} vs {q.shape}")
        for name, m in (("classical", c), ("quantum", q)):
            if np.max(np.abs(m - m.T), initial=0.0) > SYMMETRY_TOL:
                raise ValueError(f"{name} FIM is not symmetric")
        object.__setattr__(self, "classical", c)
        object.__setattr__(self, "quantum", q)

    @property
    def dim_params(self) -> int:
        return self.classical.shape[0]

    @classmethod
    def at_fiducial(cls, c: FsmCoefficients | Povm) -> "FimPair":
        cl = classical_fim(c)
        return cls(cl, quantum_fim_at_fiducial(cl.shape[0] // 2 + 1))


def gill_massar_trace(pair: FimPair) -> float:
    """Tr(Q^{-1} C); bounded above by d - 1."""
    try:
        qinv = np.linalg.inv(pair.quantum)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("quantum FIM is singular") from exc
    return float(np.trace(qinv @ pair.classical))


def uniformity_deviation(c: np.ndarray) -> float:
    """Max elementwise distance of C from (Tr C / m) * identity."""
    m = c.shape[0]
    return float(np.max(np.abs(c - np.trace(c) / m * np.eye(m))))


def fim_report(c: FsmCoefficients | Povm, tol: float = 1e-10, trace_tol: float = 1e-8) -> dict:
    """Fisher-symmetry diagnostics: uniform C and saturated Gill-Massar trace."""
    pair = FimPair.at_fiducial(c)
    d = pair.dim_params // 2 + 1
    trace = gill_massar_trace(pair)
    dev = uniformity_deviation(pair.classical)
    ratio = float(np.mean(np.diag(pair.classical)) / np.mean(np.diag(pair.quantum)))
    return {
        "dim": d,
        "gill_massar_trace": trace,
        "trace_deviation": abs(trace - (d - 1)),
        "uniformity_deviation": dev,
        "classical_to_quantum_ratio": ratio,
        "uniform": dev < tol,
        "saturated": abs(trace - (d - 1)) < trace_tol,
        "passed": dev < tol and abs(trace - (d - 1)) < trace_tol,
    }


def gmb(d: int, n_shots: int, stage: int = 2, split="2/4") -> float:
    """Gill-Massar lower bound on the average infidelity.

    Stage 2 (or a single FSM using all shots) gives (d-1)/N. Stage 1 only spends
    2*f1*N copies, so its bound is (d-1)/(2 f1 N): 3/2, 2 and 5/2 times (d-1)/N
    for the 2/3, 2/4 and 2/5 splits.
    """
    if n_shots < 1:
        raise ValueError(f"N must be >= 1, got {n_shots}")
    base = (d - 1) / n_shots
    if stage == 2:
        return base
    if stage == 1:
        return float(get_split(split).stage1_gmb_factor()) * base
    raise ValueError(f"stage must be 1 or 2, got {stage}")
