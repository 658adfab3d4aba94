"""State estimation from FSM data: closed-form two-FSM inversion and pure-state MLE.

For a state a0|0> + sum_k a_k e^{i phi_k}|k> (a0 > 0) measured with E_+ and E_-,

    Delta_k = sum_a (beta_k^a + i gamma_k^a) / beta0^a * (P_+^a - P_-^a) = 2 a0 a_k e^{i phi_k},

and every outcome a separately determines a0^2 as

    (|sum_k (beta_k^a - i gamma_k^a) Delta_k|^2 - (beta0^a)^2 sum_k |Delta_k|^2)
    / (2 (P_+^a + P_-^a) - 4 (beta0^a)^2).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInversionError, DimensionError
from .povm import CountRecord, FsmCoefficients, Povm, born_probabilities
from .states import PureState

A0_FLOOR = 1e-6
DENOM_TOL = 1e-12
DENOM_NOISE_SIGMAS = 5.0
PHASE_ZERO_TOL = 1e-12
PROB_UNDERFLOW = 1e-300
PROB_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class TwoFsmStatistics:
    """Outcome frequencies of E_+ and E_-; shots of None mean exact probabilities."""

    freq_plus: np.ndarray
    freq_minus: np.ndarray
    shots_plus: int | None = None
    shots_minus: int | None = None

    def __post_init__(self):
        fp = np.asarray(self.freq_plus, dtype=float)
        fm = np.asarray(self.freq_minus, dtype=float)
        if fp.shape != fm.shape or fp.ndim != 1:
            raise DimensionError("frequency vectors must be 1-d and of equal length")
        for name, f in (("freq_plus", fp), ("freq_minus", fm)):
            if np.any(f < 0):
                raise ValueError(f"{name} has negative entries")
            if abs(f.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} sums to {f.sum():.15g}, expected 1")
        object.__setattr__(self, "freq_plus", fp)
        object.__setattr__(self, "freq_minus", fm)

    @classmethod
    def from_counts(cls, plus: CountRecord, minus: CountRecord) -> "TwoFsmStatistics":
        return cls(plus.frequencies, minus.frequencies, plus.shots, minus.shots)

    @classmethod
    def exact(cls, c: FsmCoefficients, state: PureState) -> "TwoFsmStatistics":
        pp = born_probabilities(c.to_povm(+1, check=False), state)
        pm = born_probabilities(c.to_povm(-1, check=False), state)
        return cls(pp / pp.sum(), pm / pm.sum())


@dataclass(frozen=True, eq=False)
class DeltaVector:
    delta: np.ndarray

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.delta) ** 2))


def compute_delta(stats: TwoFsmStatistics, c: FsmCoefficients) -> DeltaVector:
    if stats.freq_plus.size != c.n:
        raise DimensionError(f"{stats.freq_plus.size} frequencies for an FSM with {c.n} elements")
    if np.any(c.beta0 == 0):
        raise ZeroDivisionError("Delta needs beta0^a > 0 for every element")
    weights = (c.beta + 1j * c.gamma) / c.beta0
    return DeltaVector(weights @ (stats.freq_plus - stats.freq_minus))


def recover_phases(delta: DeltaVector) -> np.ndarray:
    dl = np.asarray(delta.delta)
    phases = np.arctan2(dl.imag, dl.real)
    phases[np.abs(dl) < PHASE_ZERO_TOL] = 0.0
    return phases


def _a0_terms(stats: TwoFsmStatistics, delta: DeltaVector, c: FsmCoefficients):
    proj = (c.beta - 1j * c.gamma).T @ delta.delta
    num = np.abs(proj) ** 2 - c.beta0**2 * delta.norm_sq
    fp, fm = stats.freq_plus, stats.freq_minus
    den = 2.0 * (fp + fm) - 4.0 * c.beta0**2
    threshold = np.full(c.n, DENOM_TOL)
    if stats.shots_plus and stats.shots_minus:
        var = fp * (1 - fp) / stats.shots_plus + fm * (1 - fm) / stats.shots_minus
        threshold = np.maximum(threshold, DENOM_NOISE_SIGMAS * 2.0 * np.sqrt(var))
    return num, den, np.abs(den) >= threshold


def a0_candidates(stats: TwoFsmStatistics, delta: DeltaVector, c: FsmCoefficients) -> np.ndarray:
    """Per-outcome a0 values; NaN where the radicand is negative or the denominator vanishes.

    A denominator counts as vanishing below 1e-12, or, for sampled frequencies,
    below DENOM_NOISE_SIGMAS standard deviations of its own sampling noise.
    """
    num, den, ok = _a0_terms(stats, delta, c)
    out = np.full(c.n, np.nan)
    rad = np.divide(num, den, out=np.full(c.n, -1.0), where=ok)
    good = ok & (rad >= 0)
    out[good] = np.sqrt(rad[good])
    return out


def recover_a0(
    stats: TwoFsmStatistics,
    delta: DeltaVector,
    c: FsmCoefficients,
    info: dict | None = None,
) -> float:
    """Median of the per-outcome closed-form estimates of a0, clamped to (0, 1].

    If no outcome survives (every denominator vanishes, as for |0> itself or for
    any qubit measured with the canonical FSM), sum_k |Delta_k|^2 = 4 a0^2 (1 - a0^2)
    is solved instead. Its two roots a0^2 = (1 +- sqrt(1 - |Delta|^2)) / 2 produce
    identical statistics; the larger one is returned and the other is reported
    in ``info["a0_alternative"]``.
    """
    if not np.all(np.isfinite(delta.delta)):
        raise DegenerateInversionError("Delta is not finite")
    info = {} if info is None else info
    cand = a0_candidates(stats, delta, c)
    survivors = cand[np.isfinite(cand)]
    info["surviving_outcomes"] = int(survivors.size)
    if survivors.size == 0:
        if np.any(_a0_terms(stats, delta, c)[2]):
            raise DegenerateInversionError("no outcome yields a non-negative a0^2")
        disc = np.sqrt(max(1.0 - delta.norm_sq, 0.0))
        if delta.norm_sq < 1e-24:
            # Delta = 0 with every denominator zero: only a0 = 1 is consistent
            return 1.0
        info["a0_alternative"] = float(np.sqrt(0.5 * (1.0 - disc)))
        return float(np.sqrt(0.5 * (1.0 + disc)))
    a0 = float(np.median(survivors))
    if a0 < A0_FLOOR:
        raise DegenerateInversionError(
            f"recovered a0 = {a0:.3e}: the state has no resolvable overlap with the fiducial"
        )
    return min(a0, 1.0)


def _assemble(delta: DeltaVector, a0: float, phases: np.ndarray) -> PureState:
    amps = np.empty(delta.delta.size + 1, dtype=complex)
    amps[0] = a0
    amps[1:] = np.abs(delta.delta) / (2.0 * a0) * np.exp(1j * phases)
    return PureState.from_vector(amps)


def analytic_estimate(stats: TwoFsmStatistics, c: FsmCoefficients, info: dict | None = None) -> PureState:
    """Closed-form state estimate from E_+ / E_- frequencies.

    When the a0 root is ambiguous the mirrored estimate is stored in
    ``info["alternative"]``.
    """
    info = {} if info is None else info
    delta = compute_delta(stats, c)
    phases = recover_phases(delta)
    a0 = recover_a0(stats, delta, c, info)
    alt = info.get("a0_alternative")
    if alt is not None and alt >= A0_FLOOR:
        info["alternative"] = _assemble(delta, alt, phases)
    return _assemble(delta, a0, phases)


class LikelihoodDataset:
    """Counts from several rank-1 POVMs pooled into one multinomial likelihood."""

    def __init__(self, entries=()):
        self.entries: list[tuple[Povm, np.ndarray]] = []
        self._design = None
        self._counts = None
        for povm, counts in entries:
            self.add(povm, counts)

    def add(self, povm: Povm, counts) -> None:
        if isinstance(counts, CountRecord):
            counts = counts.counts
        counts = np.asarray(counts, dtype=float)
        if counts.shape != (povm.n,):
            raise DimensionError(f"{counts.size} counts for a POVM with {povm.n} outcomes")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if self.entries and povm.dim != self.dim:
            raise DimensionError(f"POVM dim {povm.dim} != dataset dim {self.dim}")
        self.entries.append((povm, counts))
        self._design = self._counts = None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def dim(self) -> int:
        return self.entries[0][0].dim

    @property
    def total_counts(self) -> float:
        return float(self.counts.sum())

    @property
    def design(self) -> np.ndarray:
        """Rows <phi^a| of every POVM, so design @ psi gives the outcome amplitudes."""
        if self._design is None:
            self._design = np.vstack([p.vectors.conj() for p, _ in self.entries])
        return self._design

    @property
    def counts(self) -> np.ndarray:
        if self._counts is None:
            self._counts = np.concatenate([c for _, c in self.entries])
        return self._counts

    def _probs(self, psi: np.ndarray):
        amps = self.design @ psi
        probs = amps.real**2 + amps.imag**2
        floored = (probs < PROB_UNDERFLOW) & (self.counts > 0)
        if np.any(floored):
            probs = np.where(floored, PROB_FLOOR, probs)
        return amps, probs, floored

    def log_likelihood(self, psi) -> float:
        psi = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=complex)
        _, probs, _ = self._probs(psi)
        mask = self.counts > 0
        return float(np.dot(self.counts[mask], np.log(probs[mask])))

    def value_and_gradient(self, psi: np.ndarray) -> tuple[float, np.ndarray, int]:
        """Log-likelihood, Euclidean gradient 2 dL/dpsi*, and the number of floored outcomes.

        The directional derivative along v is Re <gradient, v>.
        """
        amps, probs, floored = self._probs(psi)
        mask = self.counts > 0
        value = float(np.dot(self.counts[mask], np.log(probs[mask])))
        w = np.where(mask & ~floored, self.counts / probs, 0.0)
        grad = 2.0 * (self.design.conj().T @ (w * amps))
        return value, grad, int(floored.sum())


@dataclass
class MleResult:
    state: PureState
    log_likelihood: float
    iterations: int
    history: list[float] = field(default_factory=list)
    floored_outcomes: int = 0
    converged: bool = False


def _tangent(psi: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return grad - np.real(np.vdot(psi, grad)) * psi


def mle_refine(
    data: LikelihoodDataset,
    init: PureState,
    max_iter: int = 1000,
    rtol: float = 1e-10,
    armijo: float = 1e-4,
) -> MleResult:
    """Maximize sum counts * log p(psi) over unit vectors by Riemannian gradient ascent.

    Each iteration projects the Euclidean gradient onto the tangent space of the
    sphere, backtracks by halving until the Armijo condition holds, and retracts
    by normalization. The trial step starts from a Barzilai-Borwein estimate.
    Stops when the relative log-likelihood gain drops below ``rtol``.
    """
    if len(data) == 0:
        raise ValueError("likelihood dataset is empty")
    if init.dim != data.dim:
        raise DimensionError(f"initial state dim {init.dim} != data dim {data.dim}")

    psi = np.array(init.amplitudes)
    value, grad, floored = data.value_and_gradient(psi)
    rgrad = _tangent(psi, grad)
    history = [value]
    max_floored = floored
    step = 1e-2 / max(np.linalg.norm(rgrad), 1e-300)
    converged = False
    it = 0

    while it < max_iter:
        gnorm2 = float(np.real(np.vdot(rgrad, rgrad)))
        if gnorm2 <= (1e-15 * max(abs(value), 1.0)) ** 2:
            converged = True
            break
        t = step
        while True:
            trial = psi + t * rgrad
            trial /= np.linalg.norm(trial)
            t_value, t_grad, t_floored = data.value_and_gradient(trial)
            if t_value >= value + armijo * t * gnorm2:
                break
            t *= 0.5
            if t * np.sqrt(gnorm2) < 1e-16:
                trial = None
                break
        if trial is None:
            converged = True
            break
        it += 1
        t_rgrad = _tangent(trial, t_grad)
        s = trial - psi
        y = rgrad - t_rgrad
        sy = float(np.real(np.vdot(s, y)))
        step = float(np.real(np.vdot(s, s))) / sy if sy > 0 else 2.0 * t
        gain = t_value - value
        psi, value, rgrad = trial, t_value, t_rgrad
        max_floored = max(max_floored, t_floored)
        history.append(value)
        if gain <= rtol * abs(value):
            converged = True
            break

    return MleResult(
        state=PureState.from_vector(psi),
        log_likelihood=value,
        iterations=it,
        history=history,
        floored_outcomes=max_floored,
        converged=converged,
    )
