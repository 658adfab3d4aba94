"""The three-stage adaptive estimation procedure.

0. One computational-basis shot picks a fiducial |k> with non-zero overlap.
1. E_+ and E_- (re-centred on |k>) are sampled; the closed-form inversion followed
   by MLE on these counts gives a first estimate.
2. The FSM is adapted so its fiducial is the first estimate, sampled, and a final
   MLE over all stage-1 and stage-2 counts is started from the first estimate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInversionError, DimensionError
from .povm import FsmCoefficients, adapt, born_probabilities, canonical_fsm, sample_counts
from .reconstruct import LikelihoodDataset, TwoFsmStatistics, analytic_estimate, mle_refine
from .splits import SplitPolicy, get_split
from .states import PureState, Unitary, haar_random_state, householder_to, infidelity

MIN_SHOTS = 10


@dataclass
class ProtocolResult:
    fiducial_index: int
    stage1_estimate: PureState
    final_estimate: PureState
    counts: LikelihoodDataset
    shot_ledger: tuple[int, int, int, int]  # (stage 0, E_+, E_-, adapted FSM)
    stage1_infidelity: float | None = None
    final_infidelity: float | None = None
    mle_iters_1: int = 0
    mle_iters_2: int = 0
    fallback: bool = False
    diagnostics: dict = field(default_factory=dict)


def _rngs(rng) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Per-stage generators: children of a SeedSequence, or one shared Generator."""
    if isinstance(rng, np.random.SeedSequence):
        return tuple(np.random.default_rng(s) for s in rng.spawn(3))
    if isinstance(rng, np.random.Generator):
        return rng, rng, rng
    return _rngs(np.random.SeedSequence(rng))


def stage0_select_fiducial(truth: PureState, rng: np.random.Generator, basis: Unitary | None = None) -> int:
    """One shot in ``basis`` (columns are the outcome vectors; default computational)."""
    amps = truth.amplitudes if basis is None else basis.matrix.conj().T @ truth.amplitudes
    probs = np.abs(amps) ** 2
    return int(rng.choice(truth.dim, p=probs / probs.sum()))


def fiducial_frame(k: int, d: int, basis: Unitary | None = None) -> Unitary:
    """Unitary W with W|0> equal to the stage-0 outcome vector (swap 0 <-> k, then basis)."""
    w = Unitary.identity(d) if k == 0 else Unitary.swap(d, k)
    return w if basis is None else basis @ w


def run_protocol(
    truth: PureState,
    n_shots: int,
    split: SplitPolicy | str = "2/4",
    rng=None,
    fsm: FsmCoefficients | None = None,
    stage0_basis: Unitary | None = None,
) -> ProtocolResult:
    """Simulate one adaptive estimation of ``truth`` with N + 1 copies.

    ``rng`` may be a Generator (shared by all stages), a SeedSequence (one child
    stream per stage) or an int seed.
    """
    split = get_split(split)
    d = truth.dim
    if n_shots < MIN_SHOTS:
        raise ValueError(f"N must be >= {MIN_SHOTS}, got {n_shots}")
    per_fsm, final_shots = split.allocate(n_shots)
    if per_fsm < 1 or final_shots < 1:
        raise ValueError(f"split {split.name} leaves a measurement without shots at N={n_shots}")
    fsm = canonical_fsm(d) if fsm is None else fsm
    if fsm.dim != d:
        raise DimensionError(f"FSM dim {fsm.dim} != state dim {d}")
    rng0, rng1, rng2 = _rngs(rng)
    diag: dict = {}

    # stage 0
    k = stage0_select_fiducial(truth, rng0, stage0_basis)
    frame = fiducial_frame(k, d, stage0_basis)

    # stage 1
    e_plus = adapt(fsm.to_povm(+1, label="E+"), frame)
    e_minus = adapt(fsm.to_povm(-1, label="E-"), frame)
    rec_plus = sample_counts(e_plus, truth, per_fsm, rng1)
    rec_minus = sample_counts(e_minus, truth, per_fsm, rng1)
    stage1_data = LikelihoodDataset([(e_plus, rec_plus), (e_minus, rec_minus)])

    fallback = False
    alternative = None
    try:
        local = analytic_estimate(TwoFsmStatistics.from_counts(rec_plus, rec_minus), fsm, diag)
        init1 = frame.apply(local)
        if "alternative" in diag:
            alternative = frame.apply(diag.pop("alternative"))
    except DegenerateInversionError as exc:
        fallback = True
        diag["fallback_reason"] = str(exc)
        init1 = haar_random_state(d, rng1)
    diag["analytic_estimate"] = init1
    mle1 = mle_refine(stage1_data, init1)
    stage1 = mle1.state

    # stage 2
    adapted = adapt(fsm.to_povm(+1, label="E~"), householder_to(stage1))
    rec_final = sample_counts(adapted, truth, final_shots, rng2)
    pooled = LikelihoodDataset(stage1_data.entries)
    pooled.add(adapted, rec_final)
    mle2 = mle_refine(pooled, stage1)
    if alternative is not None:
        # the two a0 roots fit stage 1 equally well; stage-2 counts decide
        mle_alt = mle_refine(pooled, alternative)
        diag["ambiguous_root"] = True
        diag["alternative_won"] = mle_alt.log_likelihood > mle2.log_likelihood
        if diag["alternative_won"]:
            mle2 = mle_alt
    diag["log_likelihood_1"] = mle1.log_likelihood
    diag["log_likelihood_2"] = mle2.log_likelihood
    diag["floored_outcomes"] = max(mle1.floored_outcomes, mle2.floored_outcomes)

    return ProtocolResult(
        fiducial_index=k,
        stage1_estimate=stage1,
        final_estimate=mle2.state,
        counts=pooled,
        shot_ledger=(1, per_fsm, per_fsm, final_shots),
        stage1_infidelity=infidelity(truth, stage1),
        final_infidelity=infidelity(truth, mle2.state),
        mle_iters_1=mle1.iterations,
        mle_iters_2=mle2.iterations,
        fallback=fallback,
        diagnostics=diag,
    )


def adapted_fsm_probabilities(fsm: FsmCoefficients, estimate: PureState) -> np.ndarray:
    """Outcome distribution of the adapted FSM on its own fiducial (uniform 1/n)."""
    return born_probabilities(adapt(fsm.to_povm(+1), householder_to(estimate)), estimate)

