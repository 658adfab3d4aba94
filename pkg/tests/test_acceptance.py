"""Acceptance criteria, one printed verdict line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""
import time

import numpy as np
import pytest

from adaptive_fsm.fisher import FimPair, classical_fim, gill_massar_trace, quantum_fim_at_fiducial
from adaptive_fsm.fitting import fit_scaling
from adaptive_fsm.montecarlo import ExperimentConfig, run_experiment
from adaptive_fsm.povm import born_probabilities, canonical_fsm, check_fsm, combine, phase_rotate, sample_counts, signed_pair
from adaptive_fsm.protocol import run_protocol
from adaptive_fsm.reconstruct import LikelihoodDataset, TwoFsmStatistics, analytic_estimate, mle_refine
from adaptive_fsm.states import haar_random_state, infidelity

from oracles import density_born, fd_classical_fim, fsm_elements, log_likelihood

FSM_TOL = 1e-10
Q_TOL = 1e-10
TRACE_TOL = 1e-8
FD_TOL = 1e-4
INVERSION_TOL = 1e-10
A0_CUT = 0.01
C4_BAND = (1.0, 1.9)
C5_GAMMA1 = (1.6, 2.0)
C5_GAMMA2 = (0.85, 1.25)
C5_BETA = (0.9, 1.1)


def test_c1_fsm_construction(acceptance_line):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for d in range(2, 17):
        c = canonical_fsm(d)
        worst = max(worst, check_fsm(c).max_violation)
        for _ in range(100):
            worst = max(worst, check_fsm(phase_rotate(c, rng.uniform(0, 2 * np.pi))).max_violation)
        for _ in range(100):
            tau = rng.uniform(0, 1, size=3)
            tau /= np.linalg.norm(tau)
            mix = combine([c, phase_rotate(c, rng.uniform(0, 2 * np.pi)), c.flipped()], tau)
            worst = max(worst, check_fsm(mix).max_violation)
    elapsed = time.perf_counter() - t0
    ok = worst < FSM_TOL and elapsed < 5
    acceptance_line("C1 FSM construction suite", ok, f"max violation {worst:.2e} (< {FSM_TOL:g}), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_c2_fisher_identities(acceptance_line):
    t0 = time.perf_counter()
    q_dev = tr_dev = fd_dev = 0.0
    for d in range(2, 17):
        c = canonical_fsm(d)
        q = quantum_fim_at_fiducial(d)
        q_dev = max(q_dev, np.max(np.abs(q - 4 * np.eye(2 * d - 2))))
        tr_dev = max(tr_dev, abs(gill_massar_trace(FimPair(classical_fim(c), q)) - (d - 1)))
        ref = fd_classical_fim(fsm_elements(c.beta0, c.beta, c.gamma), d)
        fd_dev = max(fd_dev, np.max(np.abs(classical_fim(c) - ref)))
    elapsed = time.perf_counter() - t0
    ok = q_dev < Q_TOL and tr_dev < TRACE_TOL and fd_dev < FD_TOL and elapsed < 10
    acceptance_line(
        "C2 Fisher-information identities",
        ok,
        f"|Q-4I| {q_dev:.1e}, |Tr(Q^-1 C)-(d-1)| {tr_dev:.1e}, |C-C_fd| {fd_dev:.1e}, {elapsed:.2f} s (< 10 s)",
    )
    assert ok


def _exact_inversion(dims):
    worst, frac = {}, {}
    for d in dims:
        rng = np.random.default_rng(3000 + d)
        c = canonical_fsm(d)
        plus = fsm_elements(c.beta0, c.beta, c.gamma, +1)
        minus = fsm_elements(c.beta0, c.beta, c.gamma, -1)
        w, n, good = 0.0, 0, 0
        while n < 1000:
            s = haar_random_state(d, rng)
            if s.amplitudes[0].real < A0_CUT:
                continue
            pp, pm = density_born(plus, s.amplitudes), density_born(minus, s.amplitudes)
            est = analytic_estimate(TwoFsmStatistics(pp / pp.sum(), pm / pm.sum()), c)
            err = infidelity(s, est)
            w = max(w, err)
            good += err < INVERSION_TOL
            n += 1
        worst[d], frac[d] = w, good / n
    return worst, frac


def test_c3_exact_inversion_d3_to_d8(acceptance_line):
    t0 = time.perf_counter()
    worst, _ = _exact_inversion(range(3, 9))
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    ok = top < INVERSION_TOL and elapsed < 30
    acceptance_line("C3 exact inversion, d=3..8", ok, f"worst infidelity {top:.1e} (< {INVERSION_TOL:g}), {elapsed:.2f} s")
    assert ok


def test_c3_exact_inversion_d2(acceptance_line):
    # For the canonical qubit FSM the states (a0, a1 e^{i phi}) and (a1, a0 e^{i phi})
    # have identical E_+/E_- statistics, so no inversion can meet this for every state.
    worst, frac = _exact_inversion([2])
    ok = worst[2] < INVERSION_TOL
    acceptance_line(
        "C3 exact inversion, d=2",
        ok,
        f"worst infidelity {worst[2]:.1e} (< {INVERSION_TOL:g}); {frac[2]:.1%} of states inverted exactly",
    )
    assert ok


def test_c4_desk_reproduction(acceptance_line):
    d, n = 4, 10**5
    t0 = time.perf_counter()
    s = run_experiment(ExperimentConfig(d=d, N=n, n_states=100, n_reps=10, split="2/4", master_seed=0))
    elapsed = time.perf_counter() - t0
    ratio = s.grand_mean_stage2 * n / (d - 1)
    ok = C4_BAND[0] <= ratio <= C4_BAND[1] and s.grand_mean_stage2 >= (d - 1) / n
    acceptance_line(
        "C4 d=4 N=1e5 reproduction",
        ok,
        f"<I2> = {ratio:.3f} (d-1)/N, band {list(C4_BAND)}, GMB respected, {elapsed:.1f} s",
    )
    assert ok


@pytest.mark.slow
def test_c5_scaling_exponents(acceptance_line, scaling_summaries):
    f1 = fit_scaling({k: v.grand_mean_stage1 for k, v in scaling_summaries.items()}, stage=1)
    f2 = fit_scaling({k: v.grand_mean_stage2 for k, v in scaling_summaries.items()}, stage=2)
    ok = (
        C5_GAMMA1[0] <= f1.gamma <= C5_GAMMA1[1]
        and C5_GAMMA2[0] <= f2.gamma <= C5_GAMMA2[1]
        and C5_BETA[0] <= f2.beta <= C5_BETA[1]
    )
    acceptance_line(
        "C5 scaling exponents",
        ok,
        f"gamma1 {f1.gamma:.3f} in {list(C5_GAMMA1)}, gamma2 {f2.gamma:.3f} in {list(C5_GAMMA2)}, "
        f"beta2 {f2.beta:.3f} in {list(C5_BETA)}",
    )
    assert ok


def test_c6_property_suite(acceptance_line):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    failures = []

    # MLE monotonicity and gradient check
    for i in range(100):
        d = 2 + i % 5
        c = canonical_fsm(d)
        plus, minus = signed_pair(c)
        truth = haar_random_state(d, rng)
        data = LikelihoodDataset([(plus, sample_counts(plus, truth, 500, rng)), (minus, sample_counts(minus, truth, 500, rng))])
        res = mle_refine(data, haar_random_state(d, rng))
        if np.any(np.diff(res.history) < 0):
            failures.append("monotonicity")
        psi = haar_random_state(d, rng).amplitudes
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        _, grad, _ = data.value_and_gradient(np.array(psi))
        ana = np.real(np.vdot(grad, v))
        vecs, cnts = [p.vectors for p, _ in data.entries], [k for _, k in data.entries]
        fd = (log_likelihood(vecs, cnts, psi + 1e-6 * v) - log_likelihood(vecs, cnts, psi - 1e-6 * v)) / 2e-6
        if abs(fd - ana) > 1e-5 * max(abs(ana), 1.0):
            failures.append("gradient")
        if abs(born_probabilities(plus, truth).sum() - 1) > 1e-10:
            failures.append("normalization")

    # determinism, serial and parallel
    cfg = ExperimentConfig(d=3, N=2000, n_states=4, n_reps=2, master_seed=13)
    a, b, p = run_experiment(cfg), run_experiment(cfg), run_experiment(cfg, workers=2)
    if not (a.to_json() == b.to_json() == p.to_json()):
        failures.append("determinism")

    # stage 2 beats stage 1 on average
    i1, i2 = [], []
    for t in range(500):
        r = run_protocol(haar_random_state(4, rng), 10**5, "2/4", np.random.SeedSequence([66, t]))
        i1.append(r.stage1_infidelity)
        i2.append(r.final_infidelity)
    if not np.mean(i2) < np.mean(i1):
        failures.append("stage ordering")

    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    detail = "all properties hold" if not failures else f"failed: {sorted(set(failures))}"
    acceptance_line("C6 property suite", ok, f"{detail}, {elapsed:.1f} s (< 60 s)")
    assert ok
