import numpy as np
import pytest

from adaptive_fsm.montecarlo import ExperimentConfig, RunRecord, run_experiment, summarize, truth_state


@pytest.fixture(scope="module")
def d4_summary():
    return run_experiment(ExperimentConfig(d=4, N=10**5, n_states=100, n_reps=10, split="2/4", master_seed=0))


def test_qubit_sanity_envelope():
    s = run_experiment(ExperimentConfig(d=2, N=10**4, n_states=10, n_reps=3, master_seed=1))
    assert 0 < s.grand_mean_stage2 < 0.1
    assert len(s.runs) == 30


def test_d4_reference_level(d4_summary):
    assert d4_summary.grand_mean_stage2 == pytest.approx(1.4 * 3 / 10**5, rel=0.30)


def test_summary_invariants(d4_summary):
    s = d4_summary
    assert s.grand_mean_stage2 >= s.gmb_stage2 == pytest.approx(3e-5)
    assert s.gmb_stage1 == pytest.approx(6e-5)
    assert abs(s.grand_mean_stage2 - np.mean(s.per_state_stage2)) < 1e-12
    assert abs(s.grand_mean_stage1 - np.mean(s.per_state_stage1)) < 1e-12
    assert s.std_stage1 >= 0 and s.std_stage2 >= 0
    assert s.per_state_stage2.shape == (100,)


def test_narrow_spread_at_1e6():
    s = run_experiment(ExperimentConfig(d=4, N=10**6, n_states=100, n_reps=10, master_seed=3))
    assert s.std_stage2 < 0.5 * s.grand_mean_stage2


def test_same_seed_bit_identical():
    cfg = ExperimentConfig(d=3, N=2000, n_states=5, n_reps=3, master_seed=9)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a.to_json() == b.to_json()
    assert [r.row() for r in a.runs] == [r.row() for r in b.runs]


def test_parallel_equals_serial():
    cfg = ExperimentConfig(d=3, N=2000, n_states=6, n_reps=2, master_seed=4)
    a, b = run_experiment(cfg, workers=1), run_experiment(cfg, workers=3)
    assert a.to_json() == b.to_json()
    assert [r.row() for r in a.runs] == [r.row() for r in b.runs]


def test_seed_changes_truths():
    a = truth_state(ExperimentConfig(d=4, N=100, master_seed=1), 0)
    b = truth_state(ExperimentConfig(d=4, N=100, master_seed=2), 0)
    c = truth_state(ExperimentConfig(d=4, N=100, master_seed=1), 1)
    assert not np.allclose(a.amplitudes, b.amplitudes)
    assert not np.allclose(a.amplitudes, c.amplitudes)


def test_progress_callback():
    seen = []
    run_experiment(ExperimentConfig(d=2, N=100, n_states=4, n_reps=1), progress=lambda i, n: seen.append((i, n)))
    assert seen == [(0, 4), (1, 4), (2, 4), (3, 4)]


def test_failed_runs_kept_or_excluded():
    cfg = ExperimentConfig(d=2, N=100, n_states=2, n_reps=2)
    runs = [
        RunRecord(0, 0, 0.1, 0.01, 0, 3, 3, False),
        RunRecord(0, 1, 0.3, 0.03, 0, 3, 3, True),
        RunRecord(1, 0, 0.2, 0.02, 1, 3, 3, False),
        RunRecord(1, 1, 0.2, 0.02, 1, 3, 3, False),
    ]
    kept = summarize(cfg, runs)
    dropped = summarize(cfg, runs, exclude_failed=True)
    assert kept.n_failed == dropped.n_failed == 1
    assert kept.per_state_stage2[0] == pytest.approx(0.02)
    assert dropped.per_state_stage2[0] == pytest.approx(0.01)
    assert len(dropped.runs) == 4


def test_config_validation_and_json():
    with pytest.raises(ValueError):
        ExperimentConfig(d=3, N=100, n_states=0)
    with pytest.raises(ValueError):
        ExperimentConfig(d=3, N=100, n_reps=0)
    with pytest.raises(ValueError):
        ExperimentConfig(d=3, N=100, split="1/2")
    cfg = ExperimentConfig(d=5, N=123, n_states=7, n_reps=2, split="2/5", master_seed=11)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_runs_csv(tmp_path):
    s = run_experiment(ExperimentConfig(d=2, N=200, n_states=2, n_reps=2))
    s.write_runs_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].split(",")[:7] == [
        "state_id", "rep", "stage1_infidelity", "final_infidelity", "fiducial_index", "mle_iters_1", "mle_iters_2",
    ]
    assert len(lines) == 5
