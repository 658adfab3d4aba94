"""Three-step regression of log10 I = log10 alpha - beta log10 N + gamma log10(d - 1).

1. gamma: slope of log10 I against log10(d-1), separately for every N.
2. beta: minus the slope of log10 I against log10 N, separately for every d.
3. alpha: with beta and gamma fixed at the averages of steps 1-2, the remaining
   model is linear in log10 alpha, so its least-squares value per d is the mean
   residual log10 I + beta log10 N - gamma log10(d-1).

For stage 1 the ensemble size in the model is N/2.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .errors import GridError

LN10 = np.log(10.0)


@dataclass
class ScalingFit:
    alpha: float
    beta: float
    gamma: float
    alpha_err: float
    beta_err: float
    gamma_err: float
    stage: int
    n_for_stage1_halved: bool
    beta_spread: float = 0.0  # std of the per-d slopes
    gamma_spread: float = 0.0  # std of the per-N slopes
    per_d: list[dict] = field(default_factory=list)
    per_n: list[dict] = field(default_factory=list)

    def predict(self, d, n_shots) -> np.ndarray:
        n_eff = np.asarray(n_shots, dtype=float) / (2.0 if self.n_for_stage1_halved else 1.0)
        return self.alpha * np.asarray(d - 1.0) ** self.gamma / n_eff**self.beta

    def log_residuals(self, grid: dict) -> np.ndarray:
        return np.array([np.log10(v) - np.log10(self.predict(d, n)) for (d, n), v in sorted(grid.items())])

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "n_for_stage1_halved": self.n_for_stage1_halved,
            "alpha": self.alpha,
            "alpha_err": self.alpha_err,
            "beta": self.beta,
            "beta_err": self.beta_err,
            "beta_spread": self.beta_spread,
            "gamma": self.gamma,
            "gamma_err": self.gamma_err,
            "gamma_spread": self.gamma_spread,
            "per_d": self.per_d,
            "per_N": self.per_n,
        }


def _slope(x, y) -> tuple[float, float, float, float]:
    """OLS slope, its standard error, intercept and intercept standard error."""
    r = linregress(x, y)
    se = 0.0 if len(x) < 3 else float(r.stderr)
    ise = 0.0 if len(x) < 3 else float(r.intercept_stderr)
    return float(r.slope), se, float(r.intercept), ise


def _mean_err(errs) -> float:
    errs = np.asarray(errs, dtype=float)
    return float(np.sqrt(np.sum(errs**2)) / errs.size)


def fit_scaling(grid: dict, stage: int = 2) -> ScalingFit:
    """Fit alpha, beta, gamma to ``grid`` mapping (d, N) -> mean infidelity."""
    if stage not in (1, 2):
        raise ValueError(f"stage must be 1 or 2, got {stage}")
    if not grid:
        raise GridError("empty grid")
    halve = stage == 1
    pts = []
    for (d, n), val in grid.items():
        if not val > 0:
            raise GridError(f"infidelity at d={d}, N={n} must be positive, got {val}")
        n_eff = n / 2.0 if halve else float(n)
        pts.append((int(d), float(n), np.log10(d - 1.0), np.log10(n_eff), np.log10(val)))

    by_n = defaultdict(list)
    by_d = defaultdict(list)
    for p in pts:
        by_n[p[1]].append(p)
        by_d[p[0]].append(p)
    ds = sorted(by_d)
    ns = sorted(by_n)
    if len(ds) < 2 or len(ns) < 2:
        raise GridError(f"need >= 2 distinct d and N values, got {len(ds)} and {len(ns)}")

    per_n = []
    for n in ns:
        rows = by_n[n]
        if len({r[0] for r in rows}) < 2:
            raise GridError(f"N={n:g} has fewer than 2 distinct d values")
        g, g_se, _, _ = _slope([r[2] for r in rows], [r[4] for r in rows])
        per_n.append({"N": n, "log10_N": float(np.log10(n)), "gamma": g, "gamma_err": g_se, "points": len(rows)})

    per_d = []
    for d in ds:
        rows = by_d[d]
        if len({r[1] for r in rows}) < 2:
            raise GridError(f"d={d} has fewer than 2 distinct N values")
        b, b_se, _, _ = _slope([r[3] for r in rows], [r[4] for r in rows])
        per_d.append({"d": d, "beta": -b, "beta_err": b_se, "points": len(rows)})

    gamma = float(np.mean([r["gamma"] for r in per_n]))
    beta = float(np.mean([r["beta"] for r in per_d]))

    all_log_alpha = []
    for entry in per_d:
        rows = by_d[entry["d"]]
        la = np.array([r[4] + beta * r[3] - gamma * r[2] for r in rows])
        all_log_alpha.extend(la)
        la_se = float(np.std(la, ddof=1) / np.sqrt(la.size)) if la.size > 1 else 0.0
        entry["alpha"] = float(10 ** la.mean())
        entry["alpha_err"] = entry["alpha"] * LN10 * la_se
    all_log_alpha = np.array(all_log_alpha)
    log_alpha = all_log_alpha.mean()
    alpha = float(10**log_alpha)
    alpha_se = float(np.std(all_log_alpha, ddof=1) / np.sqrt(all_log_alpha.size))

    return ScalingFit(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        alpha_err=alpha * LN10 * alpha_se,
        beta_err=_mean_err([r["beta_err"] for r in per_d]),
        gamma_err=_mean_err([r["gamma_err"] for r in per_n]),
        stage=stage,
        n_for_stage1_halved=halve,
        beta_spread=float(np.std([r["beta"] for r in per_d])),
        gamma_spread=float(np.std([r["gamma"] for r in per_n])),
        per_d=per_d,
        per_n=per_n,
    )


def grid_from_summaries(summaries, stage: int) -> dict:
    """(d, N) -> grand-mean infidelity from ExperimentSummary objects or their JSON dicts."""
    grid = {}
    for s in summaries:
        obj = s if isinstance(s, dict) else s.to_json()
        cfg = obj["config"]
        grid[(int(cfg["d"]), int(cfg["N"]))] = float(obj["grand_mean"][f"stage{stage}"])
    return grid
