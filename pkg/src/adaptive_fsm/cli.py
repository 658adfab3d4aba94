"""Command-line entry point.

Exit codes: 0 success, 1 a checked property failed (or the inversion was
degenerate), 2 usage or I/O problems.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateInversionError, GridError, SingularFiducialError
from .fisher import fim_report, classical_fim
from .fitting import fit_scaling, grid_from_summaries
from .montecarlo import ExperimentConfig, run_experiment
from .povm import FsmCoefficients, Povm, canonical_fsm, check_fsm, COMPLETENESS_TOL
from .reconstruct import LikelihoodDataset, TwoFsmStatistics, analytic_estimate, mle_refine
from .splits import SPLITS
from .states import PureState, infidelity

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "AFSM_SEED"
RUNS_CSV = "runs.csv"
SUMMARY_JSON = "summary.json"
MANIFEST_JSON = "manifest.json"


class UsageError(Exception):
    """Bad input file or arguments; maps to exit code 2."""


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"{path}: no such file") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: cannot parse JSON ({exc})") from exc


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


# verify-fsm


def _load_measurement(path) -> tuple[FsmCoefficients, Povm | None]:
    obj = _load_json(path)
    try:
        if "beta0" in obj:
            return FsmCoefficients.from_json(obj), None
        povm = Povm.from_json(obj, label=str(path), check=False)
        return FsmCoefficients.from_povm(povm), povm
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: not a POVM or FSM-coefficient file ({exc})") from exc


def cmd_verify_fsm(args) -> int:
    if args.canonical is not None:
        c, povm = canonical_fsm(args.canonical), None
        print(f"canonical FSM, d = {c.dim}, n = {c.n}")
    else:
        c, povm = _load_measurement(args.file)
        print(f"{args.file}: d = {c.dim}, n = {c.n}")
    ok = True
    if povm is not None:
        res = povm.completeness_residual()
        good = res < COMPLETENESS_TOL
        ok &= good
        print(f"completeness residual     {res:.3e}  {'ok' if good else 'FAIL'}")
    rep = check_fsm(c, args.tol)
    print(f"condition violations      orthogonality {rep.orthogonality:.3e}, completeness {rep.completeness:.3e}")
    print(f"max violation             {rep.max_violation:.3e}  {'ok' if rep.passed else 'FAIL'}")
    ok &= rep.passed
    try:
        fr = fim_report(c)
    except (SingularFiducialError, np.linalg.LinAlgError) as exc:
        print(f"fisher information        FAIL ({exc})")
        return EXIT_FAIL
    print(f"FIM uniformity deviation  {fr['uniformity_deviation']:.3e}  {'ok' if fr['uniform'] else 'FAIL'}")
    print(f"Gill-Massar trace         {fr['gill_massar_trace']:.6f} (d - 1 = {c.dim - 1})  "
          f"{'ok' if fr['saturated'] else 'FAIL'}")
    ok &= fr["passed"]
    if args.emit_fim:
        np.savetxt(args.emit_fim, classical_fim(c), delimiter=",", fmt="%.17g")
        print(f"classical FIM written to {args.emit_fim}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


# simulate / rerun


def _out_paths(out: str) -> tuple[Path, Path]:
    """``--out`` is a directory, or a .csv path whose parent becomes the directory."""
    p = Path(out)
    if p.suffix.lower() == ".csv":
        return p.parent, p
    return p, p / RUNS_CSV


def _simulate(cfg: ExperimentConfig, out: str, threads: int | None, progress: bool, exclude_failed: bool,
              command: list[str]) -> int:
    outdir, runs_path = _out_paths(out)
    outdir.mkdir(parents=True, exist_ok=True)
    started = _now()

    def report(sid, total):
        print(f"state {sid + 1}/{total} done", file=sys.stderr, flush=True)

    summary = run_experiment(cfg, workers=threads, progress=report if progress else None,
                             exclude_failed=exclude_failed)
    summary.write_runs_csv(runs_path)
    summary_path = outdir / SUMMARY_JSON
    _write_json(summary_path, summary.to_json())
    _write_json(outdir / MANIFEST_JSON, {
        "command": command,
        "config": cfg.to_json(),
        "master_seed": cfg.master_seed,
        "exclude_failed": exclude_failed,
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": {"runs": runs_path.name, "summary": summary_path.name},
    })
    n = cfg.N
    print(f"d={cfg.d} N={n} split={cfg.split}: <I1> = {summary.grand_mean_stage1:.6e}, "
          f"<I2> = {summary.grand_mean_stage2:.6e} ({summary.grand_mean_stage2 * n / (cfg.d - 1):.4f} (d-1)/N), "
          f"fallbacks {summary.n_failed}")
    return EXIT_OK


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from exc


def cmd_simulate(args) -> int:
    base = ExperimentConfig.load(args.config).to_json() if args.config else {}
    overrides = {"d": args.d, "N": args.N, "n_states": args.states, "n_reps": args.reps,
                 "split": args.split, "master_seed": args.seed}
    base.update({k: v for k, v in overrides.items() if v is not None})
    base.setdefault("master_seed", _default_seed())
    if "d" not in base or "N" not in base:
        raise UsageError("--d and --N are required (or a --config providing them)")
    try:
        cfg = ExperimentConfig.from_json(base)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    return _simulate(cfg, args.out, args.threads, args.progress, args.exclude_failed, sys.argv[1:])


def cmd_rerun(args) -> int:
    man = _load_json(args.manifest)
    try:
        cfg = ExperimentConfig.from_json(man["config"])
        runs_name = man["outputs"]["runs"]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.manifest}: malformed manifest ({exc})") from exc
    outdir = Path(args.out) if args.out else Path(args.manifest).parent
    return _simulate(cfg, str(outdir / runs_name), args.threads, False, bool(man.get("exclude_failed", False)),
                     man.get("command", []))


# fit


def _grid_from_csv(path, stage: int) -> dict:
    grid = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = f"stage{stage}" if f"stage{stage}" in row else "infidelity"
            grid[(int(row["d"]), int(float(row["N"])))] = float(row[key])
    return grid


def cmd_fit(args) -> int:
    src = Path(args.grid)
    try:
        if src.is_dir():
            found = [_load_json(f) for f in sorted(src.rglob("*.json"))]
            found = [o for o in found if isinstance(o, dict) and "grand_mean" in o]
            if not found:
                raise UsageError(f"{src}: no experiment summaries found")
            grid = grid_from_summaries(found, args.stage)
        elif src.is_file():
            grid = _grid_from_csv(src, args.stage)
        else:
            raise UsageError(f"{src}: no such file or directory")
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{src}: malformed grid ({exc})") from exc
    try:
        fit = fit_scaling(grid, args.stage)
    except GridError as exc:
        raise UsageError(str(exc)) from exc
    print(f"stage {fit.stage}: alpha = {fit.alpha:.6g} +- {fit.alpha_err:.2g}, "
          f"beta = {fit.beta:.6g} +- {fit.beta_err:.2g}, gamma = {fit.gamma:.6g} +- {fit.gamma_err:.2g}")
    for row in fit.per_d:
        print(f"  d = {row['d']:3d}: alpha = {row['alpha']:.4g}, beta = {row['beta']:.4g}")
    for row in fit.per_n:
        print(f"  log10 N = {row['log10_N']:.2f}: gamma = {row['gamma']:.4g}")
    if args.out:
        _write_json(args.out, fit.to_json())
    return EXIT_OK


# reconstruct


def _pair(obj, key):
    if not isinstance(obj, dict) or "plus" not in obj or "minus" not in obj:
        raise UsageError(f"'{key}' needs 'plus' and 'minus' arrays")
    return np.asarray(obj["plus"], dtype=float), np.asarray(obj["minus"], dtype=float)


def cmd_reconstruct(args) -> int:
    obj = _load_json(args.file)
    try:
        c = FsmCoefficients.from_json(obj["coefficients"])
        truth = PureState.from_json(obj["truth"]) if "truth" in obj else None
        if "counts" in obj:
            wp, wm = _pair(obj["counts"], "counts")
            stats = TwoFsmStatistics(wp / wp.sum(), wm / wm.sum(), float(wp.sum()), float(wm.sum()))
        elif "frequencies" in obj:
            wp, wm = _pair(obj["frequencies"], "frequencies")
            stats = TwoFsmStatistics(wp, wm)
        else:
            raise UsageError("input needs 'counts' or 'frequencies'")
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.file}: malformed input ({exc})") from exc

    info: dict = {}
    try:
        init = analytic_estimate(stats, c, info)
    except DegenerateInversionError as exc:
        print(f"degenerate inversion: {exc}", file=sys.stderr)
        return EXIT_FAIL
    data = LikelihoodDataset([(c.to_povm(+1), wp), (c.to_povm(-1), wm)])
    mle = mle_refine(data, init)
    diag = {
        "surviving_outcomes": info.get("surviving_outcomes"),
        "ambiguous_root": "alternative" in info,
        "mle_iterations": mle.iterations,
        "log_likelihood": mle.log_likelihood,
        "analytic_estimate": init.to_json(),
    }
    if truth is not None:
        diag["infidelity_to_truth"] = infidelity(truth, mle.state)
        diag["analytic_infidelity_to_truth"] = infidelity(truth, init)
    result = {"state": mle.state.to_json(), "diagnostics": diag}
    text = json.dumps(result, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afsm", description="Adaptive FSM pure-state estimation toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify-fsm", help="check FSM conditions and Fisher symmetry")
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--canonical", type=int, metavar="D", help="check the built-in FSM of dimension D")
    src.add_argument("file", nargs="?", help="POVM or FSM-coefficient JSON")
    v.add_argument("--emit-fim", metavar="CSV", help="write the classical FIM at the fiducial")
    v.add_argument("--tol", type=float, default=1e-10)
    v.set_defaults(func=cmd_verify_fsm)

    s = sub.add_parser("simulate", help="Monte Carlo experiment over Haar-random states")
    s.add_argument("--d", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--split", choices=sorted(SPLITS))
    s.add_argument("--states", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    s.add_argument("--config", help="ExperimentConfig JSON; flags override its fields")
    s.add_argument("--out", default="results", help="output directory (or runs CSV path)")
    s.add_argument("--threads", type=int, default=None, help="worker processes (default: all CPUs)")
    s.add_argument("--progress", action="store_true", help="per-state completion lines on stderr")
    s.add_argument("--exclude-failed", action="store_true", help="drop fallback runs from the averages")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rerun", help="repeat a simulation from its manifest")
    r.add_argument("manifest")
    r.add_argument("--out", help="output directory (default: the manifest's)")
    r.add_argument("--threads", type=int, default=None)
    r.set_defaults(func=cmd_rerun)

    f = sub.add_parser("fit", help="fit I = alpha (d-1)^gamma / N^beta")
    f.add_argument("--stage", type=int, choices=(1, 2), required=True)
    f.add_argument("--grid", required=True, help="directory of summary.json files, or CSV with d,N,stage1,stage2")
    f.add_argument("--out", help="fit JSON path")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("reconstruct", help="estimate a state from E+/E- data")
    c.add_argument("file", help="JSON with coefficients, counts or frequencies, optional truth")
    c.add_argument("--out", help="also write the result JSON here")
    c.set_defaults(func=cmd_reconstruct)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"afsm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"afsm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
