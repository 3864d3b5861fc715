"""oscint: batch front door.

    oscint <check|scan|sharpness|lp|apply|converge> --config PATH [--out DIR]
           [--strict] [--threads N]

Each run writes its artifacts plus ``summary.txt`` into the output directory
and prints one PASS/FAIL/INCONCLUSIVE line per check.  Exit status: 0 when
nothing failed, 1 on a FAIL (or an INCONCLUSIVE under --strict), 2 on a bad
config or command line.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .assumptions import check_assumptions, fit_lemma1, seriescon_check
from .config import COMMANDS, ConfigError, RunConfig, load_config
from .errors import InvalidParameter, OscintError
from .field import (GridField, apply_direct, apply_spectral, band_limited_field,
                    epsilon_convergence, gaussian_field, grid_frequencies, multiplier_grid,
                    relative_l2)
from .lp import interpolation_table, pieces_csv, piece_reports, table_json
from .multiplier import AxisSpec, ScanRegion, extend_scan, fmt, scan_multiplier
from .oscquad import OperatorSpec
from .phase import GridSpec, phase_from_mapping
from .sharpness import sharpness_growth, default_t_list

PASS, FAIL, INCONCLUSIVE, INFO = "PASS", "FAIL", "INCONCLUSIVE", "INFO"
# hypotheses of the divergence construction; reported, never a failure
SHARPNESS_IDS = ("b4", "b5")


class Run:
    """Collects check lines and writes artifacts under ``out``."""

    def __init__(self, cfg: RunConfig, out: Path, threads: int):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.lines = []
        self.artifacts = []
        self.p = phase_from_mapping(cfg.phase)
        self.spec = OperatorSpec(cfg.k, cfg.theta)

    def check(self, status, name, detail=""):
        self.lines.append((status, name, detail))

    def write(self, name, text):
        path = self.out / name
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        self.artifacts.append(name)

    def write_json(self, name, obj):
        self.write(name, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# -- commands ------------------------------------------------------------------

def cmd_check(run: Run):
    sec = run.cfg.section("check")
    grid = None
    if sec["t_min"] is not None or sec["n"] is not None:
        d = GridSpec()
        grid = GridSpec(t_min=sec["t_min"] or d.t_min, n=sec["n"] or d.n)
    rep = check_assumptions(run.p, grid)
    run.write("assumptions.json", rep.to_json(indent=2, sort_keys=True) + "\n")
    for rid, rec in rep.records.items():
        detail = rec.note
        if rid in SHARPNESS_IDS:
            holds = "inconclusive" if rec.inconclusive else ("holds" if rec.holds else "does not hold")
            run.check(INFO, rid, f"{holds}; divergence hypothesis, not required for boundedness")
            continue
        if rec.status == FAIL:
            detail = f"{rec.note} (witness t={rec.witness_t!r}, s={rec.witness_s!r})"
        run.check(rec.status, rid, detail)
    try:
        fit = fit_lemma1(run.p, grid)
    except OscintError as exc:
        run.check(INCONCLUSIVE, "lemma1", str(exc))
        return
    delta = fit.delta
    run.check(PASS if delta > 0 else FAIL, "lemma1", f"delta={fmt(delta)}")
    ok, c, ws = seriescon_check(run.p, delta, fit.C)
    run.check(PASS if ok else FAIL, "seriescon",
              f"constant={fmt(c)}" + ("" if ok else f" (witness s={ws!r})"))
    run.write_json("lemma1.json", {"delta": delta, "C": fit.C, "seriescon_ok": ok,
                                   "seriescon_constant": c, "witness_s": ws})


def cmd_scan(run: Run):
    sec = run.cfg.section("scan")
    tol = run.cfg.tol or sec["tol"]
    n_xi = sec["n_xi"] or sec["n"]
    n_eta = sec["n_eta"] or sec["n"]
    region = ScanRegion(AxisSpec(*sec["xi"], n_xi, sec["law"], sec["min_abs"]),
                        AxisSpec(*sec["eta"], n_eta, sec["law"], sec["min_abs"]))
    scan = scan_multiplier(run.p, run.spec, region, tol, sec["refinements"], sec["cap"])
    before = scan.sup_abs
    if sec["extend"]:
        extend_scan(scan, run.p, run.spec, sec["extend"], sec["cap"])
    run.write("scan.csv", scan.csv_text())
    summ = scan.summary()
    summ.update({"region": region.to_dict(), "tol": tol, "failures": scan.failures,
                 "history": scan.history, "sup_before_extension": before})
    run.write_json("scan.json", summ)
    if scan.failures:
        run.check(INCONCLUSIVE, "scan-converged", f"{scan.failures} of {scan.n_samples} samples failed")
    else:
        run.check(PASS, "scan-converged", f"{scan.n_samples} samples")
    if sec["extend"] and not (before > 0 and math.isfinite(scan.sup_abs)):
        run.check(INCONCLUSIVE, "sup-stability", "no converged samples to compare")
    elif sec["extend"]:
        change = abs(scan.sup_abs - before) / before
        st = PASS if change < sec["stability"] else FAIL
        run.check(st, "sup-stability",
                  f"sup={fmt(scan.sup_abs)} relative change {change:.3g} (limit {sec['stability']})")


def cmd_sharpness(run: Run):
    sec = run.cfg.section("sharpness")
    if run.spec.k != 2:
        raise ConfigError("the stationary sequence is defined for k = 2 only", "operator.k")
    t_list = sec["t_list"] or default_t_list(run.p, sec["count"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = sharpness_growth(run.p, list(t_list), tol=run.cfg.tol or sec["tol"])
    expect_growth = not caught
    run.write("growth.csv", rep.csv_text())
    run.write_json("growth.json", rep.to_dict())
    stat = max(pt.stationarity for pt in rep.points)
    run.check(PASS if stat < 1e-9 else FAIL, "stationarity", f"max relative |g'|,|g''| = {stat:.3g}")
    if rep.excluded:
        run.check(INCONCLUSIVE, "growth", f"{len(rep.excluded)} points did not converge: {rep.excluded}")
        return
    m = rep.measured
    if expect_growth:
        inc = bool(np.all(np.diff(m[1:]) > 0))
        run.check(PASS if inc else FAIL, "growth",
                  f"measured {', '.join(f'{x:.4g}' for x in m)}; slope vs t {rep.slope_vs_t:.4g}")
    else:
        spread = float(m.max() / m.min())
        run.check(PASS if spread < 2.0 else FAIL, "bounded",
                  f"measured {', '.join(f'{x:.4g}' for x in m)}; max/min {spread:.3g}")


def cmd_lp(run: Run):
    sec = run.cfg.section("lp")
    js = sec["js"] or tuple(range(sec["j_max"] + 1))
    reps = piece_reports(run.p, run.spec.theta, js, run.spec.k, sec["tol"])
    run.write("pieces.csv", pieces_csv(reps))
    table = interpolation_table(run.p, run.spec.theta, sec["taus"], sec["J"])
    run.write("series.json", table_json(table) + "\n")
    if any(r.flagged for r in reps):
        run.check(INCONCLUSIVE, "l2-sup", f"levels {[r.j for r in reps if r.flagged]} flagged")
    for name in ("l1", "l2"):
        ratios = np.array([getattr(r, f"{name}_ratio") for r in reps])
        ratios = ratios[np.isfinite(ratios) & (ratios > 0)]
        if ratios.size < 2:
            run.check(INCONCLUSIVE, f"{name}-ratio-stability", "fewer than two finite ratios")
            continue
        spread = float(ratios.max() / ratios.min())
        run.check(PASS if spread < sec["stability"] else FAIL, f"{name}-ratio-stability",
                  f"max/min {spread:.3g} over j={js[0]}..{js[-1]} (limit {sec['stability']})")
    for s in table:
        ok = s.cauchy == s.expected_convergent
        run.check(PASS if ok else FAIL, f"series tau={s.tau:g}",
                  f"cauchy={s.cauchy}, expected {'convergent' if s.expected_convergent else 'divergent'}")


def _input_field(run: Run, sec) -> GridField:
    if sec["field"] == "file":
        return GridField.read(sec["path"])
    if sec["field"] == "band":
        return band_limited_field(sec["n"], np.random.default_rng(run.cfg.seed), sec["kmax"],
                                  sec["length"])
    return gaussian_field(sec["n"], sec["length"], width=sec["width"])


def cmd_apply(run: Run):
    sec = run.cfg.section("apply")
    f = _input_field(run, sec)
    eps, tol = sec["eps"], run.cfg.tol or sec["tol"]
    run.write("input.oscf", f.to_bytes())
    info = {"n_x": f.n_x, "n_y": f.n_y, "eps": eps, "tol": tol, "f_l2": f.l2_norm()}
    direct = spectral = None
    if sec["method"] in ("both", "direct"):
        direct = apply_direct(f, run.p, run.spec, eps)
        run.write("direct.oscf", direct.to_bytes())
        info["direct_l2"] = direct.l2_norm()
    if sec["method"] in ("both", "spectral"):
        spectral = apply_spectral(f, run.p, run.spec, eps, tol, workers=run.threads)
        run.write("spectral.oscf", spectral.to_bytes())
        xi, eta = grid_frequencies(f)
        sup = float(np.max(np.abs(multiplier_grid(run.p, run.spec, eps, xi, eta, tol))))
        ratio = spectral.l2_norm() / f.l2_norm()
        info.update({"spectral_l2": spectral.l2_norm(), "sampled_sup": sup, "ratio": ratio})
        run.check(PASS if ratio <= sup + 1e-10 else FAIL, "l2-contract",
                  f"|Tf|/|f| = {fmt(ratio)}, sampled sup = {fmt(sup)}")
    if direct is not None and spectral is not None:
        d = relative_l2(direct, spectral)
        info["discrepancy"] = d
        run.check(PASS if d < sec["agreement"] else FAIL, "cross-method",
                  f"relative L2 discrepancy {d:.3g} (limit {sec['agreement']})")
    run.write_json("apply.json", info)


def cmd_converge(run: Run):
    sec = run.cfg.section("converge")
    w = sec["width"]
    f = lambda x, y: np.exp(-(x * x + y * y) / (2.0 * w * w))
    report = None
    try:
        report = check_assumptions(run.p, which=("a3", "a4"))
        if not (report["a3"].holds and report["a4"].holds):
            report = None
    except OscintError:
        report = None
    tab = epsilon_convergence(f, sec["point"], run.p, run.spec, sec["eps0"], sec["steps"],
                              run.cfg.tol or sec["tol"], report)
    run.write_json("converge.json", tab.to_dict())
    lines = ["eps,level,re,im,diff"]
    for i, e in enumerate(tab.eps):
        diff = fmt(tab.diffs[i - 1]) if i else ""
        lines.append(f"{fmt(e)},{fmt(tab.levels[i])},{fmt(tab.values[i].real)},"
                     f"{fmt(tab.values[i].imag)},{diff}")
    run.write("converge.csv", "\n".join(lines) + "\n")
    noisy = bool(np.any(tab.diff_errors > 0.1 * tab.diffs))
    if noisy:
        run.check(INCONCLUSIVE, "monotone-differences", "differences below quadrature error")
    else:
        run.check(PASS if tab.monotone else FAIL, "monotone-differences",
                  f"diffs {', '.join(f'{d:.3g}' for d in tab.diffs)}")


DISPATCH = {"check": cmd_check, "scan": cmd_scan, "sharpness": cmd_sharpness, "lp": cmd_lp,
            "apply": cmd_apply, "converge": cmd_converge}


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oscint", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="run config (TOML)")
    ap.add_argument("--out", help="output directory (default: config 'out' or ./oscint-out)")
    ap.add_argument("--strict", action="store_true", help="treat INCONCLUSIVE as failure")
    ap.add_argument("--threads", type=int, help="worker threads (default: $OSCINT_THREADS or 1)")
    return ap


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("OSCINT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"OSCINT_THREADS must be an integer, got {env!r}") from None
    return None


def run(cfg: RunConfig, out: Path, strict: bool = False, threads: int | None = None,
        stream=None) -> int:
    stream = stream or sys.stdout
    out.mkdir(parents=True, exist_ok=True)
    r = Run(cfg, out, threads or cfg.threads or 1)
    try:
        DISPATCH[cfg.command](r)
    except ConfigError:
        raise
    except (OscintError, ArithmeticError) as exc:
        if isinstance(exc, InvalidParameter):
            raise ConfigError(str(exc)) from None
        r.check(INCONCLUSIVE, cfg.command, f"numerical failure: {exc}")
    text = [f"{s} {name}" + (f": {d}" if d else "") for s, name, d in r.lines]
    for line in text:
        print(line, file=stream)
    n_fail = sum(s == FAIL for s, _, _ in r.lines)
    n_inc = sum(s == INCONCLUSIVE for s, _, _ in r.lines)
    stamp = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    summary = text + [f"artifacts: {', '.join(r.artifacts)}", f"finished: {stamp}"]
    r.write("summary.txt", "\n".join(summary) + "\n")
    if n_fail or (strict and n_inc):
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _threads(args.threads)
        if threads is not None and threads < 1:
            raise ConfigError("must be >= 1", "--threads")
        cfg = load_config(args.config, args.command)
        out = Path(args.out or cfg.out or "oscint-out")
        return run(cfg, out, args.strict, threads)
    except ConfigError as exc:
        print(f"oscint: config error: {exc}", file=sys.stderr)
        return 2
    except InvalidParameter as exc:
        print(f"oscint: invalid parameter: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
