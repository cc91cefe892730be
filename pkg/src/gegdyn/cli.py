"""Command-line entry point: ``gegdyn <command> [options]``.

Every command writes its outputs plus ``manifest.json`` (the fully
resolved options) into ``--out``. Passing that manifest back through
``--config`` reproduces the run; explicit flags override config values.
Exit status: 0 success, 1 usage or input error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, basins, dynamics, problems
from .calculus import GegConfig, Variant, make_operators

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2

# per-command defaults for options shared by several commands
_DEFAULTS = {
    "common": {"problem": "bilinear_xy", "eta": 0.1, "tau": 1.0, "gamma": 1.0, "variant": "geg",
               "h1x": None, "h1y": None, "h2x": None, "h2y": None, "seed": 0, "out": "out",
               "max_iters": 100_000, "tol_grad": 1e-8},
    "run": {"z0": None, "stride": 1, "include_z": False},
    "sweep-table": {"rows": None, "sim_iters": 10_000},
    "analyze": {"problem": "multi_critical", "eta": 1e-6, "gamma": 0.5, "box": None, "starts": 500,
                "lipschitz": None},
    "basin": {"problem": "multi_critical", "eta": 1e-4, "gamma": 0.5, "box": "-5:3,-2:2",
              "resolution": "200x100", "workers": 1, "max_iters": 1_000_000, "accelerate": True},
    "verify": {"density": 2000, "gamma_probe": 1.0, "seeds": 200, "suite_size": 100},
    "erm": {"eta": 0.01, "tau": 2.0, "gamma": 0.8, "csv": None, "synthetic": None, "label": "label",
            "hidden": 50, "alpha": 1.0, "folds": 5, "max_iters": 2000, "stride": 1},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p):
    g = p.add_argument_group("common options")
    g.add_argument("--config", help="key=value file or JSON manifest; explicit flags win")
    g.add_argument("--problem", help=f"builtin name ({', '.join(problems.BUILTIN_NAMES)})")
    g.add_argument("--eta", type=float, help="extrapolation step (h1y)")
    g.add_argument("--tau", type=float, help="timescale ratio h1y/h1x")
    g.add_argument("--gamma", type=float, help="update-to-extrapolation ratio h2x/h1x")
    g.add_argument("--variant", help="geg, eg, tau-eg, eg+ or gda")
    for name in ("h1x", "h1y", "h2x", "h2y"):
        g.add_argument(f"--{name}", type=float, help="raw block step (all four or none)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol-grad", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gegdyn", description="Generalised extra-gradient dynamics toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("run", help="iterate from one initial point")
    _common(p)
    p.add_argument("--z0", help="comma-separated initial point (default: all ones)")
    p.add_argument("--stride", type=int, help="record every k-th iterate")
    p.add_argument("--include-z", action="store_true", default=None, help="write iterates to the trace")

    p = sub.add_parser("sweep-table", help="tau-EG / EG+ / GEG convergence table for a quadratic problem")
    _common(p)
    p.add_argument("--rows", help="'eta,tau,gamma;eta,tau,gamma;...' (default: the bilinear table)")
    p.add_argument("--sim-iters", type=int, help="iterations of the simulation check")

    p = sub.add_parser("analyze", help="critical points, stability and saddle verdicts")
    _common(p)
    p.add_argument("--box", help="search box 'lo:hi,lo:hi,...' (use --box=... for negative bounds)")
    p.add_argument("--starts", type=int, help="multistart count")
    p.add_argument("--lipschitz", type=float, help="L for the certificates (default: known or sampled)")

    p = sub.add_parser("basin", help="region-of-attraction grid")
    _common(p)
    p.add_argument("--box", help="'xlo:xhi,ylo:yhi'")
    p.add_argument("--resolution", help="NXxNY, e.g. 200x100")
    p.add_argument("--workers", type=int, help="threads for the compiled sweep")
    p.add_argument("--no-accelerate", dest="accelerate", action="store_false", default=None,
                   help="disable capture sets around stable equilibria")

    p = sub.add_parser("verify", help="numerical checks of the spectral results")
    _common(p)
    p.add_argument("--density", type=int, help="grid density for the region checks")
    p.add_argument("--gamma-probe", type=float)
    p.add_argument("--seeds", type=int, help="random problems in the Re(kappa) suite")
    p.add_argument("--suite-size", type=int, help="random problems in each inclusion suite")

    p = sub.add_parser("erm", help="robust ERM training with cross-validation folds")
    _common(p)
    p.add_argument("--csv", help="data file with a label column")
    p.add_argument("--synthetic", nargs="+", metavar="KEY=VALUE",
                   help="Gaussian blobs: rows=R features=V seed=S")
    p.add_argument("--label", help="label column name")
    p.add_argument("--hidden", type=int, help="hidden layer width")
    p.add_argument("--alpha", type=float, help="weight regulariser")
    p.add_argument("--folds", type=int)
    p.add_argument("--stride", type=int, help="record every k-th iterate")
    return parser


# --------------------------------------------------------------------------
# option resolution


def _coerce(text):
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null", ""):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text.strip()


def load_config(path) -> dict:
    """Flat ``key = value`` text (``#`` comments) or a JSON manifest."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        data = data.get("options", data)
    else:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            data[key.strip()] = _coerce(value)
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(args) -> dict:
    opts = dict(_DEFAULTS["common"])
    opts.update(_DEFAULTS[args.command])
    if args.config:
        try:
            loaded = load_config(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - set(opts)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        opts.update(loaded)
    for key in opts:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def make_config(opts) -> GegConfig:
    raw = [opts.get(k) for k in ("h1x", "h1y", "h2x", "h2y")]
    try:
        variant = Variant.parse(str(opts["variant"]))
        if any(v is not None for v in raw):
            if any(v is None for v in raw):
                raise UsageError("raw step sizes need all of --h1x --h1y --h2x --h2y")
            return GegConfig(*(float(v) for v in raw), variant=variant)
        return analysis.variant_config(variant, float(opts["eta"]), float(opts["tau"]), float(opts["gamma"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _problem(opts):
    try:
        return problems.builtin(str(opts["problem"]))
    except KeyError as exc:
        raise UsageError(f"unknown problem {opts['problem']!r}; builtins: "
                         f"{', '.join(problems.BUILTIN_NAMES)}") from exc


def _budget(opts, **extra):
    try:
        return dynamics.IterationBudget(max_iters=int(opts["max_iters"]), tol_grad=float(opts["tol_grad"]),
                                        **extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _floats(text, what):
    try:
        return [float(v) for v in str(text).split(",")]
    except ValueError as exc:
        raise UsageError(f"bad {what}: {text!r}") from exc


def parse_box(text):
    box = []
    for part in str(text).split(","):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError as exc:
            raise UsageError(f"bad box interval {part!r}; expected lo:hi") from exc
        if not hi > lo:
            raise UsageError(f"empty box interval {part!r}")
        box.append((lo, hi))
    return box


def parse_rows(text):
    rows = []
    for part in str(text).split(";"):
        vals = _floats(part, "table row")
        if len(vals) != 3:
            raise UsageError(f"table row {part!r} needs eta,tau,gamma")
        rows.append(tuple(vals))
    return rows


def parse_synthetic(items):
    if isinstance(items, str):
        items = items.replace(",", " ").split()
    spec = {"rows": 200, "features": 10, "seed": 0}
    for item in items:
        for piece in str(item).split(","):
            if not piece:
                continue
            key, sep, value = piece.partition("=")
            if not sep or key not in spec:
                raise UsageError(f"bad --synthetic entry {piece!r}; keys: rows, features, seed")
            try:
                spec[key] = int(value)
            except ValueError as exc:
                raise UsageError(f"--synthetic {key} must be an integer") from exc
    return spec


# --------------------------------------------------------------------------
# output helpers


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(value):
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _out_dir(opts) -> Path:
    out = Path(str(opts["out"]))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out, command, opts):
    _write_json(out / "manifest.json", {"command": command, "version": __version__,
                                        "options": {k: _jsonable(v) for k, v in opts.items()}})


def _fmt3(values):
    return ", ".join(f"{v:.3f}".replace("-0.000", "0.000") for v in values)


def _yes(flag):
    return "YES" if flag else "NO"


# --------------------------------------------------------------------------
# commands


def cmd_run(opts) -> int:
    problem = _problem(opts)
    config = make_config(opts)
    z0 = np.ones(problem.dim) if opts["z0"] is None else np.array(_floats(opts["z0"], "--z0"))
    if z0.size != problem.dim:
        raise UsageError(f"--z0 needs {problem.dim} values, got {z0.size}")
    budget = _budget(opts, stride=int(opts["stride"]), store_iterates=bool(opts["include_z"]))
    trace = dynamics.iterate(make_operators(problem, config), z0, budget)
    out = _out_dir(opts)
    dynamics.write_trace_csv(trace, out / "trace.csv", include_z=bool(opts["include_z"]))
    summary = trace.summary()
    summary["config"] = config.to_dict()
    summary["verdict_text"] = str(trace.verdict)
    _write_json(out / "summary.json", summary)
    _manifest(out, "run", opts)
    print(f"{trace.verdict} after {trace.iterations} iterations, "
          f"||grad f|| = {trace.final_grad_norm:.3e}")
    return EXIT_OK


def cmd_sweep_table(opts) -> int:
    problem = _problem(opts)
    rows = analysis.BILINEAR_TABLE_ROWS if opts["rows"] is None else parse_rows(opts["rows"])
    try:
        table = analysis.convergence_table(problem, rows, iters=int(opts["sim_iters"]))
    except analysis.NotQuadraticError as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(opts)
    names = ["tau_eg", "eg_plus", "geg"]
    agree = True
    with open(out / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "tau", "gamma"] + names + [f"rho_{n}" for n in names]
                   + [f"sim_{n}" for n in names])
        print(f"{'eta':>6} {'tau':>6} {'gamma':>6} | {'tau-EG':>6} {'EG+':>6} {'GEG':>6} | simulation")
        for (eta, tau, gamma), cells in table:
            w.writerow([eta, tau, gamma] + [c.verdict for c in cells]
                       + [repr(c.spectral_radius) for c in cells] + [c.simulated_verdict for c in cells])
            agree &= all(c.agrees for c in cells)
            print(f"{eta:>6g} {tau:>6g} {gamma:>6g} | " + " ".join(f"{c.verdict:>6}" for c in cells)
                  + " | " + " ".join(c.simulated_verdict for c in cells))
    _manifest(out, "sweep-table", opts)
    if not agree:
        print("spectral and simulated verdicts disagree", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _default_box(problem):
    if problem.name == "multi_critical":
        return [(-10.0, 45.0), (-10.0, 10.0)]
    return [(-2.0, 2.0)] * problem.dim


def cmd_analyze(opts) -> int:
    problem = _problem(opts)
    config = make_config(opts)
    box = _default_box(problem) if opts["box"] is None else parse_box(opts["box"])
    if len(box) != problem.dim:
        raise UsageError(f"--box needs {problem.dim} intervals")
    points = analysis.find_critical_points(problem, box, starts=int(opts["starts"]), seed=int(opts["seed"]))
    lip = opts["lipschitz"]
    if lip is None:
        lip = problem.lipschitz_hint
    if lip is None:
        lip = analysis.sampled_lipschitz(problem, box, seed=int(opts["seed"]))
    cert = analysis.certify_params(config.eta, config.tau, config.gamma, L=float(lip))
    reports = [analysis.report(problem, config, z) for z in points]
    out = _out_dir(opts)
    with open(out / "critical_points.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"z{i}" for i in range(problem.dim)] + ["geg_stable", "saddle", "saddle_verdict",
                                                             "spectral_radius"])
        for r in reports:
            w.writerow([f"{v:.6f}" for v in r.location] + [_yes(r.stable), _yes(r.saddle.possible_saddle),
                                                          r.saddle.kind.value, repr(r.stability.spectral_radius)])
            print(f"({_fmt3(r.location)})  GEG-stable {_yes(r.stable):<3}  saddle {_yes(r.saddle.possible_saddle):<3}"
                  f"  [{r.saddle.kind.value}, rho = {r.stability.spectral_radius:.12g}]")
    _write_json(out / "report.json", {"config": config.to_dict(), "certificate": cert.to_dict(),
                                      "lipschitz": float(lip), "points": [r.to_dict() for r in reports]})
    _manifest(out, "analyze", opts)
    return EXIT_OK


def cmd_basin(opts) -> int:
    problem = _problem(opts)
    config = make_config(opts)
    box = parse_box(opts["box"])
    if len(box) != 2:
        raise UsageError("--box needs two intervals")
    try:
        nx, ny = (int(v) for v in str(opts["resolution"]).lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"bad --resolution {opts['resolution']!r}; expected NXxNY") from exc
    budget = _budget(opts, store_iterates=False)
    try:
        grid = basins.sweep(problem, config, box, (nx, ny), budget, workers=int(opts["workers"]),
                            seed=int(opts["seed"]), accelerate=bool(opts["accelerate"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    reports = basins.legend_reports(problem, config, grid)
    out = _out_dir(opts)
    basins.write_grid_csv(grid, out / "grid.csv")
    legend = basins.legend_dict(grid, reports)
    legend["unstable_mass"] = basins.unstable_mass(grid, reports)
    _write_json(out / "legend.json", legend)
    _manifest(out, "basin", opts)
    for row in legend["equilibria"]:
        if row["cells"]:
            print(f"label {row['label']}: ({_fmt3(row['point'])}) {row['stability']}, {row['cells']} cells")
    for name, count in legend["other_counts"].items():
        if count:
            print(f"{name}: {count} cells")
    print(f"unstable mass: {legend['unstable_mass']:g}")
    return EXIT_OK


# step sizes studied for each builtin; the absolute 1e-8 tolerance on the
# eigenvalue map needs eta * |kappa| of moderate size
LEMMA3_CONFIGS = {
    "bilinear_xy": [(0.9, 1.0, 0.1), (0.9, 2.0, 0.25), (0.5, 200.0, 2.0)],
    "multi_critical": [(1e-6, 1.0, 0.5), (1e-4, 1.0, 0.5)],
    "quadratic_counterexample": [(0.7, 1.0, 0.2), (0.3, 2.0, 0.8)],
}


def verification_checks(density=2000, gamma_probe=1.0, seeds=200, suite_size=100, seed=0):
    """All numerical checks behind ``gegdyn verify`` as ``(name, value, ok)`` rows."""
    checks = []
    reg = analysis.verify_appendix_regions(density, gamma_probe)
    checks.append(("region max_modulus", reg.max_modulus, reg.max_modulus <= 1.0 + 1e-9))
    checks.append(("region min_ratio", reg.min_ratio, reg.min_ratio > 1.0))
    worst = analysis.lemma2_property_suite(seeds, seed=seed)
    checks.append(("max Re(kappa) over saddle-condition quadratics", worst, worst <= 1e-8))
    mismatch = 0.0
    for name in problems.BUILTIN_NAMES:
        prob = problems.builtin(name)
        box = _default_box(prob)
        for z in analysis.find_critical_points(prob, box, starts=200, seed=seed):
            for eta, tau, gamma in LEMMA3_CONFIGS[name]:
                cfg = GegConfig.from_params(eta, tau, gamma)
                mismatch = max(mismatch, analysis.lemma3_check(prob, cfg, z))
    for s in range(20):
        rng = np.random.default_rng([seed, 7, s])
        prob, _ = analysis.random_saddle_quadratic(rng)
        cfg = GegConfig.from_params(rng.uniform(0.05, 0.9), rng.uniform(0.1, 10.0), rng.uniform(0.05, 2.0))
        mismatch = max(mismatch, analysis.lemma3_check(prob, cfg, np.zeros(prob.dim)))
    checks.append(("eigenvalue map mismatch", mismatch, mismatch <= 1e-8))
    for real, label in ((False, "gamma in (0,1]"), (True, "real spectrum, gamma in (0,8)")):
        suite = analysis.inclusion_suite(suite_size, seed=seed, real_spectrum=real)
        stable = sum(r.stable for r, _ in suite)
        gated = all((c.thm_real_ok if real else c.thm_general_ok) for _, c in suite)
        checks.append((f"strict saddles stable ({label})", stable, stable == suite_size and gated))
    prob = problems.builtin("quadratic_counterexample")
    rep = analysis.report(prob, GegConfig.from_params(0.7, 1.0, 0.2), np.zeros(2))
    witness = rep.stable and rep.saddle.kind is analysis.Saddle.NOT_SADDLE
    checks.append(("stable non-saddle witness", rep.stability.spectral_radius, witness))
    return checks


def cmd_verify(opts) -> int:
    checks = verification_checks(int(opts["density"]), float(opts["gamma_probe"]), int(opts["seeds"]),
                                 int(opts["suite_size"]), int(opts["seed"]))
    out = _out_dir(opts)
    _write_json(out / "verify.json", [{"check": n, "value": float(v), "ok": bool(ok)} for n, v, ok in checks])
    _manifest(out, "verify", opts)
    for name, value, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.6g}")
    return EXIT_OK if all(ok for _, _, ok in checks) else EXIT_VERIFY


def cmd_erm(opts) -> int:
    if opts["csv"] is not None and opts["synthetic"] is not None:
        raise UsageError("give either --csv or --synthetic, not both")
    try:
        if opts["csv"] is not None:
            inst = problems.load_erm(str(opts["csv"]), hidden_width=int(opts["hidden"]),
                                     alpha=float(opts["alpha"]), seed=int(opts["seed"]),
                                     label_column=str(opts["label"]))
        else:
            spec = parse_synthetic(opts["synthetic"] or [])
            x, y = problems.synthetic_blobs(spec["rows"], spec["features"], spec["seed"])
            inst = problems.erm_from_arrays(x, y, hidden_width=int(opts["hidden"]),
                                            alpha=float(opts["alpha"]), seed=int(opts["seed"]))
    except (OSError, problems.DataError) as exc:
        print(f"gegdyn erm: data error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = make_config(opts)
    budget = _budget(opts, stride=int(opts["stride"]), store_iterates=False)
    try:
        traces = dynamics.run_erm(inst, config, budget, folds=int(opts["folds"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(opts)
    folds = []
    for i, tr in enumerate(traces):
        dynamics.write_trace_csv(tr, out / f"fold_{i}.csv")
        g = tr.grad_norms
        tail = float(np.mean(g[-100:]))
        folds.append({"fold": i, "verdict": tr.verdict.status.value, "iterations": tr.iterations,
                      "initial_grad_norm": float(g[0]), "final_grad_norm": float(g[-1]),
                      "trailing_mean_grad_norm": tail})
        print(f"fold {i}: ||grad f|| {g[0]:.4g} -> {g[-1]:.4g} (trailing mean {tail:.4g})")
    _write_json(out / "summary.json", {"config": config.to_dict(), "parameters": inst.n_params,
                                       "folds": folds})
    _manifest(out, "erm", opts)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep-table": cmd_sweep_table, "analyze": cmd_analyze,
            "basin": cmd_basin, "verify": cmd_verify, "erm": cmd_erm}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"gegdyn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
