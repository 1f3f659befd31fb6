"""Command-line entry point.

Subcommands: simulate, analyze, sweep, inequality, feasibility, bayes-demo,
compare-schedules.  Every subcommand is deterministic given its arguments
(seeds included); JSON outputs have sorted keys and CSV outputs fixed column
orders, so reruns are byte-identical.

Exit codes: 0 success, 2 usage or validation error, 3 I/O failure,
4 underpowered analysis when --strict is requested.

A JSON config file may supply any long option (key = option name with
dashes replaced by underscores); explicit flags override file values.
``BELLSIM_THREADS`` caps simulation workers unless --workers is given.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bayes, inequalities, models, protocol, serialize, stats
from .errors import BellsimError, CapabilityError, UnderpoweredError, ValidationError
from .quantum import CHSH_OPTIMAL_ANGLES, singlet_table

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_UNDERPOWERED = 4


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _parse_angles(raw: str | None) -> tuple[float, float, float, float]:
    if raw is None:
        return CHSH_OPTIMAL_ANGLES
    parts = [float(p) for p in raw.split(",")]
    if len(parts) != 4:
        raise ValidationError("--angles expects four comma-separated values: x,x',y,y'")
    return tuple(parts)


def _builtin_model(name: str, args) -> object:
    if name == "coincidence":
        return models.coincidence_instance(
            delay_exponent=args.d, max_delay=args.t0
        )
    if name == "singlet":
        pairs = models.chsh_pairs(_parse_angles(args.angles))
        targets = {p: singlet_table(p.x.angle, p.y.angle) for p in pairs}
        return models.fit_contextual(targets)
    raise ValidationError(f"unknown built-in model {name!r} (expected 'coincidence' or 'singlet')")


def _load_model_arg(args) -> object:
    name = args.model
    if name.endswith(".json"):
        path = Path(name)
        if not path.exists():
            raise ValidationError(f"model file not found: {path}")
        return serialize.load_model(path)
    return _builtin_model(name, args)


def _schedule(args, pairs) -> protocol.SettingSchedule:
    return protocol.SettingSchedule(
        pairs, mode=args.schedule, block_length=args.block_length
    )


def _pairs_for(model, args) -> tuple[models.SettingPair, ...]:
    if isinstance(model, models.ContextualFittedModel):
        by_a = {s.label: s for s in model.settings_a}
        by_b = {s.label: s for s in model.settings_b}
        keys = sorted(model.tables.keys())
        w = 1.0 / len(keys)
        return tuple(
            models.SettingPair(by_a[x], by_b[y], weight=w) for x, y in keys
        )
    if getattr(model, "continuous", False):
        return models.chsh_pairs(_parse_angles(args.angles))
    pairs = [
        models.SettingPair(a, b, weight=1.0 / (len(model.settings_a) * len(model.settings_b)))
        for a in model.settings_a for b in model.settings_b
    ]
    return tuple(pairs)


def _jsonable(value):
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"not JSON-serializable: {type(value).__name__}")


def _write_json(path: str | Path, doc) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _require_options(args, names: tuple[str, ...]) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ValidationError(f"missing required option(s): {flags} (flag or config file)")


def cmd_simulate(args) -> int:
    _require_options(args, ("n", "seed", "w"))
    model = _load_model_arg(args)
    pairs = _pairs_for(model, args)
    schedule = _schedule(args, pairs)
    log = protocol.run_experiment(
        model, schedule, args.n, args.w, args.seed, workers=args.workers
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    serialize.write_log_csv(log, out)
    counts = protocol.tabulate(log)
    if args.counts:
        serialize.write_counts_csv(counts, args.counts)
    total = sum(counts.n_coincidences(p) for p in pairs)
    print(f"wrote {len(log)} windows to {out} ({total} coincidences)")
    return EXIT_OK


def _pair_report(counts, pair, log, blocks):
    table = counts.table(pair)
    n_total = int(table.sum())
    entry = {
        "setting_a": pair.x.label,
        "angle_a": pair.x.angle,
        "setting_b": pair.y.label,
        "angle_b": pair.y.angle,
        "n_windows": n_total,
        "n_coincidences": counts.n_coincidences(pair),
        "correlation": None,
        "homogeneity": None,
    }
    if entry["n_coincidences"] >= 1:
        est = stats.estimate_correlation(counts.selected(pair))
        entry["correlation"] = {"e": est.e, "se": est.se, "n": est.n}
    for side in ("A", "B"):
        label = pair.x.label if side == "A" else pair.y.label
        dist = stats.singles_distribution(log, side, label)
        entry[f"singles_{side.lower()}"] = {
            str(v): {"freq": dist.freqs[v + 1], "se": dist.ses[v + 1]}
            for v in (-1, 0, 1)
        }
    if n_total >= 2 * blocks:
        rep = stats.homogeneity_test(log, pair, blocks)
        entry["homogeneity"] = {
            "blocks": rep.blocks,
            "categories": rep.categories,
            "chi_square": rep.chi_square,
            "dof": rep.dof,
            "p_value": rep.p_value,
            "merged_categories": [list(g) for g in rep.merged_categories],
            "underpowered": rep.underpowered,
        }
    return entry


def _grid_pairs(pairs):
    """If the pairs form a full 2x2 settings grid, return them in canonical
    (x,y), (x,y'), (x',y), (x',y') order, else None."""
    labels_a = sorted({p.x.label for p in pairs})
    labels_b = sorted({p.y.label for p in pairs})
    if len(labels_a) != 2 or len(labels_b) != 2 or len(pairs) != 4:
        return None
    lookup = {p.labels: p for p in pairs}
    try:
        return tuple(
            lookup[(a, b)] for a in labels_a for b in labels_b
        )
    except KeyError:
        return None


def cmd_analyze(args) -> int:
    log = serialize.read_log_csv(args.log)
    if len(log) == 0:
        raise ValidationError("log is empty")
    counts = protocol.tabulate(log)
    warnings = []
    report = {
        "n_windows": len(log),
        "window": log.meta.window,
        "seed": log.meta.seed,
        "pairs": [
            _pair_report(counts, p, log, args.blocks) for p in log.pairs
        ],
        "chsh": None,
        "ch_eberhard": None,
        "no_signaling": None,
        "warnings": warnings,
    }
    grid = _grid_pairs(log.pairs)
    if grid is None:
        warnings.append("settings do not form a 2x2 grid; inequality section omitted")
    elif any(counts.n_coincidences(p) == 0 for p in grid):
        warnings.append("zero coincidences at some pair; inequality section omitted")
    else:
        report["chsh"] = inequalities.chsh_from_counts(counts, grid, args.sigma).to_dict()
        report["ch_eberhard"] = inequalities.ch_eberhard(counts, grid, args.sigma).to_dict()
    try:
        ns = inequalities.no_signaling_check(counts)
        report["no_signaling"] = {
            "passed": ns.passed,
            "max_discrepancy": ns.max_discrepancy,
            "checks": [
                {
                    "side": c.side,
                    "setting": c.setting_label,
                    "remote_settings": list(c.remote_labels),
                    "chi_square": c.chi_square,
                    "dof": c.dof,
                    "p_value": c.p_value,
                    "passed": c.passed,
                }
                for c in ns.checks
            ],
        }
    except ValidationError:
        warnings.append("no shared settings; no-signaling section omitted")
    underpowered = any(
        e["homogeneity"] is not None and e["homogeneity"]["underpowered"]
        for e in report["pairs"]
    ) or any(e["correlation"] is None for e in report["pairs"])
    _write_json(args.out, report)
    print(f"wrote report to {args.out}")
    if args.strict and underpowered:
        raise UnderpoweredError("analysis underpowered at current sample size")
    return EXIT_OK


def cmd_sweep(args) -> int:
    _require_options(args, ("n", "seed", "windows"))
    model = _load_model_arg(args)
    pairs = _pairs_for(model, args)
    windows = [float(w) for w in args.windows.split(",")]
    if len(windows) < 2:
        raise ValidationError("sweep needs at least two window widths")
    counts_list = protocol.window_sweep_counts(
        model, pairs, args.n, windows, args.seed, workers=args.workers
    )
    import csv as _csv

    with Path(args.out).open("w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["window", "s", "se_s", "coincidence_fraction"])
        for w, counts in zip(windows, counts_list):
            res = inequalities.chsh_from_counts(counts, pairs, args.sigma)
            frac = sum(counts.n_coincidences(p) for p in pairs) / (args.n * len(pairs))
            writer.writerow([repr(w), repr(res.value), repr(res.se), repr(frac)])
    print(f"wrote sweep to {args.out}")
    return EXIT_OK


def cmd_inequality(args) -> int:
    src = Path(args.input)
    if not src.exists():
        raise ValidationError(f"input not found: {src}")
    if src.suffix == ".json":
        doc = json.loads(src.read_text())
        inp = inequalities.ChshInput(
            tuple(doc["es"]), tuple(doc.get("ses", (0.0,) * 4))
        )
        result = inequalities.chsh(inp, args.sigma)
    else:
        counts = serialize.read_counts_csv(src)
        grid = _grid_pairs(counts.pairs)
        if grid is None:
            raise ValidationError("counts do not form a 2x2 settings grid")
        if args.form == "chsh":
            result = inequalities.chsh_from_counts(counts, grid, args.sigma)
        else:
            result = inequalities.ch_eberhard(counts, grid, args.sigma)
    _write_json(args.out, result.to_dict())
    print(f"{result.name}: {_fmt(result.value)} +- {_fmt(result.se)} (bound {result.bound})")
    return EXIT_OK


def cmd_feasibility(args) -> int:
    doc = json.loads(Path(args.moments).read_text())
    if "triple" in doc:
        t = inequalities.TripleCorrelations(*doc["triple"])
        problem = inequalities.FeasibilityProblem(
            ("S1", "S2", "S3"),
            (((0, 1), t.e12), ((0, 2), t.e13), ((1, 2), t.e23)),
        )
        boole = inequalities.boole_check(t)
    else:
        problem = inequalities.FeasibilityProblem(
            tuple(doc["variables"]),
            tuple((tuple(m["subset"]), float(m["value"])) for m in doc["moments"]),
        )
        boole = None
    result = inequalities.joint_feasibility(problem)
    out = {
        "feasible": result.feasible,
        "verdict": "feasible" if result.feasible else "infeasible",
        "max_moment_error": result.max_moment_error,
    }
    if boole is not None:
        out["conditions_satisfiable"] = boole.satisfiable
        out["violated_conditions"] = list(boole.violated_conditions)
    if result.witness is not None and args.witness:
        out["witness"] = [float(v) for v in result.witness]
    _write_json(args.out, out)
    print(out["verdict"])
    return EXIT_OK


def cmd_bayes_demo(args) -> int:
    space = bayes.balls_space()
    ev = bayes.balls_events(space)
    p_big_given_red = bayes.cond_prob(space, ev["big"], ev["red"])
    p_red_given_big = bayes.cond_prob(space, ev["red"], ev["big"])
    p_big = bayes.total_prob(space, ev["big"], [ev["red"], ev["white"]])

    product = _exact_demo_model()
    weights = {p: Fraction(1, 4) for p in models.chsh_pairs()}
    independence = bayes.measurement_independence_check(product, weights)
    freedom = bayes.freedom_check(product, weights)

    doc = {
        "balls": {
            "atoms": [
                {"color": a[0], "size": a[1], "weight": str(w)}
                for a, w in zip(space.atoms, space.weights)
            ],
            "p_big_given_red": str(p_big_given_red),
            "p_red_given_big": str(p_red_given_big),
            "p_big_total": str(p_big),
        },
        "measurement_independence": {
            "independent": independence.independent,
            "max_deviation": str(independence.max_deviation),
        },
        "freedom": {
            "factorization_holds": freedom.factorization_holds,
            "all_posteriors_one": freedom.all_posteriors_one,
            "setting_posteriors": {
                "|".join(k): str(v) for k, v in freedom.setting_posteriors.items()
            },
            "conclusion": freedom.conclusion,
        },
    }
    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print("balls-in-a-box demo (exact rational arithmetic)")
        for a, w in zip(space.atoms, space.weights):
            print(f"  P({a[0]:>5}, {a[1]:>5}) = {w}")
        print(f"  P(big | red)  = {p_big_given_red}")
        print(f"  P(red | big)  = {p_red_given_big}")
        print(f"  P(big) by total probability = {p_big}")
        print()
        print("setting-dependent parameters vs freedom of choice")
        print(f"  parameter distributions identical across pairs: {independence.independent}")
        print(f"  factorization holds exactly: {freedom.factorization_holds}")
        print(f"  P(pair | parameters) = 1 for all occurring parameters: {freedom.all_posteriors_one}")
        print(f"  {freedom.conclusion}")
    if args.out:
        _write_json(args.out, doc)
    return EXIT_OK


def _exact_demo_model() -> models.ContextualProductModel:
    """Small product model with exact rational weights for the demo."""
    (sx, sxp), (sy, syp) = models.chsh_settings()
    half = (Fraction(1, 2), Fraction(1, 2))
    source = models.FiniteJointSource(
        np.full((2, 2), 0.25), ((Fraction(1, 4),) * 2, (Fraction(1, 4),) * 2)
    )
    instruments = {}
    responses = {}
    for s in (sx, sxp, sy, syp):
        instruments[s] = models.FiniteInstrument(np.array([0.5, 0.5]), half)
        responses[s] = np.array([[1, -1], [-1, 1]])
    return models.ContextualProductModel(
        source, (sx, sxp), (sy, syp), instruments, responses
    )


def cmd_compare_schedules(args) -> int:
    _require_options(args, ("n", "seed", "w"))
    model = _load_model_arg(args)
    pairs = _pairs_for(model, args)
    cmp = protocol.compare_schedules(
        model, pairs, args.n, args.w, args.seed,
        block_length=args.block_length, workers=args.workers,
    )
    doc = {
        "pairs": [
            {
                "setting_a": r.pair.x.label,
                "setting_b": r.pair.y.label,
                "e_fast": None if np.isnan(r.e_fast) else r.e_fast,
                "se_fast": None if np.isnan(r.se_fast) else r.se_fast,
                "n_fast": r.n_fast,
                "e_blocks": None if np.isnan(r.e_blocks) else r.e_blocks,
                "se_blocks": None if np.isnan(r.se_blocks) else r.se_blocks,
                "n_blocks": r.n_blocks,
                "z": None if np.isnan(r.z) else r.z,
                "underpowered": r.underpowered,
            }
            for r in cmp.per_pair
        ],
        "chi_square": cmp.chi_square,
        "dof": cmp.dof,
        "p_value": cmp.p_value,
        "underpowered": cmp.underpowered,
    }
    _write_json(args.out, doc)
    if cmp.p_value is not None:
        print(f"pooled chi-square p = {_fmt(cmp.p_value)} over {cmp.dof} pairs")
    else:
        print("comparison underpowered: no pair reached the coincidence minimum")
    if args.strict and cmp.underpowered:
        raise UnderpoweredError("schedule comparison underpowered")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_model_args(p, with_windows=False):
    p.add_argument("model", help="built-in name ('coincidence', 'singlet') or a model JSON path")
    p.add_argument("--d", type=float, default=4.0, help="delay exponent of the coincidence model")
    p.add_argument("--t0", type=float, default=1.0, help="maximum delay of the coincidence model")
    p.add_argument("--angles", default=None, help="four analyzer angles x,x',y,y' in radians")
    p.add_argument("--n", type=int, default=None, help="number of windows")
    p.add_argument("--seed", type=lambda v: int(v, 0), default=None, help="64-bit master seed")
    p.add_argument("--schedule", choices=("fast", "blocks"), default="fast")
    p.add_argument("--block-length", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: BELLSIM_THREADS or 1)")
    if with_windows:
        p.add_argument("--windows", default=None, help="comma-separated window widths")
    else:
        p.add_argument("--w", type=float, default=None, help="coincidence window width")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="bellsim",
        description="simulate, analyze and test hidden-variable models of paired-detector experiments",
    )
    top.add_argument("--config", default=None, help="JSON file of default option values")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the protocol and write a trial-log CSV")
    _add_model_args(p)
    p.add_argument("--out", required=True, help="trial-log CSV path")
    p.add_argument("--counts", default=None, help="also write a counts CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="statistics and inequalities from a trial log")
    p.add_argument("log", help="trial-log CSV (with .meta.json sidecar)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--blocks", type=int, default=10, help="homogeneity blocks")
    p.add_argument("--sigma", type=float, default=5.0, help="violation flag level")
    p.add_argument("--strict", action="store_true", help="exit 4 when underpowered")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="post-selected CHSH versus window width")
    _add_model_args(p, with_windows=True)
    p.add_argument("--out", required=True, help="sweep CSV path")
    p.add_argument("--sigma", type=float, default=5.0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inequality", help="evaluate CHSH or CH/Eberhard from counts or moments")
    p.add_argument("input", help="counts CSV or moments JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--form", choices=("chsh", "eberhard"), default="chsh")
    p.add_argument("--sigma", type=float, default=5.0)
    p.set_defaults(func=cmd_inequality)

    p = sub.add_parser("feasibility", help="joint-distribution feasibility of stated moments")
    p.add_argument("moments", help="moments JSON ({'triple': [...]} or variables+moments)")
    p.add_argument("--out", required=True)
    p.add_argument("--witness", action="store_true", help="include the witness distribution")
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("bayes-demo", help="exact conditional-probability demonstrations")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", default=None, help="also write the JSON document here")
    p.set_defaults(func=cmd_bayes_demo)

    p = sub.add_parser("compare-schedules", help="fast switching vs fixed blocks")
    _add_model_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_compare_schedules)
    return top


def _apply_config(parser, args, argv) -> argparse.Namespace:
    if not args.config:
        return args
    path = Path(args.config)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    doc = json.loads(path.read_text())
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object of option values")
    merged = vars(args).copy()
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in doc.items():
        key = key.replace("-", "_")
        if key in merged and key not in explicit:
            merged[key] = value
    return argparse.Namespace(**merged)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, args, argv)
        return args.func(args)
    except UnderpoweredError as exc:
        print(f"underpowered: {exc}", file=sys.stderr)
        return EXIT_UNDERPOWERED
    except (ValidationError, CapabilityError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
