"""Command-line interface: ``bellcf simulate|tables|analyze|verify|report``.

Exit codes: 0 success (including diagnosed obstructions and Inapplicable
verdicts), 1 verification failure, 2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, stats, tables
from .core import PAIR_CODES, SettingSet, TrialBatch
from .harness import ConfigError, RunConfig, SchemaError
from .jsonio import dumps
from .models import MODELS

OUTPUT_SCHEMA = 1
MAX_WINDOW_REPORTS = 1000


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"bellcf: {msg}", file=sys.stderr)


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_artifact(path: str) -> harness.RunArtifact:
    try:
        return harness.load(path)
    except SchemaError as exc:
        raise UsageError(str(exc)) from None


# simulate

def cmd_simulate(args) -> int:
    params = {}
    if args.alphabet is not None:
        params["lambda_alphabet_size"] = args.alphabet
    if args.period is not None:
        if args.model != "time-dependent-local":
            raise UsageError("--period only applies to time-dependent-local")
        params["period"] = args.period
    config = RunConfig(
        model=args.model, n_trials=args.trials, mode=args.mode, master_seed=args.seed,
        settings=harness.degrees_to_settings(args.angles) if args.angles else SettingSet(),
        model_params=params, schedule=args.schedule,
        fixed_sequence=tuple(args.sequence.split(",")) if args.sequence else PAIR_CODES,
        window_size=args.window,
    )
    artifact = harness.run(config, workers=args.workers, timestamp=args.timestamp)
    if config.mode == harness.COUNTERFACTUAL and not artifact.records.all_supported:
        _err(f"warning: {config.model} is not counterfactually definite; records are marked unsupported")
    harness.persist(artifact, args.out)
    print(f"model={config.model} n={config.n_trials} seed={config.master_seed} "
          f"mode={config.mode} out={args.out}")
    return 0


# tables

def tables_output(artifact: harness.RunArtifact, time_sensitive: bool,
                  witness_cap: int = tables.DEFAULT_WITNESS_CAP, token: int | None = None) -> dict:
    if artifact.config.mode != harness.COUNTERFACTUAL:
        raise UsageError("tables require counterfactual mode")
    records = artifact.records
    out = {"kind": "tables", "schema": OUTPUT_SCHEMA, "source": artifact.config.to_json(),
           "time_sensitive": time_sensitive,
           "potential_values": tables.potential_value_count(records)}
    try:
        if token is not None:
            result = tables.build_time_indexed_table(records, token).to_json()
        else:
            result = tables.reorder_by_lambda(tables.build_potential_table(records),
                                              time_sensitive, witness_cap).to_json()
    except tables.ObstructionError as exc:
        result = exc.obstruction.to_json()
    out["result"] = result
    return out


def _tables_summary(out: dict) -> str:
    r = out["result"]
    if r["kind"] == "grouped_table":
        h = r["row_sum_histogram"]
        return (f"grouped: {r['group_count']} groups, {r['n_rows']} rows, "
                f"row sums {{+2: {h['+2']}, -2: {h['-2']}}}, value conflicts {r['value_conflicts']}")
    if r["kind"] == "time_indexed_table":
        sums = r["row_sums"]
        return (f"time-indexed table for lambda={r['lambda']}: {len(sums)} rows, "
                f"row sums {{+2: {sums.count(2)}, -2: {sums.count(-2)}}}")
    extra = f", {len(r['unsupported_trials'])} unsupported trials" if r["unsupported_trials"] else ""
    return (f"obstruction {r['kind']}: {r['witness_count']} witnesses, "
            f"{r['total_conflicts']} conflicting cells{extra}")


def cmd_tables(args) -> int:
    out = tables_output(_load_artifact(args.input), args.time_sensitive, args.witness_cap, args.token)
    _write(dumps(out, indent=2) + "\n", args.out)
    print(_tables_summary(out), file=sys.stdout if args.out else sys.stderr)
    return 0


# analyze

def analysis_output(artifact: harness.RunArtifact, window: int | None = None, k: float = stats.DEFAULT_K,
                    workers: int = 1, max_window_reports: int = MAX_WINDOW_REPORTS) -> dict:
    if artifact.config.mode != harness.ACTUAL:
        raise UsageError("analyze requires actual mode")
    records: TrialBatch = artifact.records
    window = artifact.config.window_size if window is None else window
    counters = stats.accumulate(records, workers)

    correlations, probabilities = {}, {}
    for i, code in enumerate(PAIR_CODES):
        if counters.n[i]:
            est = stats.CorrelationEstimate(code, counters.n[i], counters.sum_xy[i])
            correlations[code] = est.to_json()
            probabilities[code] = {"p_equal": est.p_equal, "n_equal": est.n_equal, "n": est.n}
        else:
            correlations[code] = probabilities[code] = {"n": 0, "note": "unavailable"}

    chsh, delta = stats.chsh_report(counters, k)
    gwzz = stats.gwzz_report(counters, k)
    reports = stats.windowed_gwzz(records[: _window_prefix(records, window, max_window_reports)], window, k)
    summary = stats.windowed_summary(records, window, k)
    return {
        "kind": "analysis",
        "schema": OUTPUT_SCHEMA,
        "source": artifact.config.to_json(),
        "n_trials": len(records),
        "k": k,
        "correlations": correlations,
        "chsh": {**chsh.to_json(), "delta": delta},
        "equality_probabilities": probabilities,
        "gwzz": gwzz.to_json(),
        "windows": {
            "summary": summary,
            "reports": [r.to_json() for r in reports],
            "truncated": summary["n_windows"] > len(reports),
        },
        "indicator_accounting": stats.indicator_accounting(records).to_json(),
    }


def _window_prefix(records: TrialBatch, window: int, max_reports: int) -> int:
    """Number of leading records covering the first ``max_reports`` windows."""
    if len(records) == 0:
        return 0
    wid = records.tick // window
    return int((wid < wid[0] + max_reports).sum())


def _analysis_summary(out: dict) -> str:
    c, g, w = out["chsh"], out["gwzz"], out["windows"]["summary"]
    delta = "n/a" if c["delta"] is None else f"{c['delta']:.4f} +/- {c['stderr']:.4f}"
    lhs = "n/a" if g["lhs"] is None else f"{g['lhs']:.4f} +/- {g['stderr']:.4f}"
    return (f"{out['source']['model']}: Delta={delta} [{c['verdict']}]  gwzz={lhs} [{g['verdict']}]  "
            f"windows({w['window_size']}): {w['inapplicable']}/{w['n_windows']} inapplicable")


def cmd_analyze(args) -> int:
    out = analysis_output(_load_artifact(args.input), args.window, args.k, args.workers,
                          args.max_window_reports)
    _write(dumps(out, indent=2) + "\n", args.out)
    print(_analysis_summary(out), file=sys.stdout if args.out else sys.stderr)
    return 0


# verify

def run_verification(trials: int = 100_000, seed: int = 0) -> tuple[bool, list[str]]:
    lines = []
    ident = stats.verify_four_number_identity()
    for q in ident.failures:
        lines.append(f"FAIL quadruple {q}: row value {ident.values[q]} not in {{+2, -2}}")
    gpw = stats.verify_gpw_inequality(trials, seed)
    for q in gpw.atom_failures:
        lines.append(f"FAIL atom {q}: indicator combination {gpw.atom_values[q]} > 0")
    lines.append(f"{ident.passed}/{len(ident.values)} quadruples ±2; "
                 f"{trials - gpw.mixture_failures}/{trials} mixtures ≤ 0")
    lines.append(f"atoms: {len(gpw.atom_values) - len(gpw.atom_failures)}/{len(gpw.atom_values)} ≤ 0 "
                 f"(max {gpw.atom_max}, min {gpw.atom_min}); largest mixture value {gpw.max_mixture_lhs:.3e}")
    return ident.ok and gpw.ok, lines


def cmd_verify(args) -> int:
    ok, lines = run_verification(args.trials, args.seed)
    for line in lines:
        print(line)
    return 0 if ok else 1


# report

def _classify(path: str) -> dict:
    """Analysis or tables output for any supported input file."""
    text = Path(path).read_text(encoding="utf-8")
    first = text.split("\n", 1)[0]
    try:
        head = json.loads(first)
    except json.JSONDecodeError:
        head = None
    if isinstance(head, dict) and "config" in head:
        artifact = _load_artifact(path)
        if artifact.config.mode == harness.ACTUAL:
            return analysis_output(artifact)
        return tables_output(artifact, time_sensitive=True)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        raise UsageError(f"{path}: not an artifact, analysis or tables file") from None
    if not isinstance(obj, dict) or obj.get("schema") != OUTPUT_SCHEMA or obj.get("kind") not in ("analysis", "tables"):
        raise UsageError(f"{path}: schema mismatch (expected analysis or tables output, schema {OUTPUT_SCHEMA})")
    return obj


def _run_key(source: dict) -> tuple:
    return (source["model"], source["master_seed"], source["n_trials"],
            json.dumps(source.get("model_params", {}), sort_keys=True),
            json.dumps(source["angles"], sort_keys=True))


def build_report(outputs: list[dict]) -> dict:
    rows: dict[tuple, dict] = {}
    for out in outputs:
        src = out["source"]
        row = rows.setdefault(_run_key(src), {
            "model": src["model"], "seed": src["master_seed"], "n_trials": src["n_trials"],
            "delta": None, "delta_stderr": None, "chsh_verdict": None,
            "gwzz_lhs": None, "gwzz_verdict": None, "obstruction": None,
            "potential_values": None, "actual_pairs": None, "element_count_ratio": None,
        })
        if out["kind"] == "analysis":
            row.update(delta=out["chsh"]["delta"], delta_stderr=out["chsh"]["stderr"],
                       chsh_verdict=out["chsh"]["verdict"], gwzz_lhs=out["gwzz"]["lhs"],
                       gwzz_verdict=out["gwzz"]["verdict"], actual_pairs=out["n_trials"])
        else:
            r = out["result"]
            row["obstruction"] = r["kind"] if r["kind"] in (
                tables.TIME_CONFLICT, tables.NOT_COUNTERFACTUALLY_DEFINITE) else "none"
            row["potential_values"] = out["potential_values"]
        if row["potential_values"] is not None and row["actual_pairs"]:
            row["element_count_ratio"] = tables.count_ratio(row["potential_values"], row["actual_pairs"])
    return {"kind": "report", "schema": OUTPUT_SCHEMA, "rows": list(rows.values())}


def render_text(report: dict) -> str:
    cols = ["model", "seed", "n_trials", "delta", "chsh_verdict", "gwzz_lhs", "gwzz_verdict",
            "obstruction", "element_count_ratio"]

    def fmt(v):
        if v is None:
            return "-"
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    table = [cols] + [[fmt(row[c]) for c in cols] for row in report["rows"]]
    widths = [max(len(r[i]) for r in table) for i in range(len(cols))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table) + "\n"


def cmd_report(args) -> int:
    report = build_report([_classify(p) for p in args.input])
    text = dumps(report, indent=2) + "\n" if args.format == "json" else render_text(report)
    _write(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bellcf", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a simulation and write a record file")
    s.add_argument("--model", required=True, choices=sorted(MODELS))
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=(harness.ACTUAL, harness.COUNTERFACTUAL), default=harness.ACTUAL)
    s.add_argument("--angles", help="degrees, e.g. a=0,d=90,b=45,c=135")
    s.add_argument("--schedule", choices=(harness.UNIFORM, harness.FIXED), default=harness.UNIFORM)
    s.add_argument("--sequence", help="pair codes for the fixed schedule, e.g. ac,ab,db,dc")
    s.add_argument("--alphabet", type=int, help="source token alphabet size M")
    s.add_argument("--period", type=int, help="instrument period T (time-dependent-local)")
    s.add_argument("--window", type=int, default=1000, help="default analysis window, in ticks")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--timestamp", action="store_true", help="record wall-clock time in provenance")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tables", help="build counterfactual tables from a counterfactual run")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--time-sensitive", action="store_true")
    t.add_argument("--token", type=int, help="emit the time-indexed table for this token instead")
    t.add_argument("--witness-cap", type=int, default=tables.DEFAULT_WITNESS_CAP)
    t.add_argument("--out")
    t.set_defaults(func=cmd_tables)

    a = sub.add_parser("analyze", help="evaluate inequalities on an actual-mode run")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--window", type=int)
    a.add_argument("--k", type=float, default=stats.DEFAULT_K, help="violation threshold in standard errors")
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--max-window-reports", type=int, default=MAX_WINDOW_REPORTS)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="exhaustive and random-mixture self checks")
    v.add_argument("--trials", type=int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="compare analyses across runs")
    r.add_argument("--in", dest="input", nargs="+", required=True)
    r.add_argument("--format", choices=("json", "text"), default="text")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        _err(str(exc))
        return 2
    except OSError as exc:
        _err(str(exc))
        return 3
