"""Command-line front door: analyze, plan, audit, and windows subcommands.

File formats (all UTF-8):

* counts CSV with header ``id,count`` or ``id,count,baseline``; the row
  order defines the cell numbering used everywhere else, and the baseline
  column defaults to 1.0;
* window families as JSON lines, one JSON array of cell ids per line;
* adjacency as a CSV edge list ``id,id`` (header optional);
* elimination-ordering override as one id per line (a permutation of all
  ids);
* group assignment as a JSON array with one 0-based group index per window.

Reports are JSON; floats are serialized with full round-trip precision and
p-values additionally carry an 8-significant-digit display string.  Exit
codes: 0 success, 2 input error, 3 feasibility refusal, 4 audit failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import engine, graph, reference, scan, windows
from .engine import CellModel
from .errors import AuditFailure, BudgetExceededError, ConsistencyError, InputError
from .graph import CliqueTree, EliminationOrdering
from .windows import Adjacency, WindowFamily

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# input loading


@dataclass
class CountsData:
    ids: list[str]
    model: CellModel

    def index_of(self, ident: str, context: str) -> int:
        try:
            return self.ids.index(ident) + 1
        except ValueError:
            raise InputError(f"{context}: unknown id {ident!r}") from None

    def id_list(self, vertices) -> list[str]:
        return [self.ids[v - 1] for v in sorted(vertices)]


def load_counts(path: str) -> CountsData:
    ids: list[str] = []
    counts: list[int] = []
    baselines: list[float] = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for lineno, row in enumerate(reader, start=1):
                if not row or not "".join(row).strip():
                    continue
                if lineno == 1 and row[0].strip().lower() == "id":
                    continue
                if len(row) not in (2, 3):
                    raise InputError(f"{path}:{lineno}: expected 2 or 3 columns, got {len(row)}")
                ident = row[0].strip()
                if ident in ids:
                    raise InputError(f"{path}:{lineno}: duplicate id {ident!r}")
                try:
                    counts.append(int(row[1]))
                    baselines.append(float(row[2]) if len(row) == 3 else 1.0)
                except ValueError as e:
                    raise InputError(f"{path}:{lineno}: {e}") from None
                ids.append(ident)
    except OSError as e:
        raise InputError(f"cannot read counts file {path}: {e}") from None
    if not ids:
        raise InputError(f"{path}: no data rows")
    return CountsData(ids, CellModel(tuple(counts), tuple(baselines)))


def load_windows_file(path: str, data: CountsData) -> WindowFamily:
    rows = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    arr = json.loads(line)
                except json.JSONDecodeError as e:
                    raise InputError(f"{path}:{lineno}: {e}") from None
                if not isinstance(arr, list) or not arr:
                    raise InputError(f"{path}:{lineno}: expected a non-empty JSON array")
                rows.append([data.index_of(str(x), f"{path}:{lineno}") for x in arr])
    except OSError as e:
        raise InputError(f"cannot read windows file {path}: {e}") from None
    if not rows:
        raise InputError(f"{path}: no windows")
    return WindowFamily.from_iterable(rows, labels={i + 1: s for i, s in enumerate(data.ids)})


def load_adjacency(path: str, data: CountsData) -> Adjacency:
    edges = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for lineno, row in enumerate(reader, start=1):
                if not row or not "".join(row).strip():
                    continue
                if lineno == 1 and row[0].strip().lower() == "id":
                    continue
                if len(row) != 2:
                    raise InputError(f"{path}:{lineno}: expected 2 columns")
                a = data.index_of(row[0].strip(), f"{path}:{lineno}")
                b = data.index_of(row[1].strip(), f"{path}:{lineno}")
                edges.append((a, b))
    except OSError as e:
        raise InputError(f"cannot read adjacency file {path}: {e}") from None
    return Adjacency.from_edges(len(data.ids), edges)


def load_ordering(path: str, data: CountsData) -> EliminationOrdering:
    try:
        lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as e:
        raise InputError(f"cannot read ordering file {path}: {e}") from None
    order = tuple(data.index_of(s, path) for s in lines)
    if len(order) != len(data.ids):
        raise InputError(
            f"{path}: ordering lists {len(order)} ids but the counts file has {len(data.ids)}"
        )
    return EliminationOrdering(order)


def load_assignment(path: str) -> list[int]:
    try:
        arr = json.loads(Path(path).read_text())
    except OSError as e:
        raise InputError(f"cannot read assignment file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: {e}") from None
    if not isinstance(arr, list) or not all(isinstance(x, int) for x in arr):
        raise InputError(f"{path}: expected a JSON array of integers")
    return arr


def build_family(args, data: CountsData) -> WindowFamily:
    labels = {i + 1: s for i, s in enumerate(data.ids)}
    if args.windows_file:
        return load_windows_file(args.windows_file, data)
    if args.temporal_max_len:
        return windows.temporal_windows(len(data.ids), args.temporal_max_len, labels)
    if args.spatial_max_size:
        if not args.adjacency:
            raise InputError("--spatial-max-size requires --adjacency")
        adj = load_adjacency(args.adjacency, data)
        return windows.spatial_windows(adj, args.spatial_max_size, labels)
    raise InputError(
        "no window source: give --windows-file, --temporal-max-len, or --spatial-max-size"
    )


# ---------------------------------------------------------------------------
# report pieces


def display(p: float) -> str:
    return format(p, ".8g")


def tree_summary(tree: CliqueTree, total: int) -> dict:
    ext = tree.extension
    return {
        "vertices": tree.vertex_count,
        "edges": ext.base.edge_count if ext else None,
        "fill_edges": len(ext.fill_edges) if ext else None,
        "cliques": tree.size,
        "clique_sizes": sorted((len(b) for b in tree.cliques), reverse=True),
        "degree": engine.summation_degree(tree),
        "predicted_summations": engine.predicted_summation_count(tree, total),
        "naive_summations": engine.naive_summation_count(tree.vertex_count, total),
    }


def ranked_rows(stats: list[scan.WindowStatistic], data: CountsData, top_k: int) -> list[dict]:
    rows = []
    for ws in stats[:top_k]:
        rows.append(
            {
                "window": data.id_list(ws.window),
                "observed_sum": ws.observed_sum,
                "expected_share": ws.expected_share,
                "statistic": ws.value,
                **({"note": ws.note} if ws.note else {}),
            }
        )
    return rows


def write_report(report: dict, output: str | None):
    text = json.dumps(report, indent=2)
    if output:
        Path(output).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands


def run_analyze(args) -> int:
    data = load_counts(args.counts)
    model = data.model
    family = build_family(args, data)
    ordering = load_ordering(args.ordering_file, data) if args.ordering_file else None
    arithmetic = "exact" if args.arithmetic == "exact-rational" else "float"

    ranked = scan.scan_all_windows(model, family)
    threshold = args.threshold if args.threshold is not None else ranked[0].value

    report = {
        "schema_version": SCHEMA_VERSION,
        "kernel_backend": args.backend or engine.kernel_backend(),
        "total_events": model.total,
        "cells": model.vertex_count,
        "window_count": len(family),
        "tie_convention": args.ties,
        "threshold": threshold,
        "max_statistic": ranked[0].value,
        "argmax_window": data.id_list(ranked[0].window),
        "ranked_statistics": ranked_rows(ranked, data, args.top_k),
    }

    t0 = time.perf_counter()
    if args.groups:
        assignment = load_assignment(args.group_assignment) if args.group_assignment else None
        groups = windows.partition_windows(family, args.groups, args.group_seed, assignment)
        thresholds = sorted({ws.value for ws in ranked[: args.top_k]}, reverse=True)
        group_trees = [graph.build_clique_tree(g, model.vertex_count) for g in groups]
        stepdown = []
        for c in thresholds:
            per_group = []
            for fam_g, tree_g in zip(groups, group_trees):
                p, _ = scan.exact_pvalue(
                    model, fam_g, tree_g, c,
                    ties=args.ties, backend=args.backend,
                    budget=args.budget, force=args.force,
                )
                per_group.append(p)
            stepdown.append((c, per_group))
        by_threshold = dict(stepdown)
        report["groups"] = [
            {"windows": len(g), "clique_tree": tree_summary(t, model.total)}
            for g, t in zip(groups, group_trees)
        ]
        report["stepdown"] = [
            {
                "statistic": ws.value,
                "window": data.id_list(ws.window),
                "group_p_values": by_threshold[ws.value],
                "p_value_bonferroni": min(1.0, sum(by_threshold[ws.value])),
                "p_value_display": display(min(1.0, sum(by_threshold[ws.value]))),
            }
            for ws in ranked[: args.top_k]
        ]
        head = by_threshold[threshold] if threshold in by_threshold else None
        if head is not None:
            report["group_p_values"] = head
            report["p_value_bonferroni"] = min(1.0, sum(head))
            report["p_value_display"] = display(report["p_value_bonferroni"])
    else:
        tree = graph.build_clique_tree(family, model.vertex_count, ordering)
        p_value, cost = scan.exact_pvalue(
            model, family, tree, threshold,
            ties=args.ties, backend=args.backend, arithmetic=arithmetic,
            budget=args.budget, force=args.force,
        )
        rows = scan.stepdown_pvalues(
            model, family, tree, args.top_k,
            ties=args.ties, backend=args.backend,
            budget=args.budget, force=args.force, threads=args.threads,
        )
        summary = tree_summary(tree, model.total)
        summary["actual_summations"] = cost.actual
        summary["peak_table_entries"] = cost.peak_table_entries
        report["p_value"] = p_value
        report["p_value_display"] = display(p_value)
        if cost.exact_value is not None:
            report["p_value_exact_rational"] = str(1 - cost.exact_value)
        report["stepdown"] = [
            {
                "statistic": stat,
                "window": data.id_list(w),
                "p_value": p,
                "p_value_display": display(p),
            }
            for stat, w, p in rows
        ]
        report["clique_tree"] = summary
    report["wall_time_s"] = time.perf_counter() - t0

    write_report(report, args.output)
    return 0


def run_plan(args) -> int:
    if args.counts:
        data = load_counts(args.counts)
        total = data.model.total
    elif args.cells:
        if args.total_events is None:
            raise InputError("without --counts, plan needs both --cells and --total-events")
        ids = [str(i) for i in range(1, args.cells + 1)]
        data = CountsData(ids, CellModel((0,) * args.cells, (1.0,) * args.cells))
        total = args.total_events
    else:
        raise InputError("plan needs --counts, or --cells with --total-events")
    if args.total_events is not None:
        total = args.total_events

    family = build_family(args, data)
    ordering = load_ordering(args.ordering_file, data) if args.ordering_file else None
    tree = graph.build_clique_tree(family, data.model.vertex_count, ordering)
    summary = tree_summary(tree, total)
    predicted = summary["predicted_summations"]
    report = {
        "schema_version": SCHEMA_VERSION,
        "total_events": total,
        "window_count": len(family),
        "clique_tree": summary,
        "budget": args.budget,
        "feasible": predicted <= args.budget,
    }
    if args.groups:
        assignment = load_assignment(args.group_assignment) if args.group_assignment else None
        groups = windows.partition_windows(family, args.groups, args.group_seed, assignment)
        report["groups"] = []
        for fam_g in groups:
            tree_g = graph.build_clique_tree(fam_g, data.model.vertex_count)
            s = tree_summary(tree_g, total)
            s["windows"] = len(fam_g)
            s["feasible"] = s["predicted_summations"] <= args.budget
            report["groups"].append(s)
    write_report(report, args.output)
    return 0


def run_audit(args) -> int:
    data = load_counts(args.counts)
    model = data.model
    family = build_family(args, data)
    ordering = load_ordering(args.ordering_file, data) if args.ordering_file else None
    tree = graph.build_clique_tree(family, model.vertex_count, ordering)

    ranked = scan.scan_all_windows(model, family)
    threshold = args.threshold if args.threshold is not None else ranked[0].value
    p_engine, _ = scan.exact_pvalue(
        model, family, tree, threshold,
        ties=args.ties, backend=args.backend, budget=args.budget, force=args.force,
    )
    report = {
        "schema_version": SCHEMA_VERSION,
        "mode": args.mode,
        "threshold": threshold,
        "engine_p_value": p_engine,
        "engine_p_value_display": display(p_engine),
    }
    if args.mode == "oracle":
        p_oracle = 1.0 - reference.brute_force_expectation(
            model, family, threshold, ties=args.ties, max_terms=args.max_terms
        )
        diff = abs(p_engine - p_oracle)
        report.update(
            oracle_p_value=p_oracle,
            absolute_difference=diff,
            tolerance=args.tolerance,
            passed=diff <= args.tolerance,
        )
    else:
        est, se = reference.monte_carlo_pvalue(
            model, family, threshold, args.replicates, args.seed, ties=args.ties
        )
        z = 0.0 if se == 0.0 else (est - p_engine) / se
        report.update(
            mc_estimate=est,
            mc_standard_error=se,
            replicates=args.replicates,
            seed=args.seed,
            sampler=reference.SAMPLER_VERSION,
            z_score=z,
            z_max=args.z_max,
            passed=abs(z) <= args.z_max,
        )
    write_report(report, args.output)
    if not report["passed"]:
        raise AuditFailure(f"{args.mode} audit failed: {report}")
    return 0


def run_windows(args) -> int:
    data = load_counts(args.counts)
    if args.action == "generate":
        family = build_family(args, data)
        lines = [json.dumps(data.id_list(w)) for w in family]
        text = "\n".join(lines) + "\n"
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    # partition
    family = build_family(args, data)
    if not args.groups:
        raise InputError("partition needs --groups")
    assignment = load_assignment(args.group_assignment) if args.group_assignment else None
    parts = windows.partition_windows(family, args.groups, args.group_seed, assignment)
    prefix = args.output or "group"
    for gi, fam_g in enumerate(parts):
        path = f"{prefix}{gi + 1}.jsonl"
        Path(path).write_text("\n".join(json.dumps(data.id_list(w)) for w in fam_g) + "\n")
        print(f"wrote {len(fam_g)} windows to {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_window_source(p: argparse.ArgumentParser):
    p.add_argument("--windows-file", help="JSON-lines window family")
    p.add_argument("--temporal-max-len", type=int, help="all intervals up to this length")
    p.add_argument(
        "--spatial-max-size", type=int, choices=(1, 2),
        help="singletons (1) or singletons plus adjacent pairs (2)",
    )
    p.add_argument("--adjacency", help="CSV edge list for --spatial-max-size")


def _add_common(p: argparse.ArgumentParser, groups=True, counts_required=True):
    p.add_argument("--counts", required=counts_required, help="CSV id,count[,baseline]")
    _add_window_source(p)
    p.add_argument("--ordering-file", help="elimination ordering override, one id per line")
    p.add_argument("--budget", type=float, default=engine.DEFAULT_BUDGET,
                   help="refuse runs above this predicted summation count")
    p.add_argument("--force", action="store_true", help="run even over budget")
    p.add_argument("--ties", choices=("extreme", "excluded"), default="extreme",
                   help="count outcomes tying the threshold as extreme (default) or not")
    p.add_argument("--backend", choices=("compiled", "python"), default=None,
                   help="kernel override (default: compiled when built)")
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    if groups:
        p.add_argument("--groups", type=int, help="split windows into this many groups")
        p.add_argument("--group-seed", type=int, default=0, help="seed for the random balanced split")
        p.add_argument("--group-assignment", help="JSON array: group index per window")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="exactscan",
        description="Exact multiplicity-adjusted p-values for scan statistics",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="rank windows and compute exact p-values")
    _add_common(p)
    p.add_argument("--top-k", type=int, default=5, help="step-down rows to report")
    p.add_argument("--threshold", type=float, default=None,
                   help="p-value threshold (default: the observed maximum)")
    p.add_argument("--arithmetic", choices=("float", "exact-rational"), default="float")
    p.add_argument("--threads", type=int, default=1,
                   help="concurrent engine runs for step-down thresholds")
    p.set_defaults(func=run_analyze)

    p = sub.add_parser("plan", help="predict cost and feasibility without evaluating")
    _add_common(p, counts_required=False)
    p.add_argument("--total-events", type=int, default=None,
                   help="plan for this total instead of the counts-file total")
    p.add_argument("--cells", type=int, default=None,
                   help="cell count when no counts file is given (ids become 1..cells)")
    p.set_defaults(func=run_plan)

    p = sub.add_parser("audit", help="cross-check the engine against an oracle")
    _add_common(p, groups=False)
    p.add_argument("--mode", choices=("oracle", "mc"), required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--max-terms", type=int, default=1_000_000,
                   help="oracle mode: enumeration budget")
    p.add_argument("--tolerance", type=float, default=1e-10,
                   help="oracle mode: max |engine - oracle|")
    p.add_argument("--replicates", type=int, default=100_000, help="mc mode")
    p.add_argument("--seed", type=int, default=0, help="mc mode")
    p.add_argument("--z-max", type=float, default=4.0, help="mc mode: max |z|")
    p.set_defaults(func=run_audit)

    p = sub.add_parser("windows", help="generate or partition window families")
    p.add_argument("action", choices=("generate", "partition"))
    p.add_argument("--counts", required=True, help="CSV defining the cell ids")
    _add_window_source(p)
    p.add_argument("--groups", type=int)
    p.add_argument("--group-seed", type=int, default=0)
    p.add_argument("--group-assignment")
    p.add_argument("--output", help="output path (generate) or prefix (partition)")
    p.set_defaults(func=run_windows)

    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BudgetExceededError as e:
        print(f"refusing to run: {e}", file=sys.stderr)
        return 3
    except AuditFailure as e:
        print(f"audit failure: {e}", file=sys.stderr)
        return 4
    except ConsistencyError as e:
        print(f"internal error: {e}", file=sys.stderr)
        raise


if __name__ == "__main__":
    sys.exit(main())
