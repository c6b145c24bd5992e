"""Command-line entry point.

Every run writes its fully resolved configuration next to its outputs so a
run can be reproduced exactly; all randomness flows from --seed. Exit codes:
0 success, 1 data error, 2 usage error.
"""
from __future__ import annotations

import csv
import os
import sys
from pathlib import Path

import click

from . import evalkit, linktype
from .corpus import TraceLink, TraceMatrix, load_dataset
from .errors import TraceToolError
from .explain import (
    KnowledgeGraph,
    annotate_terms,
    explain_relation,
    load_frames,
    load_glossary,
    load_triplets,
    render_llm_prompt,
    render_rationale,
)
from .learn import SplitPlan, TrainingConfig
from .maintain import MaintenanceConfig, apply_maintenance, detect_changes
from .recover import RecoveryConfig, export_candidates, load_candidates, recover


def _read_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    values = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"bad config line (expected key=value): {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _resolve(ctx: click.Context, file_values: dict[str, str]) -> dict[str, object]:
    """File values unless the flag was given explicitly on the command line."""
    resolved = {}
    for name, value in ctx.params.items():
        if name == "config":
            continue
        source = ctx.get_parameter_source(name)
        if (
            name in file_values
            and source is not click.core.ParameterSource.COMMANDLINE
        ):
            declared = next(p for p in ctx.command.params if p.name == name)
            resolved[name] = declared.type.convert(file_values[name], declared, ctx)
        else:
            resolved[name] = value
    return resolved


def _write_run_config(out_dir: Path, params: dict[str, object]) -> None:
    lines = [f"{key}={params[key]}" for key in sorted(params)]
    (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_gold(path: str) -> TraceMatrix:
    gold = TraceMatrix()
    p = Path(path)
    if p.suffix.lower() == ".csv":
        with p.open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                gold.add(
                    TraceLink(
                        id=f"gold:{row['source_id']}:{row['target_id']}",
                        source_id=row["source_id"],
                        target_id=row["target_id"],
                        provenance="manual",
                    )
                )
        return gold
    for raw in p.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        src, tgt = line.split()[:2]
        gold.add(TraceLink(id=f"gold:{src}:{tgt}", source_id=src, target_id=tgt, provenance="manual"))
    return gold


MATRIX_FIELDS = ["id", "source_id", "target_id", "type_label", "score", "provenance", "protected"]


def _load_matrix(path: str) -> TraceMatrix:
    matrix = TraceMatrix()
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            matrix.add(
                TraceLink(
                    id=row["id"],
                    source_id=row["source_id"],
                    target_id=row["target_id"],
                    type_label=row.get("type_label") or None,
                    score=float(row["score"]) if row.get("score") else None,
                    provenance=row.get("provenance") or "automatic",
                    protected=(row.get("protected") or "false").lower() == "true",
                )
            )
    return matrix


def _write_matrix(matrix: TraceMatrix, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MATRIX_FIELDS)
        for link in matrix:
            writer.writerow(
                [
                    link.id,
                    link.source_id,
                    link.target_id,
                    link.type_label or "",
                    "" if link.score is None else f"{link.score:.10f}",
                    link.provenance,
                    "true" if link.protected else "false",
                ]
            )


@click.group()
def main() -> None:
    """Trace link recovery, evaluation, maintenance, and explanation."""


def _common(fn):
    fn = click.option("--config", type=click.Path(exists=True), default=None, help="key=value config file")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--jobs", type=int, default=os.cpu_count() or 1,
                      help="parallel workers [default: available cores]")(fn)
    fn = click.option("--out", type=click.Path(), required=True)(fn)
    return fn


@main.command()
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["coest_dir", "csv_pair"]), default="coest_dir")
@click.option("--engine", type=click.Choice(["vsm", "lsi", "lda", "classifier"]), default="vsm")
@click.option("--measure", type=click.Choice(["cosine", "jaccard", "hellinger", "symmetric_kl"]), default="cosine")
@click.option("--mode", type=click.Choice(["full_matrix", "per_source"]), default="full_matrix")
@click.option("--source-id", default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--top-k", type=int, default=None)
@click.option("--lsi-k", type=int, default=None)
@click.option("--lda-topics", type=int, default=10)
@click.option("--lda-iterations", type=int, default=500)
@_common
@click.pass_context
def recover_cmd(ctx, dataset, fmt, engine, measure, mode, source_id, threshold,
                top_k, lsi_k, lda_topics, lda_iterations, out, jobs, seed, config):
    """Recover candidate trace links and export them as CSV."""
    params = _resolve(ctx, _read_config_file(config))
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        data = load_dataset(params["dataset"], params["fmt"])
        cfg = RecoveryConfig(
            engine=params["engine"],
            measure=params["measure"],
            mode=params["mode"],
            source_id=params["source_id"],
            threshold=params["threshold"],
            top_k=params["top_k"],
            lsi_k=params["lsi_k"],
            lda_topics=params["lda_topics"],
            lda_iterations=params["lda_iterations"],
            seed=params["seed"],
            jobs=params["jobs"],
        )
        matrix = recover(data, cfg)
        export_candidates(matrix, cfg.engine, out_dir / "candidates.csv")
        _write_run_config(out_dir, params)
    except TraceToolError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {len(matrix)} candidates to {out_dir / 'candidates.csv'}")


main.add_command(recover_cmd, name="recover")


@main.command("eval")
@click.option("--pred", type=click.Path(exists=True), required=True)
@click.option("--gold", type=click.Path(exists=True), required=True)
@click.option("--dcg-k", type=int, default=10, show_default=True)
@_common
@click.pass_context
def eval_cmd(ctx, pred, gold, dcg_k, out, jobs, seed, config):
    """Compare a candidate CSV against a gold answer file."""
    params = _resolve(ctx, _read_config_file(config))
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        predicted, rankings = load_candidates(params["pred"])
        gold_matrix = _load_gold(params["gold"])
        results = [
            evalkit.RankedResult(source_id, ranked)
            for source_id, ranked in sorted(rankings.items())
        ]
        summary, per_source_csv = evalkit.evaluation_report(
            results, predicted, gold_matrix, k=params["dcg_k"]
        )
        evalkit.write_report(summary, out_dir / "report.txt")
        (out_dir / "per_source.csv").write_text(per_source_csv, encoding="utf-8")
        _write_run_config(out_dir, params)
    except TraceToolError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    for key in sorted(summary):
        click.echo(f"{key}={summary[key]:.10f}")


@main.command("maintain")
@click.option("--old", "old_root", type=click.Path(exists=True), required=True)
@click.option("--new", "new_root", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["coest_dir", "csv_pair"]), default="coest_dir")
@click.option("--matrix", type=click.Path(exists=True), required=True)
@click.option("--threshold", type=float, required=True)
@click.option("--now", type=float, default=0.0, show_default=True,
              help="timestamp recorded on link mutations (deterministic)")
@_common
@click.pass_context
def maintain_cmd(ctx, old_root, new_root, fmt, matrix, threshold, now, out, jobs, seed, config):
    """Detect changes between two dataset versions and update the matrix."""
    params = _resolve(ctx, _read_config_file(config))
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        old_data = load_dataset(params["old_root"], params["fmt"])
        new_data = load_dataset(params["new_root"], params["fmt"])
        trace_matrix = _load_matrix(params["matrix"])
        events = detect_changes(old_data, new_data)
        updated, justifications = apply_maintenance(
            trace_matrix,
            events,
            new_data,
            MaintenanceConfig(),
            threshold=params["threshold"],
            now=params["now"],
        )
        _write_matrix(updated, out_dir / "updated_matrix.csv")
        log_lines = [
            f"{params['now']:.3f}\t{link_id}\t{scenario}\t{text}"
            for link_id, scenario, text in justifications
        ]
        (out_dir / "justifications.log").write_text(
            "\n".join(log_lines) + ("\n" if log_lines else ""), encoding="utf-8"
        )
        _write_run_config(out_dir, params)
    except TraceToolError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"{len(events)} changes, {len(justifications)} mutations, "
               f"{len(updated)} links in updated matrix")


@main.command("classify-types")
@click.option("--issues", type=click.Path(exists=True), required=True)
@click.option("--links", type=click.Path(exists=True), required=True)
@click.option("--split", "split_kind", type=click.Choice(["kfold", "timestamp"]), default="kfold")
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--cutoff", type=float, default=None)
@click.option("--class-weights/--no-class-weights", default=False)
@click.option("--epochs", type=int, default=400, show_default=True)
@_common
@click.pass_context
def classify_types_cmd(ctx, issues, links, split_kind, k, cutoff, class_weights,
                       epochs, out, jobs, seed, config):
    """Train and evaluate a link-type classifier on an issue dump."""
    params = _resolve(ctx, _read_config_file(config))
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        issue_set = linktype.load_issues(params["issues"])
        raw_links = linktype.load_typed_links(params["links"])
        encoder = linktype.PairEncoder(issue_set)
        pairs = encoder.encode_pairs(raw_links)
        plan = SplitPlan(
            kind=params["split_kind"],
            k=params["k"],
            cutoff=params["cutoff"],
            seed=params["seed"],
        )
        reports = linktype.cross_validate_types(
            pairs,
            plan,
            TrainingConfig(epochs=params["epochs"], seed=params["seed"]),
            class_weights=params["class_weights"],
        )
        summary = {
            "macro_f1": sum(r["macro_f1"] for r in reports) / len(reports),
            "micro_f1": sum(r["micro_f1"] for r in reports) / len(reports),
            "weighted_f1": sum(r["weighted_f1"] for r in reports) / len(reports),
            "folds": float(len(reports)),
        }
        evalkit.write_report(summary, out_dir / "type_report.txt")
        with (out_dir / "per_class.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fold", "class", "precision", "recall", "f1", "support"])
            for fold, report in enumerate(reports):
                for cls in sorted(report["per_class"]):
                    row = report["per_class"][cls]
                    writer.writerow(
                        [fold, cls, f"{row['precision']:.10f}", f"{row['recall']:.10f}",
                         f"{row['f1']:.10f}", row["support"]]
                    )
        _write_run_config(out_dir, params)
    except TraceToolError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    for key in sorted(summary):
        click.echo(f"{key}={summary[key]:.10f}")


@main.command("explain")
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["coest_dir", "csv_pair"]), default="coest_dir")
@click.option("--source", "source_id", required=True)
@click.option("--target", "target_id", required=True)
@click.option("--glossary", type=click.Path(exists=True), default=None)
@click.option("--blacklist", type=click.Path(exists=True), default=None)
@click.option("--triplets", type=click.Path(exists=True), default=None)
@click.option("--frames", type=click.Path(exists=True), default=None)
@click.option("--concept-a", default=None)
@click.option("--concept-b", default=None)
@_common
@click.pass_context
def explain_cmd(ctx, dataset, fmt, source_id, target_id, glossary, blacklist,
                triplets, frames, concept_a, concept_b, out, jobs, seed, config):
    """Annotate a linked artifact pair and explain the relation."""
    params = _resolve(ctx, _read_config_file(config))
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        data = load_dataset(params["dataset"], params["fmt"])
        if params["source_id"] not in data.sources or params["target_id"] not in data.targets:
            raise TraceToolError(
                f"unknown artifact pair ({params['source_id']}, {params['target_id']})"
            )
        source = data.sources.get(params["source_id"])
        target = data.targets.get(params["target_id"])
        glossary_entries = load_glossary(params["glossary"]) if params["glossary"] else []
        blocked = set()
        if params["blacklist"]:
            blocked = {
                line.strip()
                for line in Path(params["blacklist"]).read_text(encoding="utf-8").splitlines()
                if line.strip()
            }
        annotations = {
            "source": annotate_terms(source, glossary_entries, blocked),
            "target": annotate_terms(target, glossary_entries, blocked),
        }
        with (out_dir / "annotations.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["artifact", "start", "end", "term", "explanation"])
            for side in ("source", "target"):
                for ann in annotations[side]:
                    writer.writerow([side, ann.start, ann.end, ann.term, ann.explanation])

        (out_dir / "prompt.txt").write_text(render_llm_prompt(source, target), encoding="utf-8")

        if params["triplets"]:
            graph = KnowledgeGraph(load_triplets(params["triplets"]))
            concept_pair = (params["concept_a"], params["concept_b"])
            if not all(concept_pair):
                firsts = [
                    annotations[side][0].term if annotations[side] else None
                    for side in ("source", "target")
                ]
                concept_pair = (
                    params["concept_a"] or firsts[0],
                    params["concept_b"] or firsts[1],
                )
            if all(concept_pair):
                path = explain_relation(graph, concept_pair[0], concept_pair[1])
                if path is None:
                    body = f"no path between {concept_pair[0]!r} and {concept_pair[1]!r}\n"
                else:
                    body = "".join(
                        f"({t.subject}, {t.verb}, {t.object})\n" for t in path
                    ) or f"{concept_pair[0]!r} and {concept_pair[1]!r} name the same concept\n"
                (out_dir / "path.txt").write_text(body, encoding="utf-8")
            if params["frames"]:
                frame_map = load_frames(params["frames"])
                if params["source_id"] in frame_map and params["target_id"] in frame_map:
                    rationale = render_rationale(
                        frame_map[params["source_id"]], frame_map[params["target_id"]], graph
                    )
                    (out_dir / "rationale.txt").write_text(rationale + "\n", encoding="utf-8")
        _write_run_config(out_dir, params)
    except TraceToolError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"explanation artifacts written to {out_dir}")


@main.command("serve")
@click.option("--store", type=click.Path(), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8642, show_default=True)
def serve_cmd(store, host, port):
    """Run the vetting HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(Path(store))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
