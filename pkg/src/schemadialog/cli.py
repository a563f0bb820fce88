"""Command-line surface.

Exit codes: 0 success, 1 runtime failure, 2 usage error (click's default).
"""

from __future__ import annotations

import json
import os
import sys

import click

from .corpus import Speaker, Turn, dump_corpus, load_corpus
from .experiments import DEFAULT_SEEDS, ExperimentSpec, format_table, run_experiment
from .model import load_model, parse_flags, predict, save_model, schema_fingerprint
from .schema import dump_schema, load_schema, validate
from .synthetic import SyntheticConfig, generate_synthetic
from .training import TrainConfig, train
from .util import canonical_json


def _load_train_config(config_path: str | None, **overrides) -> TrainConfig:
    base: dict = {}
    if config_path:
        with open(config_path) as f:
            base = json.load(f)
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    if "flags" in base and isinstance(base["flags"], str):
        base["flags"] = list(parse_flags(base["flags"]).astuple())
    return TrainConfig.from_dict(base)


def _load_schemas(schema_dir: str) -> dict:
    schemas = {}
    for name in sorted(os.listdir(schema_dir)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(schema_dir, name), "rb") as f:
            graph = load_schema(f.read())
        report = validate(graph)
        if not report.ok:
            first = report.errors()[0]
            raise click.ClickException(
                f"schema {name} invalid: [{first.rule}] {first.message}"
            )
        schemas[graph.task_id] = graph
    if not schemas:
        raise click.ClickException(f"no schema files found in {schema_dir}")
    return schemas


@click.group()
def main():
    """Schema-guided dialog engine."""


@main.command("validate-schema")
@click.argument("path", type=click.Path(exists=True))
def validate_schema_cmd(path: str):
    """Validate a schema file; exit 0 and print ok, or exit 1 with rule ids."""
    with open(path, "rb") as f:
        try:
            graph = load_schema(f.read())
        except Exception as e:
            click.echo(f"parse error: {e}")
            sys.exit(1)
    report = validate(graph)
    if report.ok:
        click.echo("ok")
        return
    for d in report.diagnostics:
        click.echo(f"{d.severity}: [{d.rule}] {d.locus}: {d.message}")
    sys.exit(1)


@main.command("generate-synthetic")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=13, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default="synthetic", show_default=True)
def generate_synthetic_cmd(config_path: str | None, seed: int, out_dir: str):
    """Write a synthetic corpus plus one schema file per task."""
    cfg_dict = {}
    if config_path:
        with open(config_path) as f:
            cfg_dict = json.load(f)
    config = SyntheticConfig(**cfg_dict)
    corpus, graphs = generate_synthetic(config, seed)
    os.makedirs(os.path.join(out_dir, "schemas"), exist_ok=True)
    with open(os.path.join(out_dir, "corpus.json"), "w") as f:
        f.write(dump_corpus(corpus))
    for graph in graphs:
        with open(os.path.join(out_dir, "schemas", f"{graph.task_id}.json"), "w") as f:
            f.write(dump_schema(graph))
    click.echo(
        f"wrote {len(corpus)} dialogs across {len(graphs)} tasks to {out_dir}/"
    )


@main.command("train")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--schemas", "schema_dir", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--flags", default=None, help="sam, sam-13, berts, or baseline")
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default="runs/latest", show_default=True)
def train_cmd(corpus_path, schema_dir, config_path, flags, seed, epochs, out_dir):
    """Train on a standard 80/20 split and save the model bundle."""
    from .corpus import split_standard

    overrides: dict = {"seed": seed, "epochs": epochs}
    if flags == "baseline":
        overrides["model_kind"] = "baseline"
    elif flags is not None:
        overrides["flags"] = flags
    config = _load_train_config(config_path, **overrides)
    with open(corpus_path, "rb") as f:
        corpus = load_corpus(f.read())
    schemas = _load_schemas(schema_dir)
    split = split_standard(corpus, 0.8, config.seed)
    result = train(config, split, schemas, run_dir=out_dir, dev=split.test)
    save_model(
        os.path.join(out_dir, "model.ckpt"),
        result.model,
        schema_fp=schema_fingerprint(schemas.values()),
    )
    final = result.metrics_log[-1] if result.metrics_log else {}
    click.echo(f"trained {config.model_kind}: {json.dumps(final, sort_keys=True)}")
    click.echo(f"model bundle: {os.path.join(out_dir, 'model.ckpt')}")


@main.command("eval")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--schemas", "schema_dir", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=13, show_default=True, help="split seed")
def eval_cmd(corpus_path, schema_dir, model_path, seed):
    """Evaluate a saved model on the standard-split test side."""
    from .corpus import split_standard
    from .experiments import evaluate_model
    from .metrics import weighted_f1

    with open(corpus_path, "rb") as f:
        corpus = load_corpus(f.read())
    schemas = _load_schemas(schema_dir)
    model = load_model(model_path)
    split = split_standard(corpus, 0.8, seed)
    preds, golds, _ = evaluate_model(model, list(split.test), schemas)
    report = weighted_f1(preds, golds)
    click.echo(canonical_json({"accuracy": report.accuracy, "weighted_f1": report.weighted_f1, "n": report.n}))


@main.command("transfer")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--schemas", "schema_dir", type=click.Path(exists=True), required=True)
@click.option("--holdout-kind", type=click.Choice(["task", "domain"]), default="task", show_default=True)
@click.option("--rows", default="sam,baseline", show_default=True)
@click.option("--seeds", default=",".join(str(s) for s in DEFAULT_SEEDS), show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default="reports/transfer", show_default=True)
def transfer_cmd(corpus_path, schema_dir, holdout_kind, rows, seeds, config_path, out_dir):
    """Zero-shot transfer suite; writes report JSON + text table."""
    with open(corpus_path, "rb") as f:
        corpus = load_corpus(f.read())
    schemas = _load_schemas(schema_dir)
    spec = ExperimentSpec(
        kind="task_transfer" if holdout_kind == "task" else "domain_transfer",
        rows=tuple(r.strip() for r in rows.split(",") if r.strip()),
        seeds=tuple(int(s) for s in seeds.split(",") if s.strip()),
        train=_load_train_config(config_path),
    )
    report = run_experiment(spec, corpus, schemas, out_dir=out_dir)
    click.echo(format_table(report))
    click.echo(f"report: {os.path.join(out_dir, 'report.json')}")


@main.command("serve")
@click.option("--port", type=int, default=None, help="defaults to SDE_PORT or 8070")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve_cmd(port, host):
    """Serve the prediction API (needs SDE_MODEL_DIR and SDE_SCHEMA_DIR)."""
    import uvicorn

    from .service import create_app, service_from_env

    app = create_app(service_from_env())
    port = port or int(os.environ.get("SDE_PORT", "8070"))
    uvicorn.run(app, host=host, port=port)


@main.command("chat")
@click.option("--task", required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--schemas", "schema_dir", type=click.Path(exists=True), required=True)
def chat_cmd(task, model_path, schema_dir):
    """Terminal REPL against the same engine the service uses."""
    schemas = _load_schemas(schema_dir)
    if task not in schemas:
        raise click.ClickException(f"unknown task {task!r}; available: {sorted(schemas)}")
    model = load_model(model_path)
    graph = schemas[task]
    history: list[Turn] = []
    start = graph.node(graph.start)
    if start.action is not None:
        history.append(Turn(Speaker.SYSTEM, start.text, action=start.action))
        click.echo(f"SYSTEM: {start.text}")
    click.echo("(empty line to quit)")
    while True:
        try:
            text = click.prompt("USER", default="", show_default=False)
        except (EOFError, click.Abort):
            break
        if not text.strip():
            break
        history.append(Turn(Speaker.USER, text))
        ranked = predict(model, history, graph)
        top = ranked[0]
        click.echo(f"SYSTEM [{top.action}, p={top.probability:.3f}]: {top.template or top.action}")
        for nid, ntext, mass in top.alignments:
            click.echo(f"    aligned {nid} (p={mass:.3f}): {ntext}")
        history.append(Turn(Speaker.SYSTEM, top.template or top.action, action=top.action))


@main.command("import-star")
@click.argument("path", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default="star_corpus.json", show_default=True)
def import_star_cmd(path, out_path):
    """Convert a STAR-style export into the canonical corpus format."""
    from .star_import import import_star

    corpus, manifest = import_star(path)
    with open(out_path, "w") as f:
        f.write(dump_corpus(corpus))
    click.echo(canonical_json(manifest.to_dict()))


if __name__ == "__main__":
    main()
