"""Command-line interface: train, eval, verify, analyze-degrees, gen-dataset.

Configuration precedence (last wins): built-in defaults < preset < config
file < explicit flags. All human-readable output goes to stderr; JSON and
reports go to stdout or files. Exit codes: 0 success, 1 verification
violations, 2 configuration errors, 3 data errors, 4 numeric aborts,
5 checkpoint/vocabulary mismatches.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from .data import degree_analysis, load_bundle, write_degree_report
from .evaluation import evaluate, report_to_dict, write_eval_report
from .exceptions import (
    CheckpointMismatch,
    ConfigError,
    DataError,
    HyperKGError,
    NumericError,
)
from .model import load_checkpoint, save_checkpoint
from .rules import generate_wd_like, write_dataset
from .seeding import STREAM_VERIFY, named_stream
from .training import TrainConfig, train, write_training_log
from .verification import run_verification

PRESETS: dict[str, dict] = {
    "wn18rr": dict(dim=100, margin=1.0, reg_weight=0.8, learning_rate=0.01,
                   negs_entity=10, negs_relation=0, corruption="bernoulli"),
    "wn18rr-mobius": dict(dim=100, variant="mobius-add", margin=1.0, reg_weight=0.0,
                          learning_rate=0.01, negs_entity=10, negs_relation=0,
                          corruption="bernoulli"),
    "wn18rr-noreg": dict(dim=100, margin=1.0, reg_weight=0.0, learning_rate=0.01,
                         negs_entity=10, negs_relation=0, corruption="bernoulli"),
    "fb15k237": dict(dim=100, margin=0.5, reg_weight=0.2, learning_rate=0.01,
                     negs_entity=5, negs_relation=0, corruption="bernoulli"),
    "fb15k237-mobius": dict(dim=100, variant="mobius-add", margin=0.5, reg_weight=0.0,
                            learning_rate=0.01, negs_entity=5, negs_relation=0,
                            corruption="bernoulli"),
    "fb15k237-noreg": dict(dim=100, margin=0.5, reg_weight=0.0, learning_rate=0.01,
                           negs_entity=5, negs_relation=0, corruption="bernoulli"),
    "wd": dict(dim=100, margin=7.0, reg_weight=0.0, learning_rate=0.8,
               negs_entity=1, negs_relation=1, corruption="uniform"),
    "wdpp": dict(dim=100, margin=7.0, reg_weight=0.0, learning_rate=0.1,
                 negs_entity=1, negs_relation=1, corruption="uniform"),
}

_EXIT_CODES = ((ConfigError, 2), (CheckpointMismatch, 5), (DataError, 3), (NumericError, 4))


def _fail(exc: HyperKGError):
    for klass, code in _EXIT_CODES:
        if isinstance(exc, klass):
            click.echo(f"error: {exc}", err=True)
            sys.exit(code)
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _resolve_config(preset: str | None, config_file: str | None, flag_values: dict) -> TrainConfig:
    field_names = {f.name for f in dataclasses.fields(TrainConfig)}
    resolved: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        resolved.update(PRESETS[preset])
    if config_file is not None:
        try:
            payload = json.loads(Path(config_file).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {config_file}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_file} is not valid JSON: {exc}") from exc
        unknown = set(payload) - field_names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}; valid keys: {sorted(field_names)}")
        resolved.update(payload)
    resolved.update({k: v for k, v in flag_values.items() if v is not None})
    try:
        return TrainConfig(**resolved)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


_CONFIG_FLAGS = [
    click.option("--dim", type=int, default=None, help="Embedding dimensionality."),
    click.option("--shift", type=int, default=None, help="Object-permutation shift (default dim//2)."),
    click.option("--variant", type=click.Choice(["euclidean-add", "mobius-add"]), default=None),
    click.option("--margin", type=float, default=None, help="Hinge margin."),
    click.option("--reg-weight", type=float, default=None, help="Away-from-origin regularizer weight."),
    click.option("--learning-rate", type=float, default=None, help="Riemannian SGD step size."),
    click.option("--negs-entity", type=int, default=None, help="Entity corruptions per positive."),
    click.option("--negs-relation", type=int, default=None, help="Relation corruptions per positive."),
    click.option("--corruption", type=click.Choice(["bernoulli", "uniform"]), default=None),
    click.option("--max-epochs", type=int, default=None),
    click.option("--eval-every", type=int, default=None),
    click.option("--batches-per-epoch", type=int, default=None),
    click.option("--full-reg-sweep/--touched-reg-only", "full_reg_sweep", default=None),
    click.option("--proj-eps", type=float, default=None),
    click.option("--seed", type=int, default=None),
]


def _with_config_flags(fn):
    for flag in reversed(_CONFIG_FLAGS):
        fn = flag(fn)
    return fn


@click.group()
def main():
    """Hyperbolic knowledge-graph embeddings: training, evaluation, verification."""


@main.command("train")
@click.option("--data-dir", required=True, type=click.Path(), help="Directory with train/valid/test.txt.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--preset", default=None, help=f"One of {sorted(PRESETS)}.")
@click.option("--config", "config_file", default=None, type=click.Path(), help="JSON config file.")
@_with_config_flags
def cmd_train(data_dir, out_dir, preset, config_file, **flags):
    """Train a model and write logs, checkpoints and a test-set report."""
    try:
        config = _resolve_config(preset, config_file, flags)
        bundle = load_bundle(data_dir)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(
            json.dumps(dataclasses.asdict(config), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

        def progress(row):
            if row.val_mrr is not None:
                click.echo(f"epoch {row.epoch}: loss {row.loss:.4f} val_mrr {row.val_mrr:.4f}", err=True)

        result = train(bundle, config, out_dir=out, progress=progress)
        report = evaluate(result.store, bundle, ks=(1, 3, 10))
        write_eval_report(report, out / "eval_report.json")
        click.echo(
            f"done: best epoch {result.best_epoch}, "
            f"val MRR {result.best_val_mrr:.4f}, test MRR {report.mrr:.4f}",
            err=True,
        )
        click.echo(json.dumps(report_to_dict(report), sort_keys=True))
    except HyperKGError as exc:
        _fail(exc)


@main.command("eval")
@click.argument("checkpoint", type=click.Path())
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--ks", default="10", help="Comma-separated Hits@k cutoffs.")
@click.option("--per-query", "per_query", default=None, type=click.Path(), help="Optional per-query CSV path.")
def cmd_eval(checkpoint, data_dir, ks, per_query):
    """Evaluate a checkpoint on the test split; JSON report to stdout."""
    try:
        try:
            k_values = tuple(int(k) for k in ks.split(",") if k)
        except ValueError as exc:
            raise ConfigError(f"--ks must be comma-separated integers, got {ks!r}") from exc
        if not k_values:
            raise ConfigError("--ks must name at least one cutoff")
        bundle = load_bundle(data_dir)
        store, _ = load_checkpoint(checkpoint, bundle.vocab)
        report = evaluate(store, bundle, ks=k_values)
        if per_query is not None:
            write_eval_report(report, csv_path=per_query)
        click.echo(json.dumps(report_to_dict(report), sort_keys=True))
    except HyperKGError as exc:
        _fail(exc)


@main.command("verify")
@click.option("--samples", default=100_000, type=int, help="Samples per region for the locus check.")
@click.option("--dims", default="2,5,100", help="Comma-separated dimensions.")
@click.option("--regions", default=100, type=int, help="Random regions per dimension.")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", default=None, type=click.Path(), help="Optional JSON report path.")
def cmd_verify(samples, dims, regions, seed, out_path):
    """Run the formal-property suites; exit 1 if any check reports violations."""
    try:
        try:
            dim_values = tuple(int(d) for d in dims.split(",") if d)
        except ValueError as exc:
            raise ConfigError(f"--dims must be comma-separated integers, got {dims!r}") from exc
        rng = named_stream(seed, STREAM_VERIFY)
        results = run_verification(samples, dim_values, rng, regions_per_dim=regions)
        payload = json.dumps(results, sort_keys=True, indent=2)
        if out_path is not None:
            Path(out_path).write_text(payload + "\n", encoding="utf-8")
        click.echo(payload)
        total = sum(r["violations"] for r in results)
        click.echo(f"total violations: {total}", err=True)
        sys.exit(1 if total else 0)
    except HyperKGError as exc:
        _fail(exc)


@main.command("analyze-degrees")
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--out", "out_csv", required=True, type=click.Path(), help="Histogram CSV path (JSON sidecar alongside).")
@click.option("--d-min", default=1, type=int, help="Smallest degree used by the exponent fit.")
def cmd_analyze_degrees(data_dir, out_csv, d_min):
    """Degree distribution over all splits: log-binned pdf plus exponent fit."""
    try:
        bundle = load_bundle(data_dir)
        triples = np.concatenate([bundle.train, bundle.valid, bundle.test])
        report = degree_analysis(triples, n_entities=bundle.n_entities, d_min=d_min)
        write_degree_report(report, out_csv)
        click.echo(
            f"{report.n_facts} facts, {report.n_entities} entities, "
            f"alpha_hat {report.alpha_hat:.4f} (d_min {report.d_min})",
            err=True,
        )
    except HyperKGError as exc:
        _fail(exc)


@main.command("gen-dataset")
@click.option("--rules", type=click.Choice(["a", "ab"]), default="a", help="Rule set to materialize.")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_gen_dataset(rules, seed, out_dir):
    """Generate a rule-governed synthetic dataset (TSV splits + provenance)."""
    try:
        rule_tuple = ("a",) if rules == "a" else ("a", "b")
        dataset = generate_wd_like(rules=rule_tuple, seed=seed)
        write_dataset(dataset, out_dir)
        counts = dataset.provenance["counts"]
        click.echo(
            f"wrote {out_dir}: {counts['entities']} entities, "
            f"{counts['train']}/{counts['valid']}/{counts['test']} train/valid/test",
            err=True,
        )
    except HyperKGError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
