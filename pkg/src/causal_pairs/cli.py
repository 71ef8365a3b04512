"""``causal-pairs`` command-line tool.

Exit codes: 0 ok, 1 runtime failure, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import config as cfg
from .assignment import plan_logistic, sample_realization
from .errors import ConfigError
from .evaluation import CSV_COLUMNS, rows_from_csv, rows_to_csv, rows_to_json, run_grid
from .model_sim import NoiseModel, apply_hypothetical_model, fit_t_learner, predict_outcomes
from .scm_data import CSUITE_IDS, DATASET_IDS, generate_csuite, generate_dgp, get_spec
from .tables_io import model_table_to_csv, observational_to_csv, table_to_csv, table_to_json
from .validation import validate_assumption

log = logging.getLogger("causal_pairs")

EXIT_RUNTIME, EXIT_CONFIG, EXIT_IO = 1, 2, 3
METRICS = ("variance", "bias", "mse")


class RunFailure(RuntimeError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return str(path)


def _manifest(out: Path, command: str, resolved: dict, outputs: list[str], started: str, seeds) -> None:
    manifest = {
        "command": command,
        "config": resolved,
        "config_hash": cfg.config_hash(resolved),
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": outputs,
        "seeds": seeds,
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, default=str))


def _load(config_path):
    return cfg.load_file(config_path) if config_path else None


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Evaluate causal-error estimators on synthetic conditionally randomized experiments."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.command()
@click.option("--config", "config_path", type=click.Path(), help="YAML config with a [generate] section.")
@click.option("--dataset", help=f"One of: {', '.join(DATASET_IDS)}.")
@click.option("--n", type=int)
@click.option("--seed", type=int)
@click.option("-o", "--output", "output", type=click.Path(), default="out", show_default=True)
def generate(config_path, dataset, n, seed, output):
    """Write a potential-outcome table (and, for DGPs, the observational sample)."""
    started = _now()
    resolved = cfg.resolve("generate", _load(config_path), {"dataset": dataset, "n": n, "seed": seed})
    if resolved["dataset"] is None:
        raise ConfigError(f"a dataset is required; valid ids: {', '.join(DATASET_IDS)}")
    spec = get_spec(resolved["dataset"], **(resolved["dataset_params"] or {}))
    out = Path(output)
    outputs = []
    if spec.id in CSUITE_IDS:
        table = generate_csuite(spec, int(resolved["n"]), int(resolved["seed"]))
    else:
        sample, table = generate_dgp(spec, int(resolved["n"]), int(resolved["seed"]))
        outputs.append(_write(out / "observational.csv", observational_to_csv(sample)))
    outputs.append(_write(out / "table.csv", table_to_csv(table)))
    outputs.append(_write(out / "table.json", table_to_json(table)))
    _manifest(out, "generate", resolved, outputs, started, {"seed": resolved["seed"]})
    click.echo(f"wrote {table.n} units to {out / 'table.csv'}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(), help="YAML config with a [run] section.")
@click.option("--replications", type=int, help="Replications per cell (default 100).")
@click.option("--seed", type=int)
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("-o", "--output", "output", type=click.Path(), default="out", show_default=True)
def run(config_path, replications, seed, jobs, output):
    """Run an experiment grid and write metrics.csv / metrics.json."""
    started = _now()
    resolved = cfg.resolve("run", _load(config_path), {"replications": replications, "seed": seed})
    configs = cfg.expand_grid(resolved)
    log.info("running %d cells", len(configs))
    rows = run_grid(configs, jobs=max(1, jobs))
    failed = sum(1 for r in rows if r.n_valid_reps == 0)
    out = Path(output)
    outputs = [_write(out / "metrics.csv", rows_to_csv(rows)), _write(out / "metrics.json", rows_to_json(rows))]
    _manifest(out, "run", resolved, outputs, started, {"base_seed": resolved["seed"], "cells": len(configs)})
    if failed == len(rows):
        raise RunFailure("every cell of the grid failed")
    if failed:
        click.echo(f"warning: {failed} flagged rows", err=True)
    click.echo(f"wrote {len(rows)} rows to {out / 'metrics.csv'}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(), help="YAML config with a [validate] section.")
@click.option("--dataset")
@click.option("--n", type=int)
@click.option("--sigma2-nu", type=float)
@click.option("--sigma2-beta", type=float)
@click.option("--seed", type=int)
@click.option("--degree", type=int)
@click.option("--model", type=click.Choice(["hypothetical", "t_learner"]))
@click.option("-o", "--output", "output", type=click.Path(), default="out", show_default=True)
def validate(config_path, dataset, n, sigma2_nu, sigma2_beta, seed, degree, model, output):
    """Check the multiplicative-error assumption on one simulated pool."""
    started = _now()
    overrides = {
        "dataset": dataset,
        "n": n,
        "sigma2_nu": sigma2_nu,
        "sigma2_beta": sigma2_beta,
        "seed": seed,
        "degree": degree,
        "model": model,
    }
    resolved = cfg.resolve("validate", _load(config_path), overrides)
    report, model_table = run_validation(resolved)
    out = Path(output)
    outputs = [
        _write(out / "validation.json", report.to_json()),
        _write(out / "model_outcomes.csv", model_table_to_csv(model_table)),
    ]
    _manifest(out, "validate", resolved, outputs, started, {"seed": resolved["seed"]})
    click.echo(report.render())


def run_validation(resolved: dict):
    """Simulate a pool, a model and one logistic realization; run the validation pipeline."""
    seeds = np.random.SeedSequence(int(resolved["seed"])).spawn(4)
    spec = get_spec(resolved["dataset"], **(resolved["dataset_params"] or {}))
    if spec.id in CSUITE_IDS:
        if resolved["model"] != "hypothetical":
            raise ConfigError("csuite datasets support only the hypothetical model")
        table = generate_csuite(spec, int(resolved["n"]), seeds[0])
        sample = None
    else:
        sample, table = generate_dgp(spec, int(resolved["n"]), seeds[0])
    if resolved["model"] == "t_learner":
        model = predict_outcomes(fit_t_learner(sample), table)
    else:
        model = apply_hypothetical_model(table, NoiseModel(float(resolved["sigma2_nu"])), seeds[1])
    plan = plan_logistic(table.covariates, float(resolved["sigma2_beta"]), seeds[2])
    realization = sample_realization(plan, seeds[3])
    report = validate_assumption(model, table, realization, int(resolved["degree"]), bool(resolved["per_arm"]))
    return report, model


FIGURES = {
    "fig2_logistic": lambda r: r.scheme == "logistic" and r.dataset in CSUITE_IDS,
    "fig3_subsample": lambda r: r.scheme == "subsample" and r.dataset in CSUITE_IDS,
    "fig4_models": lambda r: r.dataset not in CSUITE_IDS,
}


@cli.command()
@click.argument("metrics", type=click.Path())
@click.option("-o", "--output", "output", type=click.Path(), default="out", show_default=True)
def report(metrics, output):
    """Reshape a metrics CSV into long-format per-figure tables."""
    text = Path(metrics).read_text(encoding="utf-8")
    header = next(csv.reader(io.StringIO(text)), [])
    if tuple(header) != CSV_COLUMNS:
        raise ConfigError(f"{metrics} is not a metrics table (expected columns {','.join(CSV_COLUMNS)})")
    rows = rows_from_csv(text)
    out = Path(output)
    cols = ["dataset", "scheme", "scheme_param", "sigma2_nu", "estimator", "metric", "value", "n_valid_reps"]
    for name, keep in FIGURES.items():
        selected = [r for r in rows if keep(r)]
        if not selected:
            continue
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in selected:
            for metric in METRICS:
                value = getattr(r, metric)
                w.writerow(
                    [r.dataset, r.scheme, format(r.scheme_param, ".17g"), format(r.sigma2_nu, ".17g"), r.estimator,
                     metric, format(value, ".17g"), r.n_valid_reps]
                )
        _write(out / f"{name}.csv", buf.getvalue())
        click.echo(f"{name}: {len(selected) * len(METRICS)} rows")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="causal-pairs", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.Abort:
        return EXIT_RUNTIME
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
