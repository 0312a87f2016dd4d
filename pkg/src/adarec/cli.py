"""Command-line entry points: adarec stats|profile|causal|recommend|evaluate|synth|ablate.

Every subcommand takes --config pointing at one JSON document; --out
overrides the configured output directory and --users restricts per-user
commands to the ids listed in a file (one per line). Errors exit nonzero
with a single machine-parsable line on stderr.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click

from . import pipeline
from .errors import AdaRecError, ConfigError


def _load_config(config_path: str, out: str | None) -> pipeline.RunConfig:
    cfg = pipeline.RunConfig.load(config_path)
    if out:
        cfg = replace(cfg, out_dir=out)
    return cfg


def _load_users(users_path: str | None) -> list[str] | None:
    if not users_path:
        return None
    try:
        lines = Path(users_path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read users file {users_path}: {exc}") from None
    return [line.strip() for line in lines if line.strip()]


def _fail(exc: Exception) -> None:
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
    sys.exit(1)


def _common(fn):
    fn = click.option("--users", default=None, help="File of user ids (one per line) to process.")(fn)
    fn = click.option("--out", default=None, help="Output directory override.")(fn)
    fn = click.option("--config", required=True, help="Path to the JSON run config.")(fn)
    return fn


@click.group()
def main():
    """Adaptive recommendation pipeline."""


@main.command()
@click.option("--config", required=True)
@click.option("--out", default=None)
def stats(config, out):
    """Write per-feature distribution summaries."""
    try:
        path = pipeline.run_stats(_load_config(config, out))
        click.echo(f"wrote {path}")
    except (AdaRecError, OSError) as exc:
        _fail(exc)


@main.command()
@_common
def profile(config, out, users):
    """Generate narrative profiles for the selected users."""
    try:
        path = pipeline.run_profile(_load_config(config, out), _load_users(users))
        click.echo(f"wrote {path}")
    except (AdaRecError, OSError) as exc:
        _fail(exc)


@main.command()
@_common
def causal(config, out, users):
    """Per-user causal discovery: PAG plus ranked causal feature set."""
    try:
        path = pipeline.run_causal(_load_config(config, out), _load_users(users))
        click.echo(f"wrote {path}")
    except (AdaRecError, OSError) as exc:
        _fail(exc)


@main.command()
@_common
@click.option("--factor/--no-factor", default=None,
              help="Toggle the Factor Analysis block (overrides config).")
@click.option("--pattern/--no-pattern", default=None,
              help="Toggle the Pattern Analysis block (overrides config).")
def recommend(config, out, users, factor, pattern):
    """Run the full reasoning pipeline and write decisions/predictions."""
    try:
        cfg = _load_config(config, out)
        ablation = cfg.ablation
        if factor is not None or pattern is not None:
            from .reasoning import AblationFlags

            ablation = AblationFlags(
                factor=ablation.factor if factor is None else factor,
                pattern=ablation.pattern if pattern is None else pattern,
            )
        decisions, predictions = pipeline.run_recommend(
            cfg, _load_users(users), ablation=ablation
        )
        click.echo(f"wrote {decisions} and {predictions}")
    except (AdaRecError, OSError) as exc:
        _fail(exc)


@main.command()
@click.option("--config", required=True)
@click.option("--out", default=None)
@click.option("--predictions", default=None,
              help="Predictions file (defaults to <out>/predictions.jsonl).")
def evaluate(config, out, predictions):
    """Score a predictions file against the test labels."""
    try:
        pipeline.run_evaluate(_load_config(config, out), predictions)
    except (AdaRecError, OSError) as exc:
        _fail(exc)


@main.command()
@click.option("--config", required=True)
@click.option("--out", default=None)
def synth(config, out):
    """Generate synthetic fixture data from the config's synth section."""
    try:
        paths = pipeline.run_synth(_load_config(config, out))
        click.echo("wrote " + ", ".join(str(p) for p in paths))
    except (AdaRecError, OSError) as exc:
        _fail(exc)


@main.command()
@_common
def ablate(config, out, users):
    """Run the three ablation arms and print the comparison table."""
    try:
        pipeline.run_ablate(_load_config(config, out), _load_users(users))
    except (AdaRecError, OSError) as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
