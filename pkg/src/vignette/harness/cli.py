"""The `sim` command.

    sim run --spec story.vignette.json --trace follow.json --mode cd \
            --mock script.json --out runs/
    sim stats --rankings ranks.csv --test friedman

Exit codes for `sim run`: 0 when the replay ended with every key event
completed in order, 1 when it ran but broke that guarantee (diagnostics
on stderr), 2 when an input file is missing or corrupt.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from vignette.core.serialize import SpecInvariantError, SpecParseError, decode_spec
from vignette.harness.runner import run_trace
from vignette.harness.stats import (
    RankingDataset,
    format_mean_rankings,
    format_pairwise_table,
    friedman_test,
)
from vignette.harness.trace import TraceError, load_trace
from vignette.llm.gateway import Gateway
from vignette.llm.providers import ScriptedMockProvider, ScriptError
from vignette.plan.planner import PlannerMode

EXIT_UNSAFE = 1
EXIT_BAD_INPUT = 2

_MODES = {
    "cd": PlannerMode.CD,
    "po": PlannerMode.PO,
    "so": PlannerMode.SO,
    "bl": PlannerMode.BL,
}


def _fail_input(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_BAD_INPUT)


@click.group()
def main() -> None:
    """Headless vignette runs and evaluation statistics."""


@main.command("run")
@click.option("--spec", "spec_path", required=True, type=click.Path(path_type=Path))
@click.option("--trace", "trace_path", required=True, type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(sorted(_MODES)), default="cd", show_default=True)
@click.option("--mock", "mock_path", type=click.Path(path_type=Path), default=None,
              help="Mock provider script; omit for the template-default mock.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Directory for the event log, activity table and summary.")
@click.option("--max-ticks", type=int, default=None, help="Hard tick cap.")
def run_command(spec_path, trace_path, mode, mock_path, out_dir, max_ticks) -> None:
    """Replay a viewer trace against a vignette spec."""
    try:
        spec = decode_spec(spec_path.read_bytes())
    except OSError as exc:
        _fail_input(f"cannot read spec {spec_path}: {exc}")
    except (SpecParseError, SpecInvariantError) as exc:
        _fail_input(f"corrupted spec {spec_path}: {exc}")

    try:
        trace = load_trace(trace_path)
    except TraceError as exc:
        _fail_input(str(exc))

    if mock_path is not None:
        try:
            provider = ScriptedMockProvider.from_file(str(mock_path))
        except ScriptError as exc:
            _fail_input(str(exc))
    else:
        provider = ScriptedMockProvider()

    try:
        result = run_trace(
            spec,
            trace,
            mode=_MODES[mode],
            gateway=Gateway(provider),
            out_dir=out_dir,
            max_ticks=max_ticks,
        )
    except ValueError as exc:
        # engine constructor rejects specs whose environment fails the
        # geometry checks; that is still an input problem
        _fail_input(str(exc))

    click.echo(
        f"status={result.status} ticks={result.ticks} "
        f"events={len(result.event_order)}/{result.events_total} "
        f"fallbacks={result.fallbacks}"
    )
    for name, path in sorted(result.files.items()):
        click.echo(f"wrote {name}: {path}")
    if not result.bottleneck_safe:
        for line in result.diagnostics:
            click.echo(f"diagnostic: {line}", err=True)
        sys.exit(EXIT_UNSAFE)


@main.command("stats")
@click.option("--rankings", "rankings_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--test", "which", type=click.Choice(["friedman", "nemenyi", "means"]),
              default="friedman", show_default=True)
def stats_command(rankings_path, which) -> None:
    """Evaluation statistics over a rankings CSV (rows = evaluators)."""
    try:
        data = RankingDataset.from_csv(rankings_path)
    except OSError as exc:
        _fail_input(f"cannot read rankings {rankings_path}: {exc}")
    except ValueError as exc:
        _fail_input(str(exc))

    try:
        if which == "friedman":
            result = friedman_test(data)
            click.echo(
                f"Friedman chi-square = {result.chi_square:.4f}, "
                f"p = {result.p_value:.6g} (N={data.n}, k={data.k})"
            )
            click.echo(format_mean_rankings(data))
        elif which == "nemenyi":
            click.echo(format_pairwise_table(data))
        else:
            click.echo(format_mean_rankings(data))
    except ValueError as exc:
        _fail_input(str(exc))


if __name__ == "__main__":
    main()
