"""Headless evaluation harness: trace replay, spec generation, statistics."""

from vignette.harness.stats import (
    FriedmanResult,
    RankingDataset,
    format_mean_rankings,
    format_pairwise_table,
    friedman_statistic,
    friedman_test,
    mean_rankings,
    nemenyi_posthoc,
    studentized_range_sf,
)
from vignette.harness.trace import TraceError, ViewerTrace, load_trace, save_trace, synthesize_trace
from vignette.harness.generate import generate_spec
from vignette.harness.runner import RunResult, run_trace

__all__ = [
    "FriedmanResult",
    "RankingDataset",
    "format_mean_rankings",
    "format_pairwise_table",
    "friedman_statistic",
    "friedman_test",
    "mean_rankings",
    "nemenyi_posthoc",
    "studentized_range_sf",
    "TraceError",
    "ViewerTrace",
    "load_trace",
    "save_trace",
    "synthesize_trace",
    "generate_spec",
    "RunResult",
    "run_trace",
]
