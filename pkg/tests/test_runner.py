"""run_trace judgments and artifact files."""

import csv
import json

from vignette.harness.generate import generate_spec
from vignette.harness.runner import run_trace
from vignette.harness.trace import synthesize_trace
from vignette.runtime import RuntimeConfig

CONFIG = RuntimeConfig(activity_duration=8, idle_divergence_ticks=4,
                       inner_voice_cooldown=8)


def _safe_run(tmp_path=None, **kw):
    spec = generate_spec(42)
    trace = synthesize_trace(spec, seed=6, config=CONFIG, dally_chance=0.4)
    return spec, trace, run_trace(spec, trace, out_dir=tmp_path, **kw)


def test_clean_run_judged_safe(tmp_path):
    spec, _, result = _safe_run(tmp_path)
    assert result.status == "ended"
    assert result.bottleneck_safe
    assert result.event_order == list(range(len(spec.key_events)))
    assert result.exit_code == 0
    assert not result.diagnostics
    assert result.summary()["status"] == "ended"


def test_truncated_run_judged_unsafe():
    spec = generate_spec(42)
    trace = synthesize_trace(spec, seed=6, config=CONFIG, dally_chance=0.4)
    result = run_trace(spec, trace, max_ticks=10)
    assert result.status == "running"
    assert not result.bottleneck_safe
    assert result.exit_code == 1
    assert any("did not end" in d for d in result.diagnostics)


def test_artifact_files_parse(tmp_path):
    _, _, result = _safe_run(tmp_path, trace_id="t0")
    events = (tmp_path / "t0_events.jsonl").read_text(encoding="utf-8")
    lines = [json.loads(line) for line in events.splitlines()]
    assert lines and lines[-1]["kind"] == "run_ended"
    table = json.loads((tmp_path / "t0_activity_table.json").read_text("utf-8"))
    assert any(row["kind"] == "key_event" for row in table["rows"])
    with open(tmp_path / "t0_activity_table.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) > 1
    summary = json.loads((tmp_path / "t0_summary.json").read_text("utf-8"))
    assert summary["status"] == "ended"
    assert summary["bottleneck_safe"] is True


def test_key_event_rows_contain_no_divergent_cells(tmp_path):
    spec, _, result = _safe_run(tmp_path)
    for row in result.table["rows"]:
        if row["kind"] != "key_event":
            continue
        for cell in row["cells"].values():
            assert not cell.get("divergent", False)
