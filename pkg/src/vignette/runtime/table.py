"""Activity-table export: the run summarized event by event.

Rows alternate between authored key events and the divergent windows
around them; columns are characters. Cells from NPC plans carry a
``generated`` flag (the authored script never does), and viewer-chosen
off-story cells carry ``divergent``.
"""

from __future__ import annotations

import csv
import io

from vignette.core.types import VignetteSpec
from vignette.runtime import world as w
from vignette.runtime.world import EventLog

__all__ = ["export_activity_table", "table_to_csv"]


def _cell(record_payload: dict) -> dict:
    return {
        "action": record_payload["action"],
        "object_id": record_payload["object_id"],
        "object_name": record_payload.get("object_name"),
        "generated": bool(record_payload.get("generated")),
        "divergent": bool(record_payload.get("divergent")),
    }


def export_activity_table(log: EventLog, spec: VignetteSpec) -> dict:
    """Table as a JSON-ready dict built purely from the event log."""
    names = {c.id: c.name for c in spec.characters}
    columns = [c.id for c in spec.characters]

    rows: list[dict] = []
    window: dict[str, list[dict]] = {}

    def flush_window() -> None:
        nonlocal window
        if window:
            rows.append(
                {
                    "kind": "divergent_window",
                    "cells": {cid: cells for cid, cells in sorted(window.items())},
                }
            )
            window = {}

    authored_cells: dict[int, dict[str, dict]] = {}
    for record in log:
        if record.kind == w.REC_ACTIVITY_START:
            payload = record.payload
            if payload.get("authored_event") is not None:
                authored_cells.setdefault(payload["authored_event"], {})[
                    record.actor
                ] = _cell(payload)
            elif payload["action"] != "idle":
                window.setdefault(record.actor, []).append(_cell(payload))
        elif record.kind == w.REC_EVENT_COMPLETED:
            flush_window()
            index = record.payload["event_index"]
            event = spec.key_events[index]
            cells = {}
            for activity in event.activities:
                observed = authored_cells.get(index, {}).get(activity.character_id)
                cells[activity.character_id] = observed or {
                    "action": activity.action,
                    "object_id": activity.object_id,
                    "object_name": None,
                    "generated": False,
                    "divergent": False,
                }
            rows.append(
                {"kind": "key_event", "event_index": index, "cells": cells}
            )
    flush_window()
    return {
        "columns": columns,
        "column_names": [names[c] for c in columns],
        "rows": rows,
    }


def table_to_csv(table: dict) -> str:
    """Flat CSV view: one row per table row, one column per character."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["row", *table["column_names"]])
    for row in table["rows"]:
        if row["kind"] == "key_event":
            label = f"event {row['event_index']}"
        else:
            label = "divergent"
        line = [label]
        for cid in table["columns"]:
            cell = row["cells"].get(cid)
            if cell is None:
                line.append("")
            elif isinstance(cell, list):
                line.append(
                    " / ".join(_format_cell(c) for c in cell)
                )
            else:
                line.append(_format_cell(cell))
        writer.writerow(line)
    return out.getvalue()


def _format_cell(cell: dict) -> str:
    target = cell.get("object_name") or cell.get("object_id") or ""
    text = f"{cell['action']} [{target}]" if target else cell["action"]
    if cell.get("generated"):
        text += " *"
    return text
