"""Authoritative simulation: tick loop, zones, bottleneck progression."""

from vignette.runtime.world import (
    ActiveActivity,
    CharacterState,
    EventLog,
    LogRecord,
    ViewerCommand,
    WorldState,
)
from vignette.runtime.engine import Engine, RuntimeConfig
from vignette.runtime.table import export_activity_table, table_to_csv

__all__ = [
    "ActiveActivity",
    "CharacterState",
    "EventLog",
    "LogRecord",
    "ViewerCommand",
    "WorldState",
    "Engine",
    "RuntimeConfig",
    "export_activity_table",
    "table_to_csv",
]
