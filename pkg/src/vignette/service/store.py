"""File-backed persistence.

One JSON document per vignette, replaced atomically on every edit
(write-to-temp + rename), so a crash mid-save never corrupts a draft.
Session logs are append-only JSONL; their metadata lives beside them in
a small JSON file.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from pathlib import Path

__all__ = ["StoreError", "FileStore"]


class StoreError(Exception):
    """Store directory unusable or a document is unreadable."""


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _read_json(path: Path) -> dict | None:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        return None
    except (OSError, json.JSONDecodeError) as exc:
        raise StoreError(f"unreadable document {path}: {exc}") from exc


class FileStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.vignette_dir = self.root / "vignettes"
        self.session_dir = self.root / "sessions"
        try:
            self.vignette_dir.mkdir(parents=True, exist_ok=True)
            self.session_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreError(f"cannot create store under {self.root}: {exc}") from exc
        self._lock = threading.Lock()

    @staticmethod
    def new_id(prefix: str) -> str:
        return f"{prefix}_{uuid.uuid4().hex[:12]}"

    # ----- vignette documents ------------------------------------------------

    def _vignette_path(self, vignette_id: str) -> Path:
        return self.vignette_dir / f"{vignette_id}.json"

    def save_vignette(self, vignette_id: str, doc: dict) -> None:
        text = json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock:
            _atomic_write(self._vignette_path(vignette_id), text)

    def load_vignette(self, vignette_id: str) -> dict | None:
        with self._lock:
            return _read_json(self._vignette_path(vignette_id))

    def list_vignette_ids(self) -> list[str]:
        with self._lock:
            return sorted(p.stem for p in self.vignette_dir.glob("*.json"))

    # ----- session logs --------------------------------------------------------

    def _meta_path(self, session_id: str) -> Path:
        return self.session_dir / f"{session_id}.json"

    def _records_path(self, session_id: str) -> Path:
        return self.session_dir / f"{session_id}.jsonl"

    def save_session_meta(self, session_id: str, meta: dict) -> None:
        text = json.dumps(meta, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock:
            _atomic_write(self._meta_path(session_id), text)

    def load_session_meta(self, session_id: str) -> dict | None:
        with self._lock:
            return _read_json(self._meta_path(session_id))

    def append_session_records(self, session_id: str, records: list[dict]) -> None:
        if not records:
            return
        lines = "".join(
            json.dumps(r, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            + "\n"
            for r in records
        )
        with self._lock:
            with open(self._records_path(session_id), "a", encoding="utf-8") as fh:
                fh.write(lines)

    def load_session_records(self, session_id: str) -> list[dict]:
        with self._lock:
            try:
                text = self._records_path(session_id).read_text(encoding="utf-8")
            except FileNotFoundError:
                return []
        return [json.loads(line) for line in text.splitlines() if line]

    def list_session_ids(self) -> list[str]:
        with self._lock:
            return sorted(p.stem for p in self.session_dir.glob("*.json"))
