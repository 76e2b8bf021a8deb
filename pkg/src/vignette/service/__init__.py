"""HTTP service: authoring endpoints, live sessions, file-backed store."""

from vignette.service.store import FileStore, StoreError
from vignette.service.app import create_app

__all__ = ["FileStore", "StoreError", "create_app"]
