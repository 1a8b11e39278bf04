"""Content-addressed blobs and a JSON document store on the filesystem.

Blob writes are atomic (write to a temp file, fsync, rename), so a crash
never leaves a partial object under its final name. Uploading identical
content is idempotent by construction: the address is the SHA-256 hash.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from pathlib import Path


class StorageError(Exception):
    pass


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class BlobStore:
    """Bytes addressed by their SHA-256 hex digest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.root / digest[:2] / digest

    def put(self, content: bytes) -> str:
        digest = hashlib.sha256(content).hexdigest()
        path = self._path(digest)
        if not path.exists():
            _atomic_write(path, content)
        return digest

    def get(self, digest: str) -> bytes:
        path = self._path(digest)
        if not path.exists():
            raise StorageError(f"no blob {digest}")
        return path.read_bytes()

    def exists(self, digest: str) -> bool:
        return self._path(digest).exists()


class DocumentStore:
    """JSON documents grouped by kind, one file per document."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, kind: str, doc_id: str) -> Path:
        safe = doc_id.replace("/", "_").replace(":", "_")
        return self.root / kind / f"{safe}.json"

    def put(self, kind: str, doc_id: str, document: dict) -> None:
        _atomic_write(
            self._path(kind, doc_id),
            json.dumps(document, sort_keys=True, indent=1).encode("utf-8"),
        )

    def get(self, kind: str, doc_id: str) -> dict | None:
        path = self._path(kind, doc_id)
        if not path.exists():
            return None
        return json.loads(path.read_text("utf-8"))

    def delete(self, kind: str, doc_id: str) -> bool:
        path = self._path(kind, doc_id)
        if not path.exists():
            return False
        path.unlink()
        return True

    def list(self, kind: str) -> list[dict]:
        folder = self.root / kind
        if not folder.exists():
            return []
        return [
            json.loads(p.read_text("utf-8")) for p in sorted(folder.glob("*.json"))
        ]

    def mutate(self, kind: str, doc_id: str, update) -> dict:
        """Read-modify-write under the store lock (per-record serialization)."""
        with self._lock:
            current = self.get(kind, doc_id)
            if current is None:
                raise StorageError(f"no {kind} document {doc_id}")
            revised = update(dict(current))
            self.put(kind, doc_id, revised)
            return revised
