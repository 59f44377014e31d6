"""
Run-directory store with thread-safe operations.

One folder per run under a root directory. Only data access: JSON documents,
CSV tables and raw files. No simulation logic.
"""
import json
import re
import threading
from pathlib import Path
from typing import Any, Union

import pandas as pd

from app.repository.checkpoints import ArtifactNotFoundError

RUN_ID_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,127}$")
MANIFEST = "manifest.json"
SUMMARY = "summary.json"
KPI_STREAM = "kpi.jsonl"


def telemetry_name(policy: str) -> str:
    return f"telemetry_{policy}.csv"


class InvalidRunIdError(ValueError):
    def __init__(self, run_id: str):
        self.code = "INVALID_RUN_ID"
        super().__init__(f"invalid run id: {run_id!r}")


class RunStore:
    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._lock = threading.Lock()

    # ── Runs ────────────────────────────────────────────────────────────────

    def create_run(self, run_id: str) -> Path:
        path = self._path(run_id)
        with self._lock:
            path.mkdir(parents=True, exist_ok=True)
        return path

    def run_dir(self, run_id: str) -> Path:
        path = self._path(run_id)
        if not path.is_dir():
            raise ArtifactNotFoundError(path, "run")
        return path

    def list_runs(self) -> list[dict[str, Any]]:
        """Manifests of every run that has one, sorted by run id."""
        with self._lock:
            if not self.root.is_dir():
                return []
            folders = sorted(p for p in self.root.iterdir() if p.is_dir() and (p / MANIFEST).is_file())
        return [self.read_json(folder.name, MANIFEST) for folder in folders]

    # ── Documents ───────────────────────────────────────────────────────────

    def write_json(self, run_id: str, name: str, payload: dict[str, Any]) -> Path:
        path = self.create_run(run_id) / name
        with self._lock:
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def read_json(self, run_id: str, name: str) -> dict[str, Any]:
        path = self.run_dir(run_id) / name
        if not path.is_file():
            raise ArtifactNotFoundError(path, name)
        return json.loads(path.read_text(encoding="utf-8"))

    def write_text(self, run_id: str, name: str, text: str) -> Path:
        path = self.create_run(run_id) / name
        with self._lock:
            path.write_text(text, encoding="utf-8")
        return path

    def write_frame(self, run_id: str, name: str, frame: pd.DataFrame) -> Path:
        path = self.create_run(run_id) / name
        with self._lock:
            frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
        return path

    def read_frame(self, run_id: str, name: str) -> pd.DataFrame:
        path = self.file_path(run_id, name)
        return pd.read_csv(path, float_precision="round_trip")

    def file_path(self, run_id: str, name: str, must_exist: bool = True) -> Path:
        if "/" in name or "\\" in name or name.startswith("."):
            raise ArtifactNotFoundError(name, "file")
        path = self.run_dir(run_id) / name if must_exist else self._path(run_id) / name
        if must_exist and not path.is_file():
            raise ArtifactNotFoundError(path, name)
        return path

    def _path(self, run_id: str) -> Path:
        if not RUN_ID_PATTERN.match(run_id) or ".." in run_id:
            raise InvalidRunIdError(run_id)
        return self.root / run_id

