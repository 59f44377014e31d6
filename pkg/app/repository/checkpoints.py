"""
Parameter checkpoint files.

Layout: a numpy .npz archive holding one float64 array per parameter (keyed by
its dotted name, e.g. "lstm1.W_ih") plus a `__header__` entry, a JSON string:

    {"format": "airan-params", "version": 1, "kind": "forecaster" | "agent", "meta": {...}}

Loading checks format, version and kind, and never unpickles.
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Union

import numpy as np

FORMAT = "airan-params"
VERSION = 1
HEADER_KEY = "__header__"

PathLike = Union[str, Path]


class ArtifactNotFoundError(Exception):
    """Raised when a checkpoint, run directory or run file does not exist."""

    def __init__(self, path: PathLike, what: str = "artifact"):
        self.code = "ARTIFACT_NOT_FOUND"
        self.path = str(path)
        super().__init__(f"{what} not found: {path}")


class CheckpointFormatError(Exception):
    """Raised when a file is not a checkpoint this version can read."""
    pass


def save_checkpoint(
    path: PathLike,
    kind: str,
    arrays: dict[str, np.ndarray],
    meta: dict[str, Any] | None = None,
) -> Path:
    """Write `arrays` and a versioned header to `path` (".npz" is appended if missing)."""
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    if HEADER_KEY in arrays:
        raise CheckpointFormatError(f"'{HEADER_KEY}' is reserved")
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"format": FORMAT, "version": VERSION, "kind": kind, "meta": meta or {}}
    payload = {name: np.asarray(values, dtype=np.float64) for name, values in arrays.items()}
    payload[HEADER_KEY] = np.array(json.dumps(header, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)
    return path


def load_checkpoint(path: PathLike, kind: str) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        (arrays by name, header meta).

    Raises:
        ArtifactNotFoundError: If the file does not exist.
        CheckpointFormatError: If the header is missing, foreign, from another version,
            or of another kind.
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError(path, "checkpoint")
    try:
        with np.load(path, allow_pickle=False) as archive:
            if HEADER_KEY not in archive.files:
                raise CheckpointFormatError(f"{path}: no header entry")
            header = json.loads(str(archive[HEADER_KEY]))
            arrays = {name: archive[name].astype(np.float64) for name in archive.files if name != HEADER_KEY}
    except (ValueError, OSError) as exc:
        raise CheckpointFormatError(f"{path}: unreadable checkpoint ({exc})") from exc

    if header.get("format") != FORMAT:
        raise CheckpointFormatError(f"{path}: format {header.get('format')!r}, expected {FORMAT!r}")
    if header.get("version") != VERSION:
        raise CheckpointFormatError(f"{path}: version {header.get('version')}, expected {VERSION}")
    if header.get("kind") != kind:
        raise CheckpointFormatError(f"{path}: holds a {header.get('kind')!r} checkpoint, expected {kind!r}")
    return arrays, header.get("meta", {})


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
