"""Atomic file writes: temp file in the target directory, then rename."""

import os
import tempfile
from pathlib import Path
from typing import Union

PathLike = Union[str, os.PathLike]


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """
    Write ``payload`` to ``path`` so readers never observe a partial file.

    Args:
        path: Destination file; parent directories are created.
        payload: Bytes to write.

    Returns:
        The destination as a Path.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Text variant of atomic_write_bytes, always UTF-8 with LF newlines."""
    return atomic_write_bytes(path, text.encode("utf-8"))
