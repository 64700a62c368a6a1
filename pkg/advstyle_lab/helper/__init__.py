"""Helper utilities for the advstyle laboratory."""

from .advt_utils import read_archive, read_tensor, write_archive, write_tensor
from .file_utils import atomic_write_bytes, atomic_write_text
from .json_utils import compact_json_response, create_response

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "compact_json_response",
    "create_response",
    "read_archive",
    "read_tensor",
    "write_archive",
    "write_tensor",
]
