"""
JSON utilities for compact, deterministic serialization.
"""

import json
from typing import Any, Dict, Optional


def compact_json_response(data: Dict[str, Any]) -> str:
    """
    Convert a Python dictionary to a compact JSON string with no newlines or extra spaces.

    Keys are sorted so that identical inputs always produce identical bytes.

    Args:
        data: Python dictionary to serialize

    Returns:
        Compact JSON string with minimal formatting
    """
    return json.dumps(data, separators=(",", ":"), sort_keys=True)


def create_response(
    success: bool,
    message: str,
    data: Optional[Dict[str, Any]] = None,
    exit_code: Optional[int] = None,
) -> Dict[str, Any]:
    """
    Create the response envelope every command handler returns.

    Args:
        success: Whether the operation was successful
        message: Response message
        data: Optional data dictionary
        exit_code: Process exit code; defaults to 0 on success and 2 otherwise

    Returns:
        Response dictionary with success, message, exit_code and optional data
    """
    response: Dict[str, Any] = {
        "success": success,
        "message": message,
        "exit_code": exit_code if exit_code is not None else (0 if success else 2),
    }

    if data:
        response["data"] = data

    return response

