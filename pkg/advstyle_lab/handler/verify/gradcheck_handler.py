import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from advstyle_lab.helper.file_utils import atomic_write_text
from advstyle_lab.helper.gradcheck_utils import SCOPES, run_scope, summarize
from advstyle_lab.helper.json_utils import create_response

logger = logging.getLogger(__name__)


def validate_scope(scope: str) -> Dict[str, Any]:
    if scope not in SCOPES:
        return {"valid": False, "error": f"--scope: expected one of {list(SCOPES)}, got {scope!r}"}
    return {"valid": True}


def gradcheck_handler(
    scope: str,
    eps: float = 1e-6,
    rtol: float = 1e-4,
    out: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Run a gradient-check suite; any failing check makes the command fail.

    Args:
        scope: ``ops``, ``advstyle`` or ``backbone``.
        eps: Finite-difference step.
        rtol: Maximum relative error allowed.
        out: Optional path for the full per-check reports (JSON).

    Returns:
        Response dict with the suite summary; exit code 2 when a check fails.
    """
    validation = validate_scope(scope)
    if not validation["valid"]:
        return create_response(False, validation["error"], exit_code=1)
    if eps <= 0 or rtol <= 0:
        return create_response(False, "--eps and --rtol must be positive", exit_code=1)

    try:
        reports = run_scope(scope, eps=eps, rtol=rtol)
        if out:
            payload = [r.model_dump(mode="json") for r in reports]
            atomic_write_text(Path(out), json.dumps(payload, sort_keys=True) + "\n")
    except Exception as exc:
        logger.exception("gradcheck failed to run")
        return create_response(False, f"Error running gradcheck: {exc}")

    summary = summarize(reports)
    summary["scope"] = scope
    if summary["failed"]:
        return create_response(
            False, f"{len(summary['failed'])} of {summary['checks']} gradient checks failed", summary
        )
    return create_response(True, f"All {summary['checks']} gradient checks passed", summary)
