"""Run-configuration loading and the input validators shared by the handlers."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

from pydantic import ValidationError

from advstyle_lab.errors import ConfigError
from advstyle_lab.helper.file_utils import PathLike
from advstyle_lab.models import RunConfigFile

logger = logging.getLogger(__name__)

SECTIONS = ("model", "method", "train", "data", "eval")


def _first_error_key(exc: ValidationError, prefix: str = "") -> ConfigError:
    error = exc.errors()[0]
    key = ".".join(str(part) for part in error["loc"])
    key = f"{prefix}{key}" if key else prefix.rstrip(".") or "config"
    return ConfigError(key, error["msg"])


def apply_overrides(document: Dict[str, Any], overrides: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    """
    Set dotted ``section.field`` keys on a raw config document.

    None values are skipped, so unset command-line flags leave file values and
    defaults in place.
    """
    merged = {section: dict(values) for section, values in document.items()}
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, field = dotted.partition(".")
        if section not in SECTIONS or not field:
            raise ConfigError(dotted, "override keys must look like <section>.<field>")
        merged.setdefault(section, {})[field] = value
    return merged


def load_run_config(path: Optional[PathLike] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfigFile:
    """
    Read a RunConfigFile; precedence is override > file value > default.

    Raises:
        ConfigError: Naming the missing path, the malformed file or the first
            invalid key.
    """
    document: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError("--config", f"file not found: {config_path}")
        try:
            document = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(str(config_path), f"invalid JSON: {exc}") from exc
        if not isinstance(document, dict):
            raise ConfigError(str(config_path), "top level must be an object")
    try:
        config = RunConfigFile.model_validate(apply_overrides(document, overrides))
    except ValidationError as exc:
        raise _first_error_key(exc) from exc
    logger.debug("run config %s loaded (hash %s)", path or "<defaults>", config.config_hash())
    return config


def validate_existing_path(path: Optional[PathLike], key: str, directory: bool = False) -> Dict[str, Any]:
    """Validate that ``path`` is given and exists as a file (or directory)."""
    if path is None or str(path).strip() == "":
        return {"valid": False, "error": f"{key}: a path is required"}
    candidate = Path(path)
    exists = candidate.is_dir() if directory else candidate.is_file()
    if not exists:
        kind = "directory" if directory else "file"
        return {"valid": False, "error": f"{key}: {kind} not found: {candidate}"}
    return {"valid": True, "path": candidate}


def validate_seeds(text: Optional[str], default: Iterable[int] = (0,)) -> Dict[str, Any]:
    """Parse ``"0,1,2"`` or ``"0-4"`` into a list of distinct non-negative seeds."""
    if text is None or text.strip() == "":
        return {"valid": True, "seeds": list(default)}
    seeds: List[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                low, high = (int(v) for v in part.split("-", 1))
                seeds.extend(range(low, high + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        return {"valid": False, "error": f"--seeds: cannot parse {text!r}"}
    if not seeds or any(s < 0 for s in seeds) or len(set(seeds)) != len(seeds):
        return {"valid": False, "error": f"--seeds: expected distinct non-negative integers, got {text!r}"}
    return {"valid": True, "seeds": seeds}


def validate_names(names: Iterable[str], available: Iterable[str], key: str) -> Dict[str, Any]:
    """Validate that every requested split exists."""
    available = list(available)
    names = [n.strip() for n in names if n.strip()]
    unknown = [n for n in names if n not in available]
    if not names:
        return {"valid": False, "error": f"{key}: at least one name is required"}
    if unknown:
        return {"valid": False, "error": f"{key}: unknown {unknown}; available {available}"}
    return {"valid": True, "names": names}


def validate_pairs(pairs: Iterable[str], available: Iterable[str]) -> Dict[str, Any]:
    """Validate ``source:target`` split pairs."""
    available = list(available)
    parsed = []
    for pair in pairs:
        source, sep, target = pair.partition(":")
        if not sep or source not in available or target not in available or source == target:
            return {"valid": False, "error": f"--pairs: invalid pair {pair!r}; splits are {available}"}
        parsed.append((source, target))
    if not parsed:
        return {"valid": False, "error": "--pairs: at least one pair is required"}
    return {"valid": True, "pairs": parsed}
