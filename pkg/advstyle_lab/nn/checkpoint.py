"""Save and restore MiniNet weights as an ADVT archive."""

import json
import logging

import numpy as np

from advstyle_lab.errors import ConfigError
from advstyle_lab.helper.advt_utils import read_archive, write_archive
from advstyle_lab.helper.file_utils import PathLike
from advstyle_lab.models import MethodConfig, ModelSpec
from advstyle_lab.nn.mininet import MiniNet

logger = logging.getLogger(__name__)

HEADER = "__header__"


def save_checkpoint(model: MiniNet, path: PathLike) -> None:
    """
    Write a header record (spec, method config, dtype) followed by every
    registered tensor in registration order.
    """
    header = {
        "model": model.spec.model_dump(mode="json"),
        "method": model.method_config.model_dump(mode="json"),
        "dtype": model.dtype_name,
    }
    records = [(HEADER, json.dumps(header, sort_keys=True))]
    records.extend((entry.name, entry.tensor.data) for entry in model.registry)
    write_archive(path, records)
    logger.debug("checkpoint written to %s (%d tensors)", path, len(records) - 1)


def load_checkpoint(path: PathLike) -> MiniNet:
    """
    Rebuild a MiniNet from an archive written by save_checkpoint.

    Raises:
        ConfigError: If the archive has no header or its tensors do not match
            the architecture the header describes.
    """
    records = read_archive(path)
    header = records.pop(HEADER, None)
    if not isinstance(header, str):
        raise ConfigError("checkpoint", f"{path} has no {HEADER} record")
    meta = json.loads(header)
    model = MiniNet(
        ModelSpec.model_validate(meta["model"]),
        seed=0,
        method_config=MethodConfig.model_validate(meta["method"]),
        dtype=meta["dtype"],
    )
    state = {name: np.asarray(value) for name, value in records.items()}
    try:
        model.registry.load_state(state)
    except ValueError as exc:
        raise ConfigError("checkpoint", str(exc)) from exc
    return model
