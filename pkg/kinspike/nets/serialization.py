"""
Model file envelope.

A model file is JSON: {format_version, spec, training_config, metrics,
tensors}. Every tensor is stored as base64 of its little-endian float64
bytes with an explicit shape, so a load reproduces the parameters bit-exactly.
"""

import base64
import json
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from kinspike.errors import DependencyError, FormatError, SchemaError
from kinspike.nets.layers import Params
from kinspike.nets.models import network_for
from kinspike.nets.spec import ModelSpec

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_DTYPE = "<f8"


def encode_tensor(arr: np.ndarray) -> Dict:
    arr = np.ascontiguousarray(arr, dtype=_DTYPE)
    return {"shape": list(arr.shape), "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def decode_tensor(name: str, record: Dict) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in record["shape"])
        raw = base64.b64decode(record["data"], validate=True)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"tensor {name} is malformed: {e}") from e
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise FormatError(f"tensor {name} holds {len(raw)} bytes, shape {shape} needs {expected}")
    return np.frombuffer(raw, dtype=_DTYPE).reshape(shape).astype(np.float64)


def write_envelope(envelope: Dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(envelope, f, indent=2)
        f.write("\n")
    return path


def read_envelope(path, command: str) -> Dict:
    path = Path(path)
    if not path.exists():
        raise DependencyError(str(path), command)
    try:
        with open(path) as f:
            envelope = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"corrupt model file {path}: {e}") from e
    if not isinstance(envelope, dict) or envelope.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {envelope.get('format_version') if isinstance(envelope, dict) else None}")
    return envelope


def save(spec: ModelSpec, params: Params, path, training_config: Optional[Dict] = None,
         metrics: Optional[Dict] = None, extra: Optional[Dict] = None) -> Path:
    """Write a model file; tensors in network order."""
    network_for(spec).check_params(params)
    names = list(network_for(spec).all_shapes())
    envelope = {
        "format_version": FORMAT_VERSION,
        "spec": spec.to_dict(),
        "training_config": training_config or {},
        "metrics": metrics or {},
        "tensors": {name: encode_tensor(params[name]) for name in names},
    }
    if extra:
        envelope.update(extra)
    path = write_envelope(envelope, path)
    logger.info(f"Saved {spec.kind.value} model to {path}")
    return path


def load(path) -> Tuple[ModelSpec, Params, Dict]:
    """
    Read a model file.

    Returns:
        (spec, params, envelope)

    Raises:
        FormatError: corrupt file, wrong version, or tensor shapes that do not match the architecture
    """
    envelope = read_envelope(path, "train")
    try:
        spec = ModelSpec.from_dict(envelope["spec"])
        records = envelope["tensors"]
    except (KeyError, SchemaError) as e:
        raise FormatError(f"{path}: invalid model header: {e}") from e

    params = {name: decode_tensor(name, record) for name, record in records.items()}
    try:
        network_for(spec).check_params(params)
    except SchemaError as e:
        raise FormatError(f"{path}: {e}") from e
    extra = set(params) - set(network_for(spec).all_shapes())
    if extra:
        raise FormatError(f"{path}: unexpected tensors {sorted(extra)}")
    return spec, params, envelope
