"""Binary container for transitions (an ``.npz`` archive with a JSON manifest) and JSON-safe runtime state."""
import base64
import io
import json
from typing import Any, Mapping

import numpy as np

from core.errors import CheckpointError
from core.types import Transition

FORMAT_VERSION = 1
_MANIFEST_KEY = "__manifest__"
_ARRAY_KEY = "__ndarray__"
_RNG_KEY = "__rng__"


def encode_transition(t: Transition) -> bytes:
    """Serialize a transition; arrays keep their dtype so the round trip is bit-exact."""
    arrays = {f"obs.{name}": np.asarray(value) for name, value in t.observation.items()}
    arrays["action"] = np.asarray(t.action)
    arrays["reward"] = np.asarray(t.reward, dtype=np.float64)
    manifest = {
        "format_version": FORMAT_VERSION,
        "modalities": sorted(t.observation),
        "action_is_index": isinstance(t.action, int),
        "is_first": t.is_first,
        "is_last": t.is_last,
    }
    arrays[_MANIFEST_KEY] = np.frombuffer(json.dumps(manifest, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    return buffer.getvalue()


def decode_transition(data: bytes) -> Transition:
    """Inverse of :func:`encode_transition`.

    Raises:
        CheckpointError: If the container is malformed or from a newer format.
    """
    try:
        with np.load(io.BytesIO(data), allow_pickle=False) as archive:
            manifest = json.loads(archive[_MANIFEST_KEY].tobytes().decode("utf-8"))
            if manifest.get("format_version") != FORMAT_VERSION:
                raise CheckpointError(f"unsupported transition format {manifest.get('format_version')}")
            observation = {name: archive[f"obs.{name}"] for name in manifest["modalities"]}
            action = archive["action"]
            reward = float(archive["reward"])
    except (OSError, KeyError, ValueError) as e:
        raise CheckpointError(f"corrupt transition container: {e}") from e
    if manifest["action_is_index"]:
        action = int(action)
    return Transition(
        observation=observation,
        action=action,
        reward=reward,
        is_first=manifest["is_first"],
        is_last=manifest["is_last"],
    )


def encode_state(value: Any) -> Any:
    """Turn runtime state into JSON-safe values; arrays and generators survive bit-exactly.

    Arrays become base64 of their raw bytes with dtype and shape, numpy
    generators become their bit-generator state. Tuples come back as lists.
    """
    if isinstance(value, np.random.Generator):
        return {_RNG_KEY: value.bit_generator.state}
    if isinstance(value, np.ndarray):
        data = np.ascontiguousarray(value)
        return {
            _ARRAY_KEY: base64.b64encode(data.tobytes()).decode("ascii"),
            "dtype": data.dtype.str,
            "shape": list(data.shape),
        }
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Mapping):
        return {str(k): encode_state(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode_state(v) for v in value]
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise CheckpointError(f"cannot serialize state of type {type(value).__name__}")


def decode_state(value: Any) -> Any:
    """Inverse of :func:`encode_state`."""
    if isinstance(value, dict):
        if _RNG_KEY in value:
            rng = np.random.default_rng()
            rng.bit_generator.state = value[_RNG_KEY]
            return rng
        if _ARRAY_KEY in value:
            raw = base64.b64decode(value[_ARRAY_KEY])
            return np.frombuffer(raw, dtype=np.dtype(value["dtype"])).reshape(value["shape"]).copy()
        return {k: decode_state(v) for k, v in value.items()}
    if isinstance(value, list):
        return [decode_state(v) for v in value]
    return value
