"""Named parameter store with Adam state and checkpoint serialization.

Checkpoint layout: one line of JSON (names, shapes, step counter, config
hash, plus any caller extras), a newline, then the parameter arrays
concatenated in header order as IEEE 754 single-precision little-endian.
"""

import hashlib
import json
import math

import numpy as np

from .autodiff import Tensor
from .errors import DataError, NumericalError

CHECKPOINT_FORMAT = "sourcetrace-checkpoint-v1"


class ParamStore:
    """Ordered map of name -> parameter tensor plus Adam moment buffers."""

    def __init__(self):
        self._entries = {}
        self.t = 0

    def add(self, name, value):
        if name in self._entries:
            raise ValueError(f"duplicate parameter {name!r}")
        tensor = Tensor(np.array(value, dtype=np.float64))
        self._entries[name] = {
            "tensor": tensor,
            "m": np.zeros_like(tensor.data),
            "v": np.zeros_like(tensor.data),
        }
        return tensor

    def __getitem__(self, name):
        return self._entries[name]["tensor"]

    def __contains__(self, name):
        return name in self._entries

    def names(self):
        return list(self._entries)

    def tensors(self):
        return {name: e["tensor"] for name, e in self._entries.items()}

    def n_params(self):
        return sum(e["tensor"].data.size for e in self._entries.values())

    def zero_grads(self):
        for e in self._entries.values():
            e["tensor"].grad = None

    def state_arrays(self):
        """Copies of the current parameter values, keyed by name."""
        return {name: e["tensor"].data.copy() for name, e in self._entries.items()}

    def load_state_arrays(self, arrays):
        for name, e in self._entries.items():
            src = np.asarray(arrays[name], dtype=np.float64)
            if src.shape != e["tensor"].data.shape:
                raise DataError(
                    f"shape mismatch for {name!r}: {src.shape} vs {e['tensor'].data.shape}"
                )
            e["tensor"].data[...] = src


def glorot_uniform(rng, shape, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def adam_step(store, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update with bias correction; increments the step counter."""
    store.t += 1
    t = store.t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, e in store._entries.items():
        g = e["tensor"].grad
        if g is None:
            g = np.zeros_like(e["tensor"].data)
        elif not np.all(np.isfinite(g)):
            raise NumericalError(f"diverged: non-finite gradient for parameter {name!r}")
        e["m"] *= beta1
        e["m"] += (1.0 - beta1) * g
        e["v"] *= beta2
        e["v"] += (1.0 - beta2) * np.square(g)
        mhat = e["m"] / c1
        vhat = e["v"] / c2
        e["tensor"].data -= lr * mhat / (np.sqrt(vhat) + eps)
    return store


def config_hash(config_dict):
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_checkpoint(store, path, extra_header=None):
    header = {
        "format": CHECKPOINT_FORMAT,
        "names": store.names(),
        "shapes": [list(store[n].data.shape) for n in store.names()],
        "step": store.t,
    }
    if extra_header:
        header.update(extra_header)
    payload = b"".join(
        store[n].data.astype("<f4").tobytes() for n in store.names()
    )
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode())
        fh.write(b"\n")
        fh.write(payload)


def read_checkpoint(path):
    """Parse a checkpoint file into (header dict, name -> float64 array)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise DataError("corrupt checkpoint: missing header terminator")
    try:
        header = json.loads(raw[:nl].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError("corrupt checkpoint: unreadable header") from exc
    if header.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"unsupported checkpoint format {header.get('format')!r}")
    payload = raw[nl + 1 :]
    arrays = {}
    offset = 0
    for name, shape in zip(header["names"], header["shapes"]):
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise DataError("corrupt checkpoint: truncated payload")
        arrays[name] = (
            np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset += nbytes
    if offset != len(payload):
        raise DataError("corrupt checkpoint: trailing bytes")
    return header, arrays
