"""
Tensor container: one JSON header line {"shape": [...], "dtype": "f64"}
followed by the row-major little-endian payload. "f32" is accepted for
inference dumps.
"""
import io
import json
import os

import numpy as np

from dataclasses import dataclass, field
from typing import List, Union

DTYPE_CODES = {"f64": np.dtype("<f8"), "f32": np.dtype("<f4")}


@dataclass
class TensorHeader:
    shape: List[int] = field(default_factory=list)
    dtype: str = "f64"

    @property
    def numel(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def payload_size(self) -> int:
        return self.numel * DTYPE_CODES[self.dtype].itemsize

    def to_byte_stream(self) -> bytes:
        return (json.dumps({"shape": [int(s) for s in self.shape], "dtype": self.dtype}) + "\n").encode("utf-8")

    @classmethod
    def from_byte_stream(cls, line: bytes):
        try:
            doc = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ValueError(f"Malformed tensor header: {line[:64]!r}") from e
        if set(doc) != {"shape", "dtype"} or doc["dtype"] not in DTYPE_CODES:
            raise ValueError(f"Unsupported tensor header: {doc}")
        return cls(shape=[int(s) for s in doc["shape"]], dtype=doc["dtype"])


def tensor_to_byte_stream(array: np.ndarray, dtype: str = "f64") -> bytes:
    if dtype not in DTYPE_CODES:
        raise ValueError(f"Unknown container dtype {dtype!r}")
    array = np.asarray(array)
    header = TensorHeader(shape=list(array.shape), dtype=dtype)
    return header.to_byte_stream() + np.ascontiguousarray(array, dtype=DTYPE_CODES[dtype]).tobytes()


def tensor_from_byte_stream(byte_stream: bytes) -> np.ndarray:
    read_buff = io.BytesIO(byte_stream)
    header = TensorHeader.from_byte_stream(read_buff.readline())
    payload = read_buff.read()
    if len(payload) != header.payload_size:
        raise ValueError(f"Tensor payload has {len(payload)} bytes, header promises {header.payload_size}")
    arr = np.frombuffer(payload, dtype=DTYPE_CODES[header.dtype]).reshape(header.shape)
    return arr.astype(np.float64 if header.dtype == "f64" else np.float32)


def save_tensor(path: Union[str, os.PathLike], array: np.ndarray, dtype: str = "f64") -> None:
    with open(path, "wb") as op:
        op.write(tensor_to_byte_stream(array, dtype))


def load_tensor(path: Union[str, os.PathLike]) -> np.ndarray:
    with open(path, "rb") as ip:
        return tensor_from_byte_stream(ip.read())


__all__ = ["TensorHeader", "tensor_to_byte_stream", "tensor_from_byte_stream", "save_tensor", "load_tensor"]
