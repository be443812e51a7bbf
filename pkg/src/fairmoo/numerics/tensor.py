"""Dense float64 tensors: on-disk dump format and flat parameter vectors."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


def as_tensor(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64))


def save_tensor(directory: str | Path, name: str, arr: np.ndarray) -> Path:
    """Write ``<name>.f64`` (raw little-endian, row-major) plus a ``<name>.json`` sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arr = as_tensor(arr)
    path = directory / f"{name}.f64"
    path.write_bytes(arr.astype("<f8").tobytes(order="C"))
    meta = {"shape": list(arr.shape), "dtype": "f64", "order": "row-major"}
    (directory / f"{name}.json").write_text(json.dumps(meta))
    return path


def load_tensor(directory: str | Path, name: str) -> np.ndarray:
    directory = Path(directory)
    meta = json.loads((directory / f"{name}.json").read_text())
    if meta.get("dtype") != "f64" or meta.get("order") != "row-major":
        raise ValueError(f"unsupported tensor sidecar for {name}: {meta}")
    shape = tuple(int(s) for s in meta["shape"])
    data = np.frombuffer((directory / f"{name}.f64").read_bytes(), dtype="<f8")
    if data.size != int(np.prod(shape, dtype=np.int64)):
        raise ValueError(f"{name}: {data.size} values do not fill shape {shape}")
    return data.reshape(shape).astype(np.float64)


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


class ParamVector:
    """Named parameter arrays laid out back to back in one flat float64 vector.

    Segments tile ``data`` exactly in the order they were given.
    """

    def __init__(self, segments: Iterable[Segment], data: np.ndarray):
        self.segments = tuple(segments)
        self.data = as_tensor(data).reshape(-1)
        offset = 0
        for seg in self.segments:
            if seg.offset != offset:
                raise ValueError(f"segment {seg.name!r} at offset {seg.offset}, expected {offset}")
            offset += seg.size
        if offset != self.data.size:
            raise ValueError(f"segments cover {offset} values but data has {self.data.size}")

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> ParamVector:
        segments, chunks, offset = [], [], 0
        for name, arr in arrays.items():
            arr = as_tensor(arr)
            segments.append(Segment(name, offset, tuple(arr.shape)))
            chunks.append(arr.reshape(-1))
            offset += arr.size
        data = np.concatenate(chunks) if chunks else np.zeros(0)
        return cls(segments, data)

    def with_data(self, data: np.ndarray) -> ParamVector:
        return ParamVector(self.segments, data)

    def arrays(self) -> dict[str, np.ndarray]:
        # copies, so callers cannot mutate the flat vector through a view
        return {
            s.name: self.data[s.offset : s.offset + s.size].reshape(s.shape).copy()
            for s in self.segments
        }

    def __getitem__(self, name: str) -> np.ndarray:
        for s in self.segments:
            if s.name == name:
                return self.data[s.offset : s.offset + s.size].reshape(s.shape).copy()
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.segments]

    @property
    def size(self) -> int:
        return self.data.size

    def __len__(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"ParamVector({', '.join(f'{s.name}{list(s.shape)}' for s in self.segments)})"
