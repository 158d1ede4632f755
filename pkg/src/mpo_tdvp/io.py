"""Binary container for tensor trains.

Layout (all integers and floats little-endian)::

    magic     4 bytes   b"MPTT"
    version   uint32    1
    rank      uint32    3 (MPS) or 4 (MPO)
    nsites    uint32
    phys      2 x uint32  (d_loc, 0) for rank 3, (d_out, d_in) for rank 4
    bonds     (nsites + 1) x uint64
    payload   per site, the tensor in C order of its index layout
              ((sigma, left, right) or (s, s', left, right)), each complex
              entry as two float64 (real, imaginary)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .mpo import MPO
from .mps import MPS

__all__ = ["dumps_train", "loads_train", "save_train", "load_train"]

_MAGIC = b"MPTT"
_VERSION = 1
_COMPLEX = np.dtype("<c16")


def dumps_train(train) -> bytes:
    if isinstance(train, MPS):
        rank, phys = 3, (train.d_loc, 0)
    elif isinstance(train, MPO):
        rank, phys = 4, tuple(train[0].shape[:2])
    else:
        raise InvalidInputError(f"cannot serialize {type(train).__name__}")
    header = _MAGIC + struct.pack("<IIIII", _VERSION, rank, train.nsites, *phys)
    header += struct.pack(f"<{train.nsites + 1}Q", *train.bond_dims)
    payload = b"".join(np.ascontiguousarray(t, dtype=_COMPLEX).tobytes() for t in train.tensors)
    return header + payload


def loads_train(data: bytes):
    if data[:4] != _MAGIC:
        raise InvalidInputError("not a tensor-train container (bad magic)")
    version, rank, nsites, p0, p1 = struct.unpack_from("<IIIII", data, 4)
    if version != _VERSION:
        raise InvalidInputError(f"unsupported container version {version}")
    if rank not in (3, 4):
        raise InvalidInputError(f"unsupported tensor rank {rank}")
    offset = 4 + 20
    bonds = struct.unpack_from(f"<{nsites + 1}Q", data, offset)
    offset += 8 * (nsites + 1)
    tensors = []
    for n in range(nsites):
        phys = (p0,) if rank == 3 else (p0, p1)
        shape = phys + (bonds[n], bonds[n + 1])
        count = int(np.prod(shape))
        end = offset + count * _COMPLEX.itemsize
        if end > len(data):
            raise InvalidInputError("truncated tensor-train container")
        tensors.append(np.frombuffer(data, dtype=_COMPLEX, count=count, offset=offset)
                       .reshape(shape).astype(np.complex128))
        offset = end
    if offset != len(data):
        raise InvalidInputError("trailing bytes after tensor-train payload")
    return MPS(tensors) if rank == 3 else MPO(tensors)


def save_train(path, train) -> None:
    Path(path).write_bytes(dumps_train(train))


def load_train(path):
    return loads_train(Path(path).read_bytes())
