"""
Versioned binary archive of a ParamStore.

Layout, all integers little-endian u32 unless noted:
    magic 'MLKP' | version | entry count
    per entry: name length | UTF-8 name | dtype tag (u8) | rank | dims... | payload
The payload is the tensor in row-major order as little-endian scalars.
"""
import os
import struct
import numpy as np
from typing import Dict, List, Tuple

from app.constants import DTYPE_TAGS, WEIGHTS_FORMAT_VERSION, WEIGHTS_MAGIC
from app.context import context
from app.core import ParamStore
from app.exceptions import (
    BadMagicError, ParameterNameMismatchError, TruncatedArchiveError, UnsupportedVersionError, WeightArchiveError,
)
from app.utils.utils import create_logger

weights_log = create_logger(__name__, entity_name='WEIGHTS', level=context.log_level)

U32 = struct.Struct('<I')
U8 = struct.Struct('<B')
TAG_DTYPES = {tag: np.dtype(name) for name, tag in DTYPE_TAGS.items()}


def encode_weights(store: ParamStore) -> bytes:
    tag = DTYPE_TAGS.get(store.dtype.name)
    if tag is None:
        raise WeightArchiveError(f"Cannot archive parameters of dtype {store.dtype}")
    little = store.dtype.newbyteorder('<')
    chunks = [WEIGHTS_MAGIC, U32.pack(WEIGHTS_FORMAT_VERSION), U32.pack(len(store))]
    for name, array in store.items():
        encoded = name.encode('utf-8')
        chunks.append(U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(U8.pack(tag))
        chunks.append(U32.pack(array.ndim))
        chunks.extend(U32.pack(dim) for dim in array.shape)
        chunks.append(np.ascontiguousarray(array, dtype=little).tobytes())
    return b''.join(chunks)


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.position = 0

    def read(self, size: int, what: str) -> bytes:
        end = self.position + size
        if end > len(self.data):
            raise TruncatedArchiveError(
                f"'{self.path}' ends at byte {len(self.data)} while reading {what} ({size} bytes at {self.position})"
            )
        chunk = self.data[self.position:end]
        self.position = end
        return chunk

    def u32(self, what: str) -> int:
        return U32.unpack(self.read(U32.size, what))[0]

    def u8(self, what: str) -> int:
        return U8.unpack(self.read(U8.size, what))[0]


def decode_weights(data: bytes, path: str = '<bytes>') -> ParamStore:
    if data[:len(WEIGHTS_MAGIC)] != WEIGHTS_MAGIC:
        raise BadMagicError(f"'{path}' is not a weight archive (magic {data[:len(WEIGHTS_MAGIC)]!r})")
    reader = _Reader(data, path)
    reader.read(len(WEIGHTS_MAGIC), 'magic')
    version = reader.u32('format version')
    if version != WEIGHTS_FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"'{path}' has format version {version}, only version {WEIGHTS_FORMAT_VERSION} is supported"
        )
    count = reader.u32('entry count')

    entries: List[Tuple[str, np.ndarray]] = []
    seen = set()
    for index in range(count):
        name_bytes = reader.read(reader.u32(f"name length of entry {index}"), f"name of entry {index}")
        try:
            name = name_bytes.decode('utf-8')
        except UnicodeDecodeError as e:
            raise WeightArchiveError(f"'{path}': entry {index} name is not UTF-8") from e
        if name in seen:
            raise WeightArchiveError(f"'{path}': duplicate parameter '{name}'")
        seen.add(name)
        tag = reader.u8(f"dtype tag of '{name}'")
        if tag not in TAG_DTYPES:
            raise WeightArchiveError(f"'{path}': parameter '{name}' has unknown dtype tag {tag}")
        dtype = TAG_DTYPES[tag].newbyteorder('<')
        rank = reader.u32(f"rank of '{name}'")
        shape = tuple(reader.u32(f"dimension {axis} of '{name}'") for axis in range(rank))
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        payload = reader.read(size, f"payload of '{name}'")
        entries.append((name, np.frombuffer(payload, dtype=dtype).reshape(shape)))
    if reader.position != len(data):
        raise WeightArchiveError(f"'{path}' has {len(data) - reader.position} trailing bytes after {count} entries")

    dtypes = {array.dtype.name for _, array in entries}
    if len(dtypes) > 1:
        raise WeightArchiveError(f"'{path}' mixes parameter dtypes {sorted(dtypes)}")
    store = ParamStore(dtypes.pop() if dtypes else np.float64)
    for name, array in entries:
        store.add(name, array)
    return store

def save_weights(store: ParamStore, path: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, 'wb') as file:
        file.write(encode_weights(store))
    weights_log.info(f"Saved {len(store)} parameter tensors ({store.num_scalars()} scalars) to {path}")

def load_weights(path: str) -> ParamStore:
    try:
        with open(path, 'rb') as file:
            data = file.read()
    except OSError as e:
        raise WeightArchiveError(f"Cannot read weight archive '{path}': {e.strerror or e}") from e
    return decode_weights(data, path)

def name_diff(expected: ParamStore, loaded: ParamStore) -> Dict[str, List[str]]:
    return {
        'missing': sorted(set(expected.names()) - set(loaded.names())),
        'unexpected': sorted(set(loaded.names()) - set(expected.names())),
    }

def load_weights_into(store: ParamStore, path: str) -> None:
    """Overwrites every parameter of `store` from the archive; names and shapes must match exactly."""
    loaded = load_weights(path)
    diff = name_diff(store, loaded)
    if diff['missing'] or diff['unexpected']:
        raise ParameterNameMismatchError(diff['missing'], diff['unexpected'])
    for name, array in loaded.items():
        if store[name].shape != array.shape:
            raise WeightArchiveError(f"Parameter '{name}' has shape {array.shape} in '{path}', model expects {store[name].shape}")
        store.set(name, array.astype(store.dtype))
    weights_log.debug(f"Loaded {len(loaded)} parameter tensors from {path}")
