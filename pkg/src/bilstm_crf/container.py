"""Binary model container.

Layout (all integers little-endian)::

    magic      8 bytes   b"BLSTMCRF"
    version    u32
    crc32      u32       of everything after this field
    length     u64       payload byte count
    payload:
      header   u32 length + UTF-8 JSON (tag classes, vocabulary,
               hyperparameters, tensor manifest)
      tensors  raw little-endian data in manifest order
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .corpus import TagSet
from .crf import CrfParams
from .embeddings import EmbeddingTable, Vocabulary
from .errors import (BadMagicError, ChecksumError, ConfigError, ModelFormatError,
                     TruncatedModelError, VersionMismatchError)
from .model import ModelParams
from .network import BiLstmParams, LstmCellParams
from .training import HyperParams

MAGIC = b"BLSTMCRF"
VERSION = 1
_PREFIX = struct.Struct("<8sIIQ")
_DTYPES = {"f8": np.dtype("<f8"), "u1": np.dtype("u1")}


def _tensors(model):
    out = [("embeddings.pretrained", model.embeddings.pretrained.astype("u1"))]
    out += [(name, arr) for name, arr in model.arrays().items()]
    return out


def dumps(model):
    tensors = _tensors(model)
    manifest = []
    blobs = []
    for name, arr in tensors:
        code = "u1" if arr.dtype == np.uint8 else "f8"
        data = np.ascontiguousarray(arr, dtype=_DTYPES[code])
        manifest.append({"name": name, "dtype": code, "shape": list(data.shape)})
        blobs.append(data.tobytes())
    header = json.dumps({
        "classes": list(model.tagset.classes),
        "vocab": model.vocab.tokens,
        "hparams": model.hparams.to_dict(),
        "tensors": manifest,
    }, ensure_ascii=False).encode("utf-8")
    payload = struct.pack("<I", len(header)) + header + b"".join(blobs)
    return _PREFIX.pack(MAGIC, VERSION, zlib.crc32(payload), len(payload)) + payload


def loads(data):
    if len(data) < _PREFIX.size:
        raise TruncatedModelError("file too short for a model container header")
    magic, version, crc, length = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError("not a model container (bad magic)")
    if version != VERSION:
        raise VersionMismatchError(f"container version {version}, this build reads {VERSION}")
    payload = data[_PREFIX.size:]
    if len(payload) < length:
        raise TruncatedModelError(f"payload truncated: {len(payload)} of {length} bytes")
    if len(payload) > length:
        raise ModelFormatError("trailing bytes after payload")
    if zlib.crc32(payload) != crc:
        raise ChecksumError("payload checksum mismatch")

    (hlen,) = struct.unpack_from("<I", payload)
    header = json.loads(payload[4:4 + hlen].decode("utf-8"))
    offset = 4 + hlen
    arrays = {}
    for entry in header["tensors"]:
        dtype = _DTYPES[entry["dtype"]]
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if offset + n > len(payload):
            raise TruncatedModelError(f"tensor {entry['name']} runs past end of payload")
        arrays[entry["name"]] = np.frombuffer(payload, dtype, count=n // dtype.itemsize,
                                              offset=offset).reshape(shape).copy()
        offset += n
    if offset != len(payload):
        raise ModelFormatError("payload size disagrees with tensor manifest")

    try:
        hp = HyperParams(**header["hparams"])
        table = EmbeddingTable(arrays["embeddings"].astype(np.float64),
                               arrays["embeddings.pretrained"].astype(bool))
        bilstm = BiLstmParams(
            LstmCellParams(arrays["fw.W"], arrays["fw.U"], arrays["fw.b"]),
            LstmCellParams(arrays["bw.W"], arrays["bw.U"], arrays["bw.b"]),
            arrays["proj.W"], arrays["proj.b"])
        return ModelParams(TagSet(tuple(header["classes"])), Vocabulary(header["vocab"]),
                           table, bilstm, CrfParams(arrays["crf.transitions"]), hp)
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise ModelFormatError(f"inconsistent model container: {exc}") from None


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())


def models_equal(a, b):
    """Bit-exact equality of every tensor plus metadata."""
    if (a.tagset != b.tagset or a.vocab != b.vocab or a.hparams != b.hparams):
        return False
    ta, tb = dict(_tensors(a)), dict(_tensors(b))
    return ta.keys() == tb.keys() and all(
        ta[k].shape == tb[k].shape and ta[k].tobytes() == tb[k].tobytes() for k in ta)
