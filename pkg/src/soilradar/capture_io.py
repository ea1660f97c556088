"""Reader and writer for ``.rbt`` capture files.

Layout (all little-endian)::

    b"RBT1"
    u16 version, u32 P, u32 N, u32 metadata_len
    metadata_len bytes of UTF-8 JSON
    P * N complex samples as float32 (real, imag) pairs, frame-major
"""

import json
import struct

import numpy as np

from .radar import FrameCapture, RadarConfig

MAGIC = b"RBT1"
VERSION = 1
_HEADER = struct.Struct("<4sHIII")
_SAMPLE_DTYPE = np.dtype("<c8")


class CorruptCapture(ValueError):
    pass


def encode_capture(capture):
    meta = {
        "radar": capture.config.to_dict(),
        "t0": capture.t0,
        "seed": capture.seed,
        "annotations": capture.annotations,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = _HEADER.pack(MAGIC, VERSION, capture.n_frames, capture.n_bins, len(meta_bytes))
    body = np.ascontiguousarray(capture.samples, dtype=_SAMPLE_DTYPE).tobytes()
    return header + meta_bytes + body


def decode_capture(buf):
    if len(buf) < _HEADER.size:
        raise CorruptCapture("corrupt capture: truncated header")
    magic, version, n_frames, n_bins, meta_len = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise CorruptCapture(f"corrupt capture: bad magic {magic!r}")
    if version != VERSION:
        raise CorruptCapture(f"corrupt capture: unsupported version {version}")
    body_start = _HEADER.size + meta_len
    expected = body_start + n_frames * n_bins * _SAMPLE_DTYPE.itemsize
    if len(buf) != expected:
        raise CorruptCapture(
            f"corrupt capture: expected {expected} bytes for {n_frames}x{n_bins}, got {len(buf)}"
        )
    try:
        meta = json.loads(buf[_HEADER.size:body_start].decode("utf-8"))
        config = RadarConfig.from_dict(meta["radar"])
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise CorruptCapture(f"corrupt capture: bad metadata ({exc})") from exc
    samples = np.frombuffer(buf, dtype=_SAMPLE_DTYPE, count=n_frames * n_bins, offset=body_start)
    samples = samples.reshape(n_frames, n_bins).astype(np.complex128)
    try:
        return FrameCapture(
            samples=samples,
            config=config,
            t0=float(meta.get("t0", 0.0)),
            seed=int(meta.get("seed", 0)),
            annotations=dict(meta.get("annotations", {})),
        )
    except ValueError as exc:
        raise CorruptCapture(f"corrupt capture: {exc}") from exc


def write_capture(path, capture):
    with open(path, "wb") as fh:
        fh.write(encode_capture(capture))


def read_capture(path):
    with open(path, "rb") as fh:
        return decode_capture(fh.read())
