"""Bit-exact little-endian binary formats.

Four formats, each a fixed header followed by a packed payload:

  MVQF  features   magic, version u32, T u32, d u32, frame_rate f32, domain u8,
                   then T*d float32 frames (row-major)
  MVQQ  quantiser  magic, version u32, N u32, K u32, d u32, R u32, then
                   codebooks (N*K*d f32), classifier weights (N*K*d f32),
                   biases (N*K f32)
  MVQT  tokens     magic, version u32, T u32, N u32, K u32, width u8, then
                   T*N tokens as uint8 (K <= 256) or uint16 (row-major)
  MVQM  student    magic, version u32, d_in, d_model, n_blocks, window, N_s,
                   K_s, N_a, K_a (all u32), then f32 arrays in fixed order:
                   mask embedding, projection weight+bias, per-block conv
                   weight+bias, speech heads, audio heads (if N_a > 0)

All integers and floats are little-endian. Values are computed in float64 but
stored as float32, so roundtrips are exact at float32 precision.
"""

from __future__ import annotations

import struct

import numpy as np

from .data import DOMAIN_TAGS, FeatureSequence, TokenSequence
from .errors import BadMagicError, TruncatedFileError, UnsupportedVersionError
from .quantiser import Quantiser
from .selfsup import StudentModel

MAGIC_FEATURES = b"MVQF"
MAGIC_QUANTISER = b"MVQQ"
MAGIC_TOKENS = b"MVQT"
MAGIC_MODEL = b"MVQM"
VERSION = 1

_DOMAIN_CODE = {tag: i for i, tag in enumerate(DOMAIN_TAGS)}
_DOMAIN_NAME = {i: tag for tag, i in _DOMAIN_CODE.items()}

_FEATURE_HEADER = struct.Struct("<4sIIIfB")
_QUANTISER_HEADER = struct.Struct("<4sIIIII")
_TOKEN_HEADER = struct.Struct("<4sIIIIB")
_MODEL_HEADER = struct.Struct("<4sIIIIIIIII")


def _read_exact(data: bytes, magic: bytes, header: struct.Struct, path) -> tuple:
    if len(data) < header.size:
        raise TruncatedFileError(f"{path}: file shorter than header")
    fields = header.unpack_from(data)
    if fields[0] != magic:
        raise BadMagicError(f"{path}: bad magic {fields[0]!r}, expected {magic!r}")
    if fields[1] != VERSION:
        raise UnsupportedVersionError(f"{path}: unknown version {fields[1]}")
    return fields[2:]


def _payload(data: bytes, header: struct.Struct, expected: int, path) -> bytes:
    body = data[header.size:]
    if len(body) != expected:
        raise TruncatedFileError(
            f"{path}: payload is {len(body)} bytes, header declares {expected}")
    return body


def write_features(path, seq: FeatureSequence) -> None:
    t_len, dim = seq.frames.shape
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(MAGIC_FEATURES, VERSION, t_len, dim,
                                      seq.frame_rate_hz, _DOMAIN_CODE[seq.domain_tag]))
        fh.write(np.ascontiguousarray(seq.frames, dtype="<f4").tobytes())


def read_features(path) -> FeatureSequence:
    data = open(path, "rb").read()
    t_len, dim, rate, dom = _read_exact(data, MAGIC_FEATURES, _FEATURE_HEADER, path)
    body = _payload(data, _FEATURE_HEADER, t_len * dim * 4, path)
    if dom not in _DOMAIN_NAME:
        raise TruncatedFileError(f"{path}: unknown domain code {dom}")
    frames = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(t_len, dim)
    return FeatureSequence(frames, float(rate), _DOMAIN_NAME[dom])


def write_quantiser(path, q: Quantiser) -> None:
    n, k, d = q.codebooks.shape
    with open(path, "wb") as fh:
        fh.write(_QUANTISER_HEADER.pack(MAGIC_QUANTISER, VERSION, n, k, d, q.refine_steps))
        for arr in (q.codebooks, q.weights, q.biases):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_quantiser(path) -> Quantiser:
    data = open(path, "rb").read()
    n, k, d, refine = _read_exact(data, MAGIC_QUANTISER, _QUANTISER_HEADER, path)
    body = _payload(data, _QUANTISER_HEADER, (2 * n * k * d + n * k) * 4, path)
    vals = np.frombuffer(body, dtype="<f4").astype(np.float64)
    cb = vals[:n * k * d].reshape(n, k, d)
    w = vals[n * k * d:2 * n * k * d].reshape(n, k, d)
    b = vals[2 * n * k * d:].reshape(n, k)
    return Quantiser(cb, w, b, refine_steps=refine)


def token_width(codebook_size: int) -> int:
    """Bytes per stored token: 1 when K <= 256 (uint8), else 2."""
    return 1 if codebook_size <= 256 else 2


def write_tokens(path, seq: TokenSequence) -> None:
    t_len, n = seq.tokens.shape
    width = token_width(seq.codebook_size)
    dtype = "<u1" if width == 1 else "<u2"
    with open(path, "wb") as fh:
        fh.write(_TOKEN_HEADER.pack(MAGIC_TOKENS, VERSION, t_len, n,
                                    seq.codebook_size, width))
        fh.write(np.ascontiguousarray(seq.tokens, dtype=dtype).tobytes())


def read_tokens(path) -> TokenSequence:
    data = open(path, "rb").read()
    t_len, n, k, width = _read_exact(data, MAGIC_TOKENS, _TOKEN_HEADER, path)
    if width != token_width(k):
        raise TruncatedFileError(f"{path}: token width {width} inconsistent with K={k}")
    body = _payload(data, _TOKEN_HEADER, t_len * n * width, path)
    dtype = "<u1" if width == 1 else "<u2"
    tokens = np.frombuffer(body, dtype=dtype).astype(np.int64).reshape(t_len, n)
    if tokens.size and tokens.max() >= k:
        raise TruncatedFileError(f"{path}: stored token >= K")
    return TokenSequence(tokens, k)


def write_student(path, model: StudentModel) -> None:
    n_a = model.heads_audio.shape[0] if model.heads_audio is not None else 0
    k_a = model.heads_audio.shape[1] if model.heads_audio is not None else 0
    arrays = [model.mask_embedding, model.proj_w, model.proj_b]
    for wc, bc in zip(model.conv_w, model.conv_b):
        arrays += [wc, bc]
    arrays.append(model.heads_speech)
    if model.heads_audio is not None:
        arrays.append(model.heads_audio)
    with open(path, "wb") as fh:
        fh.write(_MODEL_HEADER.pack(
            MAGIC_MODEL, VERSION, model.d_in, model.d_model, model.n_blocks,
            model.window, model.heads_speech.shape[0], model.heads_speech.shape[1],
            n_a, k_a))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_student(path) -> StudentModel:
    data = open(path, "rb").read()
    d_in, d_model, n_blocks, window, n_s, k_s, n_a, k_a = _read_exact(
        data, MAGIC_MODEL, _MODEL_HEADER, path)
    shapes = [(d_in,), (d_model, d_in), (d_model,)]
    for _ in range(n_blocks):
        shapes += [(d_model, window, d_model), (d_model,)]
    shapes.append((n_s, k_s, d_model))
    if n_a:
        shapes.append((n_a, k_a, d_model))
    expected = sum(int(np.prod(s)) for s in shapes) * 4
    body = _payload(data, _MODEL_HEADER, expected, path)
    vals = np.frombuffer(body, dtype="<f4").astype(np.float64)
    arrays = []
    off = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(vals[off:off + size].reshape(shape))
        off += size
    conv_w = [arrays[3 + 2 * i] for i in range(n_blocks)]
    conv_b = [arrays[4 + 2 * i] for i in range(n_blocks)]
    heads_speech = arrays[3 + 2 * n_blocks]
    heads_audio = arrays[4 + 2 * n_blocks] if n_a else None
    return StudentModel(arrays[0], arrays[1], arrays[2], conv_w, conv_b,
                        heads_speech, heads_audio)


def inspect_header(path) -> dict:
    """Header fields of any MVQF/MVQQ/MVQT/MVQM file, keyed by field name."""
    data = open(path, "rb").read()
    if len(data) < 4:
        raise TruncatedFileError(f"{path}: too short to hold a magic")
    magic = data[:4]
    if magic == MAGIC_FEATURES:
        t_len, dim, rate, dom = _read_exact(data, magic, _FEATURE_HEADER, path)
        return {"format": "features", "T": t_len, "d": dim,
                "frame_rate_hz": float(rate),
                "domain": _DOMAIN_NAME.get(dom, f"unknown({dom})")}
    if magic == MAGIC_QUANTISER:
        n, k, d, refine = _read_exact(data, magic, _QUANTISER_HEADER, path)
        return {"format": "quantiser", "N": n, "K": k, "d": d, "refine_steps": refine}
    if magic == MAGIC_TOKENS:
        t_len, n, k, width = _read_exact(data, magic, _TOKEN_HEADER, path)
        return {"format": "tokens", "T": t_len, "N": n, "K": k, "token_bytes": width}
    if magic == MAGIC_MODEL:
        d_in, d_model, n_blocks, window, n_s, k_s, n_a, k_a = _read_exact(
            data, magic, _MODEL_HEADER, path)
        return {"format": "student", "d_in": d_in, "d_model": d_model,
                "n_blocks": n_blocks, "window": window,
                "N_speech": n_s, "K_speech": k_s, "N_audio": n_a, "K_audio": k_a}
    raise BadMagicError(f"{path}: unrecognised magic {magic!r}")
