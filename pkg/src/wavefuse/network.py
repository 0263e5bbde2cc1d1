"""Network assembly: shallow feature extractor, N cascaded frequency-enhance
blocks, the fusion/reconstruction head, and weight (de)serialization.

Weights live in a flat name -> float64 array map validated against the schema
implied by the configuration. The binary container is versioned, little-endian
and CRC-protected (see save_weights).
"""

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import (
    AttentionParams,
    CbamParams,
    cross_modal_attention,
    frequency_interaction,
)
from .errors import FormatError, ShapeError
from .imageio import from_tensor, to_tensor
from .wavelet import dwt2, iwt2, pack_high, unpack

MAGIC = b"WFW1"
VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    channels: int = 16
    blocks: int = 4
    window: int = 8
    heads: int = 4
    reduction: int = 4
    mlp_ratio: int = 2
    slope: float = 0.1
    cross_route: str = "qv"  # "qv": queries/values cross modalities, "k": keys
    final_activation: str = "linear"  # or "leaky"

    def __post_init__(self):
        if self.channels % self.heads:
            raise ShapeError(
                f"channels {self.channels} not divisible by heads {self.heads}"
            )
        if self.channels % self.reduction:
            raise ShapeError(
                f"channels {self.channels} not divisible by reduction "
                f"{self.reduction}"
            )
        if self.blocks < 1:
            raise ShapeError(f"need at least one block, got {self.blocks}")
        if self.cross_route not in ("qv", "k"):
            raise ValueError(f"unknown cross_route {self.cross_route!r}")
        if self.final_activation not in ("linear", "leaky"):
            raise ValueError(f"unknown final_activation {self.final_activation!r}")


def weight_schema(cfg):
    """Map every parameter name to its required shape."""
    c, r, mr = cfg.channels, cfg.reduction, cfg.mlp_ratio
    schema = {}
    for m in (1, 2):
        for layer, cin in ((1, 1), (2, c), (3, c)):
            schema[f"fe{m}.{layer}.weight"] = (c, cin, 3, 3)
            schema[f"fe{m}.{layer}.bias"] = (c,)
    for i in range(cfg.blocks):
        for m in (1, 2):
            p = f"block{i}.s{m}"
            schema[f"{p}.ln1.gain"] = (c,)
            schema[f"{p}.ln1.shift"] = (c,)
            for band in ("low", "high"):
                for proj in ("wq", "wk", "wv", "wo"):
                    schema[f"{p}.attn.{band}.{proj}"] = (c, c)
            schema[f"{p}.cbam.ca_w1"] = (c // r, c)
            schema[f"{p}.cbam.ca_w2"] = (c, c // r)
            schema[f"{p}.cbam.sa_w"] = (1, 2, 7, 7)
            schema[f"{p}.cbam.sa_b"] = (1,)
            schema[f"{p}.ln2.gain"] = (c,)
            schema[f"{p}.ln2.shift"] = (c,)
            schema[f"{p}.mlp.w1"] = (mr * c, c)
            schema[f"{p}.mlp.b1"] = (mr * c,)
            schema[f"{p}.mlp.w2"] = (c, mr * c)
            schema[f"{p}.mlp.b2"] = (c,)
    for layer, cin, cout in ((1, 2 * c, c), (2, c, c), (3, c, 1)):
        schema[f"fuse.{layer}.weight"] = (cout, cin, 3, 3)
        schema[f"fuse.{layer}.bias"] = (cout,)
    return schema


def validate_weights(weights, cfg):
    """Reject unknown, missing, or mis-shaped entries."""
    schema = weight_schema(cfg)
    unknown = sorted(set(weights) - set(schema))
    if unknown:
        raise FormatError(f"unknown weight names: {unknown}")
    missing = sorted(set(schema) - set(weights))
    if missing:
        raise FormatError(f"missing weight names: {missing}")
    for name, shape in schema.items():
        if weights[name].shape != shape:
            raise FormatError(
                f"weight {name} has shape {weights[name].shape}, expected {shape}"
            )


def init_weights(cfg, seed):
    """Seeded uniform +-1/sqrt(fan_in) init; layer-norm gains 1, shifts 0."""
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape in sorted(weight_schema(cfg).items()):
        if name.endswith(".gain"):
            weights[name] = np.ones(shape)
        elif name.endswith(".shift"):
            weights[name] = np.zeros(shape)
        elif name.endswith(("bias", ".sa_b", ".b1", ".b2")):
            weights[name] = np.zeros(shape)
        else:
            if len(shape) == 4:
                fan_in = shape[1] * shape[2] * shape[3]
            else:
                fan_in = shape[1]
            bound = 1.0 / np.sqrt(fan_in)
            weights[name] = rng.uniform(-bound, bound, size=shape)
    return weights


def zero_weights(cfg):
    """All-zero parameters except unit layer-norm gains; makes every enhance
    block the exact identity on its input (the residual-only path)."""
    weights = {}
    for name, shape in weight_schema(cfg).items():
        if name.endswith(".gain"):
            weights[name] = np.ones(shape)
        else:
            weights[name] = np.zeros(shape)
    return weights


def _to_tokens(x):
    b, c, h, w = x.shape
    return x.transpose(0, 2, 3, 1).reshape(b * h * w, c), (b, c, h, w)


def _from_tokens(tok, shape):
    b, c, h, w = shape
    return np.ascontiguousarray(tok.reshape(b, h, w, c).transpose(0, 3, 1, 2))


def feature_extract(img, weights, branch, cfg):
    """Three 3x3 convs (1 -> C -> C -> C), Leaky-ReLU after each."""
    x = T.as_tensor(img)
    for layer in (1, 2, 3):
        x = T.conv2d(
            x,
            weights[f"fe{branch}.{layer}.weight"],
            weights[f"fe{branch}.{layer}.bias"],
            padding=1,
        )
        x = T.leaky_relu(x, cfg.slope)
    return x


def _attn_params(weights, prefix, heads):
    return AttentionParams(
        wq=weights[f"{prefix}.wq"],
        wk=weights[f"{prefix}.wk"],
        wv=weights[f"{prefix}.wv"],
        wo=weights[f"{prefix}.wo"],
        heads=heads,
    )


def _cbam_params(weights, prefix):
    return CbamParams(
        ca_w1=weights[f"{prefix}.ca_w1"],
        ca_w2=weights[f"{prefix}.ca_w2"],
        sa_w=weights[f"{prefix}.sa_w"],
        sa_b=weights[f"{prefix}.sa_b"],
    )


def _pad_to_multiple(x, mult):
    """Mirror-pad bottom/right so both spatial dims are multiples of mult."""
    _, _, h, w = x.shape
    ph = (-h) % mult
    pw = (-w) % mult
    if ph == 0 and pw == 0:
        return x, (h, w)
    return np.pad(x, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="symmetric"), (h, w)


def _layer_norm_nchw(x, gain, shift):
    tok, shape = _to_tokens(x)
    return _from_tokens(T.layer_norm(tok, gain, shift), shape)


def enhance_block(f1, f2, index, weights, cfg):
    """One frequency-enhancement block for both modality streams.

    LN -> DWT -> cross-modal band attention -> channel/spatial gating with the
    detail-band swap -> IWT + residual -> LN -> token MLP + residual.
    Odd or non-window-aligned inputs are mirror-padded and cropped back.
    """
    f1, f2 = T.as_tensor(f1), T.as_tensor(f2)
    if f1.shape != f2.shape:
        raise ShapeError(f"stream shapes differ: {f1.shape} vs {f2.shape}")
    w = cfg.window
    shift = (index % 2) * (w // 2)
    f1p, orig = _pad_to_multiple(f1, 2 * w)
    f2p, _ = _pad_to_multiple(f2, 2 * w)

    p1, p2 = "block%d.s1" % index, "block%d.s2" % index
    spa1 = _layer_norm_nchw(f1p, weights[f"{p1}.ln1.gain"], weights[f"{p1}.ln1.shift"])
    spa2 = _layer_norm_nchw(f2p, weights[f"{p2}.ln1.gain"], weights[f"{p2}.ln1.shift"])

    s1, s2 = dwt2(spa1), dwt2(spa2)
    low_a1, low_a2 = cross_modal_attention(
        s1.ll,
        s2.ll,
        _attn_params(weights, f"{p1}.attn.low", cfg.heads),
        _attn_params(weights, f"{p2}.attn.low", cfg.heads),
        w,
        shift,
        cfg.cross_route,
    )
    high_a1, high_a2 = cross_modal_attention(
        pack_high(s1),
        pack_high(s2),
        _attn_params(weights, f"{p1}.attn.high", cfg.heads),
        _attn_params(weights, f"{p2}.attn.high", cfg.heads),
        w,
        shift,
        cfg.cross_route,
    )
    fre1, fre2 = frequency_interaction(
        low_a1,
        low_a2,
        high_a1,
        high_a2,
        _cbam_params(weights, f"{p1}.cbam"),
        _cbam_params(weights, f"{p2}.cbam"),
    )

    outs = []
    for packed, fp, p in ((fre1, f1p, p1), (fre2, f2p, p2)):
        b = fp.shape[0]
        rec = iwt2(unpack(packed[:b], packed[b:]))
        fprime = rec + fp
        tok, shape = _to_tokens(
            _layer_norm_nchw(
                fprime, weights[f"{p}.ln2.gain"], weights[f"{p}.ln2.shift"]
            )
        )
        hid = T.leaky_relu(tok @ weights[f"{p}.mlp.w1"].T + weights[f"{p}.mlp.b1"], cfg.slope)
        mlp_out = hid @ weights[f"{p}.mlp.w2"].T + weights[f"{p}.mlp.b2"]
        outs.append(_from_tokens(mlp_out, shape) + fprime)
    h, wd = orig
    return outs[0][:, :, :h, :wd], outs[1][:, :, :h, :wd]


def forward(i1, i2, weights, cfg):
    """Fuse two grayscale images into one; deterministic for fixed weights."""
    i1 = np.asarray(i1, dtype=np.float64)
    i2 = np.asarray(i2, dtype=np.float64)
    if i1.shape != i2.shape:
        raise ShapeError(f"input sizes differ: {i1.shape} vs {i2.shape}")
    validate_weights(weights, cfg)
    f1 = feature_extract(to_tensor(i1), weights, 1, cfg)
    f2 = feature_extract(to_tensor(i2), weights, 2, cfg)
    for i in range(cfg.blocks):
        f1, f2 = enhance_block(f1, f2, i, weights, cfg)
    x = T.channel_concat(f1, f2)
    for layer in (1, 2, 3):
        x = T.conv2d(
            x, weights[f"fuse.{layer}.weight"], weights[f"fuse.{layer}.bias"], padding=1
        )
        if layer < 3 or cfg.final_activation == "leaky":
            x = T.leaky_relu(x, cfg.slope)
    return from_tensor(np.clip(x, 0.0, 1.0))


def save_weights(weights, path):
    """Binary container: magic, u32 version, u32 count, a name/shape table,
    f64 little-endian payloads in table order, trailing CRC32."""
    body = bytearray()
    body += MAGIC
    body += struct.pack("<II", VERSION, len(weights))
    names = sorted(weights)
    for name in names:
        arr = weights[name]
        enc = name.encode("utf-8")
        body += struct.pack("<H", len(enc)) + enc
        body += struct.pack("<B", arr.ndim)
        body += struct.pack("<%dI" % arr.ndim, *arr.shape)
    for name in names:
        body += np.ascontiguousarray(weights[name], dtype="<f8").tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def load_weights(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16:
        raise FormatError(f"weights file truncated: {len(buf)} bytes")
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    stored_crc = struct.unpack("<I", buf[-4:])[0]
    if zlib.crc32(buf[:-4]) != stored_crc:
        raise FormatError("CRC mismatch: weights file corrupted")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")
    pos = 12
    table = []
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from("<%dI" % rank, buf, pos)
            pos += 4 * rank
            table.append((name, shape))
    except struct.error as exc:
        raise FormatError(f"truncated weights table: {exc}") from exc
    weights = {}
    for name, shape in table:
        n = int(np.prod(shape)) if shape else 1
        end = pos + 8 * n
        if end > len(buf) - 4:
            raise FormatError(f"truncated payload for tensor {name}")
        weights[name] = (
            np.frombuffer(buf[pos:end], dtype="<f8").astype(np.float64).reshape(shape)
        )
        pos = end
    if pos != len(buf) - 4:
        raise FormatError(f"{len(buf) - 4 - pos} trailing bytes after payloads")
    if len(weights) != count:
        dupes = count - len(weights)
        raise FormatError(f"{dupes} duplicate tensor names in table")
    return weights
