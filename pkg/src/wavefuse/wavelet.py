"""Single-level 2D orthonormal Haar analysis/synthesis with perfect reconstruction.

Applied independently to every (batch, channel) slice. The orthonormal scaling
(factor 1/2 per 2x2 block) preserves energy exactly, which the tests rely on.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .tensor import as_tensor


@dataclass(frozen=True)
class SubbandSet:
    """The four half-resolution wavelet components of a (B, C, H, W) tensor."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    def __post_init__(self):
        shapes = {self.ll.shape, self.lh.shape, self.hl.shape, self.hh.shape}
        if len(shapes) != 1:
            raise ShapeError(f"inconsistent subband shapes: {sorted(shapes)}")


def dwt2(x):
    """Haar analysis. Requires even H and W; odd inputs must be reflection-padded
    by the caller before decomposition."""
    x = as_tensor(x)
    _, _, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(
            f"dwt2 requires even spatial dims, got {h}x{w}; reflection-pad upstream"
        )
    a = x[:, :, 0::2, 0::2]
    b = x[:, :, 0::2, 1::2]
    c = x[:, :, 1::2, 0::2]
    d = x[:, :, 1::2, 1::2]
    return SubbandSet(
        ll=(a + b + c + d) / 2.0,
        lh=(a + b - c - d) / 2.0,
        hl=(a - b + c - d) / 2.0,
        hh=(a - b - c + d) / 2.0,
    )


def iwt2(s):
    """Exact inverse of dwt2."""
    ll, lh, hl, hh = s.ll, s.lh, s.hl, s.hh
    a = (ll + lh + hl + hh) / 2.0
    b = (ll + lh - hl - hh) / 2.0
    c = (ll - lh + hl - hh) / 2.0
    d = (ll - lh - hl + hh) / 2.0
    bb, cc, hh2, ww2 = ll.shape
    out = np.empty((bb, cc, hh2 * 2, ww2 * 2), dtype=np.float64)
    out[:, :, 0::2, 0::2] = a
    out[:, :, 0::2, 1::2] = b
    out[:, :, 1::2, 0::2] = c
    out[:, :, 1::2, 1::2] = d
    return out


def pack_high(s):
    """Stack the three detail bands along batch, order [LH; HL; HH]."""
    return np.concatenate([s.lh, s.hl, s.hh], axis=0)


def unpack(packed_low, packed_high):
    """Rebuild a SubbandSet from a low tensor (B,...) and a packed-high tensor (3B,...)."""
    low = as_tensor(packed_low)
    high = as_tensor(packed_high)
    b = low.shape[0]
    if high.shape[0] != 3 * b:
        raise ShapeError(
            f"packed high batch {high.shape[0]} is not 3x the low batch {b}"
        )
    if high.shape[1:] != low.shape[1:]:
        raise ShapeError(f"subband shape mismatch: {low.shape} vs {high.shape}")
    return SubbandSet(ll=low, lh=high[:b], hl=high[b : 2 * b], hh=high[2 * b :])
