"""Fusion loss suite: intensity (L1), texture (Sobel-gradient L1), and SSIM,
with analytic gradients w.r.t. the fused image and a finite-difference checker.

All filtering uses reflect padding; gradients flow through the exact adjoint of
that padded correlation, so finite differences agree to machine-level accuracy
away from the L1 kinks.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 2.0
    beta: float = 10.0
    gamma: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    gamma1: float = 0.5
    gamma2: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "alpha1", "alpha2", "gamma1", "gamma2"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be >= 0")


@dataclass(frozen=True)
class LossReport:
    total: float
    l_int: float
    l_text: float
    l_ssim: float
    grad: np.ndarray | None = field(default=None, repr=False)


def _check_pair(f, a):
    f = np.asarray(f, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if f.shape != a.shape or f.ndim != 2:
        raise ShapeError(f"image shapes differ: {f.shape} vs {a.shape}")
    return f, a


def _reflect_idx(n, pad):
    return np.pad(np.arange(n), pad, mode="reflect")


def reflect_pad(x, pad):
    return x[np.ix_(_reflect_idx(x.shape[0], pad), _reflect_idx(x.shape[1], pad))]


def reflect_pad_adjoint(g, pad, shape):
    """Fold gradients on the padded array back onto the original pixels."""
    out = np.zeros(shape)
    ri = _reflect_idx(shape[0], pad)
    ci = _reflect_idx(shape[1], pad)
    np.add.at(out, (ri[:, None], ci[None, :]), g)
    return out


def _correlate_valid(xp, k):
    win = sliding_window_view(xp, k.shape)
    return np.einsum("ijuv,uv->ij", win, k, optimize=True)


def filt(x, k):
    """Correlate with reflect padding; output size equals input size."""
    pad = k.shape[0] // 2
    return _correlate_valid(reflect_pad(x, pad), k)


def filt_adjoint(g, k, shape):
    """Exact adjoint of filt for a kernel k and original image shape."""
    pad = k.shape[0] // 2
    kh, kw = k.shape
    gp = np.pad(g, ((kh - 1, kh - 1), (kw - 1, kw - 1)))
    adj_padded = _correlate_valid(gp, k[::-1, ::-1])
    return reflect_pad_adjoint(adj_padded, pad, shape)


def grad_abs(x):
    """|Sobel_x| + |Sobel_y| per pixel."""
    return np.abs(filt(x, SOBEL_X)) + np.abs(filt(x, SOBEL_Y))


def loss_intensity(f, a, b, alpha1=1.0, alpha2=1.0):
    """Mean L1 pull toward both sources; subgradient sign(0) = 0."""
    f, a = _check_pair(f, a)
    f, b = _check_pair(f, b)
    n = f.size
    value = alpha1 * np.abs(f - a).sum() / n + alpha2 * np.abs(f - b).sum() / n
    grad = (alpha1 * np.sign(f - a) + alpha2 * np.sign(f - b)) / n
    return value, grad


def loss_texture(f, a, b):
    """Mean L1 distance between |grad f| and the pointwise max of the source
    gradient magnitudes; gradient via the Sobel adjoints."""
    f, a = _check_pair(f, a)
    f, b = _check_pair(f, b)
    n = f.size
    sxf = filt(f, SOBEL_X)
    syf = filt(f, SOBEL_Y)
    gf = np.abs(sxf) + np.abs(syf)
    target = np.maximum(grad_abs(a), grad_abs(b))
    diff = gf - target
    value = np.abs(diff).sum() / n
    up = np.sign(diff) / n
    grad = filt_adjoint(up * np.sign(sxf), SOBEL_X, f.shape) + filt_adjoint(
        up * np.sign(syf), SOBEL_Y, f.shape
    )
    return value, grad


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim_map(x, y):
    """Per-pixel SSIM with an 11x11 Gaussian window (sigma 1.5, L = 1)."""
    x, y = _check_pair(x, y)
    if min(x.shape) < SSIM_WINDOW:
        raise ShapeError(f"image {x.shape} smaller than SSIM window {SSIM_WINDOW}")
    g = gaussian_window()
    mu_x = filt(x, g)
    mu_y = filt(y, g)
    var_x = filt(x * x, g) - mu_x**2
    var_y = filt(y * y, g) - mu_y**2
    cov = filt(x * y, g) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x**2 + mu_y**2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return num / den


def ssim(x, y):
    return float(ssim_map(x, y).mean())


def _ssim_value_grad(f, a):
    """Mean SSIM(f, a) and its closed-form derivative w.r.t. f."""
    g = gaussian_window()
    n = f.size
    mu_f = filt(f, g)
    mu_a = filt(a, g)
    var_f = filt(f * f, g) - mu_f**2
    var_a = filt(a * a, g) - mu_a**2
    cov = filt(f * a, g) - mu_f * mu_a
    a1 = 2.0 * mu_f * mu_a + SSIM_C1
    a2 = 2.0 * cov + SSIM_C2
    b1 = mu_f**2 + mu_a**2 + SSIM_C1
    b2 = var_f + var_a + SSIM_C2
    value = float((a1 * a2 / (b1 * b2)).mean())
    # Partials of the per-pixel map w.r.t. the filtered statistics.
    d_mu = 2.0 * mu_a * a2 / (b1 * b2) - 2.0 * mu_f * a1 * a2 / (b1**2 * b2)
    d_var = -a1 * a2 / (b1 * b2**2)
    d_cov = 2.0 * a1 / (b1 * b2)
    # mu_f, var_f and cov all depend on f; fold each chain through the window.
    up_mu = d_mu - 2.0 * mu_f * d_var - mu_a * d_cov
    grad = (
        filt_adjoint(up_mu, g, f.shape)
        + 2.0 * f * filt_adjoint(d_var, g, f.shape)
        + a * filt_adjoint(d_cov, g, f.shape)
    ) / n
    return value, grad


def loss_ssim(f, a, b, gamma1=0.5, gamma2=0.5):
    """gamma1*(1 - SSIM(f,a)) + gamma2*(1 - SSIM(f,b)) with analytic gradient."""
    f, a = _check_pair(f, a)
    f, b = _check_pair(f, b)
    va, ga = _ssim_value_grad(f, a)
    vb, gb = _ssim_value_grad(f, b)
    value = gamma1 * (1.0 - va) + gamma2 * (1.0 - vb)
    grad = -gamma1 * ga - gamma2 * gb
    return value, grad


def loss_total(f, a, b, w=LossWeights(), with_grad=True):
    """Weighted sum of the three terms; grad is d(total)/d(fused image)."""
    l_int, g_int = loss_intensity(f, a, b, w.alpha1, w.alpha2)
    l_text, g_text = loss_texture(f, a, b)
    l_ssim, g_ssim = loss_ssim(f, a, b, w.gamma1, w.gamma2)
    total = w.alpha * l_int + w.beta * l_text + w.gamma * l_ssim
    grad = None
    if with_grad:
        grad = w.alpha * g_int + w.beta * g_text + w.gamma * g_ssim
    return LossReport(
        total=float(total),
        l_int=float(l_int),
        l_text=float(l_text),
        l_ssim=float(l_ssim),
        grad=grad,
    )


def _neighborhood_min(x, radius):
    pad = np.pad(x, radius, mode="edge")
    win = sliding_window_view(pad, (2 * radius + 1, 2 * radius + 1))
    return win.min(axis=(2, 3))


def kink_free_mask(f, a, b, h):
    """Pixels whose +-h perturbation cannot cross an L1 kink of any term."""
    margin = 10.0 * h
    mask = (np.abs(f - a) > margin) & (np.abs(f - b) > margin)
    # A single-pixel change moves each Sobel response in a 3x3 neighborhood by
    # at most 2h and the magnitude sum by at most 8h; guard with slack.
    sxf = filt(f, SOBEL_X)
    syf = filt(f, SOBEL_Y)
    diff = np.abs(sxf) + np.abs(syf) - np.maximum(grad_abs(a), grad_abs(b))
    tex_margin = 40.0 * h
    tex_ok = (
        (np.abs(sxf) > tex_margin)
        & (np.abs(syf) > tex_margin)
        & (np.abs(diff) > tex_margin)
    )
    mask &= _neighborhood_min(tex_ok.astype(np.float64), 2) > 0.5
    return mask


def gradcheck(f, a, b, w=LossWeights(), h=1e-6, samples=64, seed=0):
    """Max relative error between the analytic gradient and central finite
    differences at kink-free pixels. Raises if too few safe pixels exist."""
    f, a = _check_pair(f, a)
    f, b = _check_pair(f, b)
    analytic = loss_total(f, a, b, w).grad
    idx = np.argwhere(kink_free_mask(f, a, b, h))
    if len(idx) < samples:
        raise ValueError(
            f"only {len(idx)} kink-free pixels available, need {samples}"
        )
    rng = np.random.default_rng(seed)
    picks = idx[rng.choice(len(idx), size=samples, replace=False)]
    worst = 0.0
    for i, j in picks:
        fp = f.copy()
        fp[i, j] = f[i, j] + h
        fm = f.copy()
        fm[i, j] = f[i, j] - h
        num = (
            loss_total(fp, a, b, w, with_grad=False).total
            - loss_total(fm, a, b, w, with_grad=False).total
        ) / (2.0 * h)
        ana = analytic[i, j]
        if max(abs(ana), abs(num)) <= 1e-9:
            # Both sides are below the finite-difference rounding floor
            # (eps * loss / h); a ratio there measures noise, not error.
            continue
        err = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
        worst = max(worst, err)
    return worst
