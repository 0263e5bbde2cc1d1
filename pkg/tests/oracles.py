"""Independent brute-force reference implementations used to freeze expected
values. Everything here is written as plain per-pixel loops, deliberately
sharing no code with the vectorized library paths."""

import math

import numpy as np

GAUSS_SIZE = 11
GAUSS_SIGMA = 1.5
C1 = 0.01**2
C2 = 0.03**2

SX = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
SY = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]


def reflect(i, n):
    # numpy 'reflect' convention: no edge duplication.
    if n == 1:
        return 0
    period = 2 * n - 2
    i = abs(i) % period
    return period - i if i >= n else i


def correlate_reflect(x, k):
    h, w = x.shape
    kh = len(k)
    r = kh // 2
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            s = 0.0
            for u in range(kh):
                for v in range(kh):
                    s += x[reflect(i + u - r, h), reflect(j + v - r, w)] * k[u][v]
            out[i, j] = s
    return out


def conv2d_naive(x, kernel, bias, padding):
    b, cin, h, w = x.shape
    cout = kernel.shape[0]
    k = kernel.shape[2]
    out = np.zeros((b, cout, h, w))
    for bi in range(b):
        for co in range(cout):
            for i in range(h):
                for j in range(w):
                    s = bias[co]
                    for ci in range(cin):
                        for u in range(k):
                            for v in range(k):
                                ii = i + u - padding
                                jj = j + v - padding
                                if 0 <= ii < h and 0 <= jj < w:
                                    s += x[bi, ci, ii, jj] * kernel[co, ci, u, v]
                    out[bi, co, i, j] = s
    return out


def dwt2_naive(x):
    b, c, h, w = x.shape
    ll = np.zeros((b, c, h // 2, w // 2))
    lh = np.zeros_like(ll)
    hl = np.zeros_like(ll)
    hh = np.zeros_like(ll)
    for bi in range(b):
        for ci in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    a = x[bi, ci, 2 * i, 2 * j]
                    bb = x[bi, ci, 2 * i, 2 * j + 1]
                    cc = x[bi, ci, 2 * i + 1, 2 * j]
                    d = x[bi, ci, 2 * i + 1, 2 * j + 1]
                    ll[bi, ci, i, j] = (a + bb + cc + d) / 2
                    lh[bi, ci, i, j] = (a + bb - cc - d) / 2
                    hl[bi, ci, i, j] = (a - bb + cc - d) / 2
                    hh[bi, ci, i, j] = (a - bb - cc + d) / 2
    return ll, lh, hl, hh


def gauss_kernel():
    c = (GAUSS_SIZE - 1) / 2
    k = [
        [
            math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * GAUSS_SIGMA**2))
            for j in range(GAUSS_SIZE)
        ]
        for i in range(GAUSS_SIZE)
    ]
    total = sum(sum(row) for row in k)
    return [[v / total for v in row] for row in k]


def ssim_naive(x, y):
    """Per-pixel sliding-window SSIM, reflect padding, Gaussian weights."""
    h, w = x.shape
    g = gauss_kernel()
    r = GAUSS_SIZE // 2
    total = 0.0
    for i in range(h):
        for j in range(w):
            mx = my = 0.0
            for u in range(GAUSS_SIZE):
                for v in range(GAUSS_SIZE):
                    wt = g[u][v]
                    mx += wt * x[reflect(i + u - r, h), reflect(j + v - r, w)]
                    my += wt * y[reflect(i + u - r, h), reflect(j + v - r, w)]
            vx = vy = cov = 0.0
            for u in range(GAUSS_SIZE):
                for v in range(GAUSS_SIZE):
                    wt = g[u][v]
                    xv = x[reflect(i + u - r, h), reflect(j + v - r, w)]
                    yv = y[reflect(i + u - r, h), reflect(j + v - r, w)]
                    vx += wt * xv * xv
                    vy += wt * yv * yv
                    cov += wt * xv * yv
            vx -= mx * mx
            vy -= my * my
            cov -= mx * my
            total += ((2 * mx * my + C1) * (2 * cov + C2)) / (
                (mx * mx + my * my + C1) * (vx + vy + C2)
            )
    return total / (h * w)


def texture_loss_naive(f, a, b):
    """Direct enumeration of the |grad f| vs max(|grad a|,|grad b|) L1 mean."""

    def gabs(x):
        return np.abs(correlate_reflect(x, SX)) + np.abs(correlate_reflect(x, SY))

    gf, ga, gb = gabs(f), gabs(a), gabs(b)
    h, w = f.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            total += abs(gf[i, j] - max(ga[i, j], gb[i, j]))
    return total / (h * w)


def intensity_loss_naive(f, a, b, a1=1.0, a2=1.0):
    h, w = f.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            total += a1 * abs(f[i, j] - a[i, j]) + a2 * abs(f[i, j] - b[i, j])
    return total / (h * w)


def ssim_loss_naive(f, a, b, g1=0.5, g2=0.5):
    return g1 * (1 - ssim_naive(f, a)) + g2 * (1 - ssim_naive(f, b))


def total_loss_naive(f, a, b, alpha=2.0, beta=10.0, gamma=1.0):
    return (
        alpha * intensity_loss_naive(f, a, b)
        + beta * texture_loss_naive(f, a, b)
        + gamma * ssim_loss_naive(f, a, b)
    )


QABF_PEAK = (0.9994 / (1 + math.exp(-15 * (1 - 0.5)))) * (
    0.9879 / (1 + math.exp(-22 * (1 - 0.8)))
)


def qabf_naive(a, b, f):
    # Edge responses below 1e-12 count as zero, matching the documented
    # orientation-branch convention of the library metric.
    def strength_angle(x):
        sx = correlate_reflect(x, SX)
        sy = correlate_reflect(x, SY)
        h, w = x.shape
        g = np.zeros((h, w))
        t = np.zeros((h, w))
        for i in range(h):
            for j in range(w):
                if abs(sx[i, j]) < 1e-12:
                    sx[i, j] = 0.0
                if abs(sy[i, j]) < 1e-12:
                    sy[i, j] = 0.0
                g[i, j] = math.hypot(sx[i, j], sy[i, j])
                if sx[i, j] == 0:
                    t[i, j] = math.pi / 2
                else:
                    t[i, j] = math.atan(sy[i, j] / sx[i, j])
        return g, t

    ga, ta = strength_angle(a)
    gb, tb = strength_angle(b)
    gf, tf = strength_angle(f)
    h, w = a.shape
    num = den = 0.0
    for i in range(h):
        for j in range(w):
            for gs, ts in ((ga, ta), (gb, tb)):
                if gs[i, j] > gf[i, j]:
                    ratio = gf[i, j] / gs[i, j]
                elif gf[i, j] > gs[i, j]:
                    ratio = gs[i, j] / gf[i, j]
                else:
                    ratio = 1.0
                align = 1 - abs(ts[i, j] - tf[i, j]) / (math.pi / 2)
                qg = 0.9994 / (1 + math.exp(-15 * (ratio - 0.5)))
                qt = 0.9879 / (1 + math.exp(-22 * (align - 0.8)))
                num += (qg * qt / QABF_PEAK) * gs[i, j]
                den += gs[i, j]
    return 1.0 if den == 0 else num / den


def qw_naive(a, b, f, win=8):
    h, w = a.shape
    terms = []
    for i in range(h - win + 1):
        for j in range(w - win + 1):
            wa = a[i : i + win, j : j + win].ravel()
            wb = b[i : i + win, j : j + win].ravel()
            wf = f[i : i + win, j : j + win].ravel()

            def q0(x, y):
                mx, my = x.mean(), y.mean()
                vx, vy = x.var(), y.var()
                cov = (x * y).mean() - mx * my
                den = (vx + vy) * (mx * mx + my * my)
                if den == 0:
                    return 1.0 if np.abs(x - y).max() == 0 else 0.0
                return 4 * cov * mx * my / den

            sa, sb = wa.var(), wb.var()
            lam = sa / (sa + sb) if sa + sb > 0 else 0.5
            terms.append((max(sa, sb), lam * q0(wa, wf) + (1 - lam) * q0(wb, wf)))
    total_c = sum(c for c, _ in terms)
    if total_c == 0:
        return sum(q for _, q in terms) / len(terms)
    return sum(c * q for c, q in terms) / total_c


def fmi_naive(a, b, f, bins=256):
    def feature(x):
        sx = correlate_reflect(x, SX)
        sy = correlate_reflect(x, SY)
        return np.sqrt(sx * sx + sy * sy)

    def nmi(x, y):
        hist, _, _ = np.histogram2d(x.ravel(), y.ravel(), bins=bins)
        p = hist / hist.sum()

        def ent(q):
            return -sum(v * math.log(v) for v in q.ravel() if v > 0)

        hx = ent(p.sum(axis=1))
        hy = ent(p.sum(axis=0))
        hxy = ent(p)
        if hx + hy == 0:
            return 1.0 if np.array_equal(x, y) else 0.0
        return 2 * (hx + hy - hxy) / (hx + hy)

    fa, fb, ff = feature(a), feature(b), feature(f)
    return 0.5 * (nmi(ff, fa) + nmi(ff, fb))
