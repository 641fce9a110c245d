"""Independent oracles used by the test suite.

These deliberately avoid the package's own numerical paths: direction
recovery uses a truncated-power spline basis fit by least squares plus
distance correlation of residuals, and gradients are checked against
central finite differences. Keep this module free of ncc_lab imports so
oracle and implementation cannot share a bug.
"""

from __future__ import annotations

import numpy as np


def spline_basis(x: np.ndarray, n_knots: int = 6) -> np.ndarray:
    """Truncated-power cubic basis with evenly spaced interior knots."""
    knots = np.linspace(x.min(), x.max(), n_knots + 2)[1:-1]
    cols = [np.ones_like(x), x, x**2, x**3]
    cols.extend(np.clip(x - k, 0.0, None) ** 3 for k in knots)
    return np.column_stack(cols)


def regression_residuals(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Residuals of a least-squares cubic-spline fit of y on x."""
    basis = spline_basis(x)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return y - basis @ coef


def whitened_residual_dependence(x: np.ndarray, y: np.ndarray) -> float:
    """Distance correlation between x and the scale-whitened residuals
    of a spline fit of y on x.

    The generator's noise is heteroscedastic by construction, so raw
    residuals depend on x through their scale even in the true causal
    direction. Whitening by a fitted scale function removes that and
    leaves only structural dependence, which survives in the anticausal
    direction alone.
    """
    basis = spline_basis(x)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    r = y - basis @ coef
    scale_coef, *_ = np.linalg.lstsq(basis, np.abs(r), rcond=None)
    scale = basis @ scale_coef
    floor = np.percentile(np.abs(r), 10) + 1e-12
    return distance_correlation(x, r / np.clip(scale, floor, None))


def distance_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Classic (biased) distance correlation between two 1-D samples."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da = np.abs(a[:, None] - a[None, :])
    db = np.abs(b[:, None] - b[None, :])
    da = da - da.mean(axis=0, keepdims=True) - da.mean(axis=1, keepdims=True) + da.mean()
    db = db - db.mean(axis=0, keepdims=True) - db.mean(axis=1, keepdims=True) + db.mean()
    dcov2 = (da * db).mean()
    dvar_a = (da * da).mean()
    dvar_b = (db * db).mean()
    denom = np.sqrt(dvar_a * dvar_b)
    if denom <= 0:
        return 0.0
    return float(np.sqrt(max(dcov2, 0.0) / denom))


def forward_direction_favored(x: np.ndarray, y: np.ndarray,
                              max_points: int = 1000,
                              rng: np.random.Generator | None = None) -> bool:
    """True when residual independence is higher fitting y on x than x on y.

    This is the additive-noise footprint: regressing in the causal
    direction leaves residuals (after whitening out the heteroscedastic
    scale) nearly independent of the input, while the anticausal fit
    cannot achieve that.
    """
    if x.size > max_points:
        rng = rng or np.random.default_rng(0)
        idx = rng.choice(x.size, size=max_points, replace=False)
        x, y = x[idx], y[idx]
    return whitened_residual_dependence(x, y) < whitened_residual_dependence(y, x)


def plain_direction_favored(x: np.ndarray, y: np.ndarray) -> bool:
    """Residual-independence vote without scale whitening.

    The right tool when the noise is homoscedastic (constant scale):
    whitening would only blur the footprint there.
    """
    fwd = distance_correlation(x, regression_residuals(x, y))
    bwd = distance_correlation(y, regression_residuals(y, x))
    return fwd < bwd


def central_difference_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric norm-based relative difference of two gradients."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)
