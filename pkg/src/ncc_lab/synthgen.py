"""Synthetic cause-effect scatterplot generation.

Each scatterplot is drawn from a heteroscedastic additive noise model:
the cause is sampled from a random Gaussian mixture, passed through a
random cubic Hermite spline mechanism, and corrupted with noise whose
scale varies smoothly with the cause. Cause and effect columns are both
standardized to zero mean and unit (population) variance, so a classifier
can only exploit the *shape* of the joint distribution, never its scale.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

LABEL_CAUSAL = 0.0  # X -> Y
LABEL_ANTICAUSAL = 1.0  # X <- Y
LABEL_INDEPENDENT = 0.5  # permutation-decoupled columns

DEGENERACY_THRESHOLD = 1e-6


class DegenerateSignal(ValueError):
    """Raised when a vector is too close to constant to standardize."""


class GenerationFailed(RuntimeError):
    """Raised after too many consecutive degenerate mechanism draws."""


def standardize(values, threshold: float = DEGENERACY_THRESHOLD) -> np.ndarray:
    """Shift/scale to zero mean and unit population variance.

    Raises DegenerateSignal when the population standard deviation falls
    below ``threshold``; callers in the generation pipeline resample.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("standardize expects a 1-D vector of length >= 2")
    std = float(arr.std())  # population (ddof=0), fixed for reproducibility
    if not np.isfinite(std) or std < threshold:
        raise DegenerateSignal(f"population stddev {std!r} below {threshold}")
    return (arr - arr.mean()) / std


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of up to five Gaussians with normalized weights."""

    means: np.ndarray
    stddevs: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        k = self.means.size
        if not 1 <= k <= 5:
            raise ValueError(f"component count {k} outside [1, 5]")
        if self.stddevs.shape != (k,) or self.weights.shape != (k,):
            raise ValueError("means, stddevs, weights must share length")
        if np.any(self.stddevs < 0):
            raise ValueError("stddevs must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")

    @classmethod
    def from_raw_weights(cls, means, stddevs, raw_weights) -> "GaussianMixture":
        raw = np.asarray(raw_weights, dtype=np.float64)
        total = float(raw.sum())
        if total <= 0:
            raise ValueError("raw weights must have positive sum")
        return cls(
            means=np.asarray(means, dtype=np.float64),
            stddevs=np.asarray(stddevs, dtype=np.float64),
            weights=raw / total,
        )

    @property
    def components(self) -> list[tuple[float, float, float]]:
        return list(zip(self.means.tolist(), self.stddevs.tolist(), self.weights.tolist()))

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(self.means.size, size=m, p=self.weights)
        return rng.normal(loc=self.means[idx], scale=self.stddevs[idx])


@dataclass(frozen=True)
class Spline:
    """Cubic Hermite interpolant with Catmull-Rom tangents.

    Knot abscissae are strictly increasing and the first/last knots sit
    exactly on the support bounds. Evaluation at a knot abscissa returns
    that knot's ordinate exactly (the Hermite basis is exact at segment
    endpoints); between knots the curve is the standard cubic blend.
    Outside the support the terminal cubic segments extrapolate.
    """

    knots_x: np.ndarray
    knots_y: np.ndarray
    tangents: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.knots_x.size < 2:
            raise ValueError("spline needs at least two knots")
        if np.any(np.diff(self.knots_x) <= 0):
            raise ValueError("knot abscissae must be strictly increasing")

    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots_x[0]), float(self.knots_x[-1])

    @classmethod
    def from_knots(cls, knots_x, knots_y) -> "Spline":
        xs = np.asarray(knots_x, dtype=np.float64)
        ys = np.asarray(knots_y, dtype=np.float64)
        # centered finite differences, one-sided at the ends
        tans = np.empty_like(ys)
        if xs.size == 2:
            tans[:] = (ys[1] - ys[0]) / (xs[1] - xs[0])
        else:
            tans[1:-1] = (ys[2:] - ys[:-2]) / (xs[2:] - xs[:-2])
            tans[0] = (ys[1] - ys[0]) / (xs[1] - xs[0])
            tans[-1] = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        return cls(knots_x=xs, knots_y=ys, tangents=tans)

    @classmethod
    def from_support(cls, lo: float, hi: float, ordinates) -> "Spline":
        ys = np.asarray(ordinates, dtype=np.float64)
        if not hi > lo:
            raise ValueError("support must have positive width")
        return cls.from_knots(np.linspace(lo, hi, ys.size), ys)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        seg = np.searchsorted(self.knots_x, x, side="right") - 1
        seg = np.clip(seg, 0, self.knots_x.size - 2)
        x0 = self.knots_x[seg]
        dx = self.knots_x[seg + 1] - x0
        t = (x - x0) / dx
        t2 = t * t
        t3 = t2 * t
        h00 = 2.0 * t3 - 3.0 * t2 + 1.0
        h10 = t3 - 2.0 * t2 + t
        h01 = -2.0 * t3 + 3.0 * t2
        h11 = t3 - t2
        return (
            h00 * self.knots_y[seg]
            + h10 * dx * self.tangents[seg]
            + h01 * self.knots_y[seg + 1]
            + h11 * dx * self.tangents[seg + 1]
        )


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the scatterplot sampling process.

    ``points`` is either a fixed count or an inclusive (lo, hi) range
    sampled per scatterplot. Ranges for the mixture hyperparameters and
    the noise level follow the generative recipe; ``degenerate_retry_limit``
    bounds consecutive resampling of near-constant mechanisms.
    """

    points: int | tuple[int, int] = 1000
    knot_count_range: tuple[int, int] = (4, 5)
    component_count_range: tuple[int, int] = (1, 5)
    mean_scale_range: tuple[float, float] = (0.0, 5.0)
    stddev_scale_range: tuple[float, float] = (0.0, 5.0)
    noise_level_range: tuple[float, float] = (0.0, 5.0)
    degenerate_retry_limit: int = 10

    def __post_init__(self):
        lo, hi = self._points_range()
        if lo < 2:
            raise ValueError("points per sample must be >= 2")
        if hi < lo:
            raise ValueError("points range is empty")
        for name in ("knot_count_range", "component_count_range",
                     "mean_scale_range", "stddev_scale_range", "noise_level_range"):
            a, b = getattr(self, name)
            if b < a:
                raise ValueError(f"{name} is empty")
        if self.degenerate_retry_limit < 1:
            raise ValueError("degenerate_retry_limit must be positive")

    def _points_range(self) -> tuple[int, int]:
        if isinstance(self.points, int):
            return self.points, self.points
        lo, hi = self.points
        return int(lo), int(hi)

    def draw_points(self, rng: np.random.Generator) -> int:
        lo, hi = self._points_range()
        if lo == hi:
            return lo
        return int(rng.integers(lo, hi + 1))


@dataclass(frozen=True)
class CausalSample:
    """A bag of 2-D points plus a direction label (0, 1, or 1/2)."""

    points: np.ndarray
    label: float

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("points must be an (m, 2) array")
        if self.label not in (LABEL_CAUSAL, LABEL_ANTICAUSAL, LABEL_INDEPENDENT):
            raise ValueError(f"label {self.label!r} not in {{0, 1, 1/2}}")

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    def swapped(self) -> "CausalSample":
        """Coordinate-swapped copy with the complementary hard label."""
        label = self.label if self.label == LABEL_INDEPENDENT else 1.0 - self.label
        return CausalSample(points=self.points[:, ::-1].copy(), label=label)

    def permuted_x(self, rng: np.random.Generator) -> "CausalSample":
        """Decouple the columns by permuting x against y; labeled 1/2."""
        perm = rng.permutation(self.points.shape[0])
        pts = np.column_stack([self.points[perm, 0], self.points[:, 1]])
        return CausalSample(points=pts, label=LABEL_INDEPENDENT)

    def check_standardized(self, mean_tol: float = 1e-9, var_tol: float = 1e-6) -> None:
        if not np.all(np.isfinite(self.points)):
            raise ValueError("sample contains non-finite coordinates")
        for col in (self.x, self.y):
            if abs(float(col.mean())) > mean_tol:
                raise ValueError("column mean exceeds tolerance")
            if abs(float(col.var()) - 1.0) > var_tol:
                raise ValueError("column variance off unit by more than tolerance")


def sample_cause_distribution(rng: np.random.Generator,
                              cfg: GeneratorConfig | None = None) -> GaussianMixture:
    """Draw a random Gaussian mixture for the cause variable."""
    cfg = cfg or GeneratorConfig()
    k_lo, k_hi = cfg.component_count_range
    k = int(rng.integers(k_lo, k_hi + 1))
    r = rng.uniform(*cfg.mean_scale_range)
    s = rng.uniform(*cfg.stddev_scale_range)
    means = rng.normal(0.0, r, size=k)
    stddevs = np.abs(rng.normal(0.0, s, size=k))
    raw_weights = np.abs(rng.normal(0.0, 1.0, size=k))
    if float(raw_weights.sum()) <= 0.0:
        raw_weights = np.ones(k)
    return GaussianMixture.from_raw_weights(means, stddevs, raw_weights)


def spline_support(xs: np.ndarray) -> tuple[float, float]:
    """Sample range padded by one population standard deviation per side."""
    std = float(xs.std())
    return float(xs.min()) - std, float(xs.max()) + std


def sample_mechanism(xs: np.ndarray, rng: np.random.Generator,
                     knot_count_range: tuple[int, int] = (4, 5)) -> Spline:
    """Random cubic Hermite mechanism over the padded range of ``xs``."""
    if xs.size < 2:
        raise ValueError("need at least two cause values")
    d = int(rng.integers(knot_count_range[0], knot_count_range[1] + 1))
    lo, hi = spline_support(xs)
    return Spline.from_support(lo, hi, rng.standard_normal(d))


def _generate_parts(cfg: GeneratorConfig, rng: np.random.Generator) -> dict:
    """One pass of the sampling pipeline; raises DegenerateSignal freely."""
    m = cfg.draw_points(rng)
    mixture = sample_cause_distribution(rng, cfg)
    x = standardize(mixture.sample(m, rng))

    d = int(rng.integers(cfg.knot_count_range[0], cfg.knot_count_range[1] + 1))
    lo, hi = spline_support(x)
    mechanism = Spline.from_support(lo, hi, rng.standard_normal(d))
    f = standardize(mechanism.evaluate(x))

    noise_level = rng.uniform(*cfg.noise_level_range)
    e = rng.normal(0.0, noise_level, size=m) if noise_level > 0 else np.zeros(m)
    het = Spline.from_support(lo, hi, rng.uniform(0.0, 5.0, size=d))
    scale = np.maximum(het.evaluate(x), 0.0)  # a noise scale cannot be negative
    y = standardize(f + scale * e)

    return {
        "x": x,
        "y": y,
        "noiseless_effect": f,
        "mechanism": mechanism,
        "noise_scale_spline": het,
        "noise_level": noise_level,
        "mixture": mixture,
    }


def generate_scatterplot(cfg: GeneratorConfig, rng: np.random.Generator) -> CausalSample:
    """Draw one standardized cause-effect scatterplot, labeled X -> Y.

    Degenerate draws (near-constant cause or mechanism) are resampled up
    to ``cfg.degenerate_retry_limit`` consecutive times, after which
    GenerationFailed is raised.
    """
    for _ in range(cfg.degenerate_retry_limit):
        try:
            parts = _generate_parts(cfg, rng)
        except DegenerateSignal:
            continue
        return CausalSample(points=np.column_stack([parts["x"], parts["y"]]),
                            label=LABEL_CAUSAL)
    raise GenerationFailed(
        f"{cfg.degenerate_retry_limit} consecutive degenerate mechanism draws")


def make_training_minibatch(cfg: GeneratorConfig, n: int, with_independent: bool,
                            rng: np.random.Generator) -> list[CausalSample]:
    """Labeled minibatch: both orientations of n scatterplots, optionally
    plus one column-permuted copy per scatterplot with label 1/2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    batch: list[CausalSample] = []
    for _ in range(n):
        sample = generate_scatterplot(cfg, rng)
        batch.append(sample)
        batch.append(sample.swapped())
        if with_independent:
            batch.append(sample.permuted_x(rng))
    return batch


def write_scatterplot_csv(path: str | os.PathLike, sample: CausalSample) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y\n")
        for px, py in sample.points:
            fh.write(f"{px:.17g},{py:.17g}\n")


def write_minibatch(directory: str | os.PathLike, samples: list[CausalSample]) -> None:
    """Dump each sample as CSV plus a ``manifest.csv`` of file,label rows."""
    os.makedirs(directory, exist_ok=True)
    manifest_path = os.path.join(directory, "manifest.csv")
    with open(manifest_path, "w", newline="\n") as manifest:
        manifest.write("file,label\n")
        for i, sample in enumerate(samples):
            name = f"sample_{i:04d}.csv"
            write_scatterplot_csv(os.path.join(directory, name), sample)
            manifest.write(f"{name},{sample.label:g}\n")
