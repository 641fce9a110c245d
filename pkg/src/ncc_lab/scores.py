"""Object/context and causal/anticausal scores over feature bundles.

A feature bundle holds, for one object class, three m x L feature
matrices extracted from the original, object-only, and context-only
versions of m images, plus the per-image log odds of the class. Each of
the L features receives four scores:

* object score    -- how violently the feature reacts when the object is
                     blacked out (aggregate deviation of context-image
                     features from original-image features),
* context score   -- the same with the context blacked out,
* causal score    -- 1 - symmetric-NCC of the (feature, log-odds) bag,
* anticausal score-- 1 - symmetric-NCC of the (log-odds, feature) bag.

Causal and anticausal scores of a feature sum to 1.0 exactly, by the
same complement construction the symmetric coefficient uses.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from ncc_lab.ncc import NCCModel, symmetric_scores
from ncc_lab.synthgen import DegenerateSignal, Spline, standardize


class DeadFeature(ValueError):
    """A feature column is all-zero (or constant) and cannot be scored."""


@dataclass(frozen=True)
class FeatureBundle:
    """Per-class feature matrices and class log odds for m images."""

    class_id: int
    features: np.ndarray          # original images, m x L
    features_object: np.ndarray   # context blacked out
    features_context: np.ndarray  # object blacked out
    logodds: np.ndarray           # this class's log odds, length m
    logodds_all: np.ndarray | None = None  # optional m x K matrix

    def __post_init__(self):
        shape = self.features.shape
        if len(shape) != 2 or shape[0] < 2:
            raise ValueError("features must be an (m, L) matrix with m >= 2")
        if self.features_object.shape != shape or self.features_context.shape != shape:
            raise ValueError("the three feature matrices must share dimensions")
        if self.logodds.shape != (shape[0],):
            raise ValueError("logodds must be an m-vector")
        for arr in (self.features, self.features_object, self.features_context,
                    self.logodds):
            if not np.all(np.isfinite(arr)):
                raise ValueError("bundle contains non-finite values")

    @property
    def n_images(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ScoreTable:
    """Per-feature scores for one class; NaN rows are dead features."""

    class_id: int
    object_score: np.ndarray
    context_score: np.ndarray
    causal_score: np.ndarray
    anticausal_score: np.ndarray
    correlation: np.ndarray
    abs_correlation: np.ndarray
    dead: np.ndarray  # bool mask of unscorable columns


def object_context_scores(bundle: FeatureBundle):
    """Aggregate blackout reactions, normalized per feature.

    Returns (object_scores, context_scores, dead_mask); all-zero original
    columns are reported in the mask and carry NaN scores.
    """
    denom = np.abs(bundle.features).sum(axis=0)
    dead = denom == 0.0
    safe = np.where(dead, 1.0, denom)
    s_object = np.abs(bundle.features_context - bundle.features).sum(axis=0) / safe
    s_context = np.abs(bundle.features_object - bundle.features).sum(axis=0) / safe
    s_object[dead] = np.nan
    s_context[dead] = np.nan
    return s_object, s_context, dead


def feature_direction_scores(model: NCCModel, feature_column: np.ndarray,
                             logodds: np.ndarray):
    """(causal, anticausal) scores for one feature column.

    Raises DeadFeature when the column (or the log odds) is too close to
    constant to standardize.
    """
    try:
        bag = np.column_stack([standardize(feature_column), standardize(logodds)])
    except DegenerateSignal as exc:
        raise DeadFeature(str(exc)) from exc
    s = symmetric_scores(model, [bag])[0]
    return 1.0 - s, s  # exact complements by construction


def causal_anticausal_scores(model: NCCModel, bundle: FeatureBundle):
    """Direction scores for every feature column against the log odds.

    Feature columns and log odds are standardized before scoring (the
    classifier was trained on standardized bags). Dead or constant
    columns receive NaN and are flagged in the returned mask.
    """
    m, n_feat = bundle.features.shape
    causal = np.full(n_feat, np.nan)
    anticausal = np.full(n_feat, np.nan)
    dead = np.zeros(n_feat, dtype=bool)
    c = standardize(bundle.logodds)
    bags = []
    live_idx = []
    for l in range(n_feat):
        try:
            col = standardize(bundle.features[:, l])
        except DegenerateSignal:
            dead[l] = True
            continue
        bags.append(np.column_stack([col, c]))
        live_idx.append(l)
    if bags:
        s = symmetric_scores(model, bags)
        live = np.array(live_idx)
        anticausal[live] = s
        causal[live] = 1.0 - s
    return causal, anticausal, dead


def correlation_baseline(bundle: FeatureBundle):
    """Pearson correlation (and absolute value) of each feature with the
    log odds; the sanity stand-in for the learned coefficient."""
    c = bundle.logodds - bundle.logodds.mean()
    c_norm = float(np.sqrt((c * c).sum()))
    f = bundle.features - bundle.features.mean(axis=0)
    f_norm = np.sqrt((f * f).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (f * c[:, None]).sum(axis=0) / (f_norm * c_norm)
    corr[(f_norm == 0.0) | (c_norm == 0.0)] = np.nan
    return corr, np.abs(corr)


def compute_scores(model: NCCModel, bundle: FeatureBundle) -> ScoreTable:
    """All five score vectors for one bundle."""
    s_object, s_context, dead_zero = object_context_scores(bundle)
    causal, anticausal, dead_dir = causal_anticausal_scores(model, bundle)
    corr, abs_corr = correlation_baseline(bundle)
    dead = dead_zero | dead_dir
    return ScoreTable(class_id=bundle.class_id, object_score=s_object,
                      context_score=s_context, causal_score=causal,
                      anticausal_score=anticausal, correlation=corr,
                      abs_correlation=abs_corr, dead=dead)


def top_fraction(scores: np.ndarray, q: float) -> np.ndarray:
    """Indices of the ceil(q * L) largest scores, ties to the lower index.

    NaN entries (dead features) never rank. The result is sorted
    ascending and never empty for valid q.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    scores = np.asarray(scores, dtype=np.float64)
    count = max(1, math.ceil(q * scores.size))
    count = min(count, int(np.sum(~np.isnan(scores))))
    order = np.argsort(-scores, kind="stable")  # NaNs sort last
    return np.sort(order[:count])


@dataclass(frozen=True)
class HypothesisRow:
    class_id: int
    q: float
    top_count: int
    object_mean_top_anticausal: float
    object_std_top_anticausal: float
    object_mean_top_causal: float
    object_std_top_causal: float
    context_mean_top_anticausal: float
    context_std_top_anticausal: float
    context_mean_top_causal: float
    context_std_top_causal: float
    supports: bool


@dataclass(frozen=True)
class HypothesisReport:
    rows: list[HypothesisRow]
    support_counts: dict[float, tuple[int, int]]  # q -> (supporting, total)


def hypothesis_report(tables: list[ScoreTable],
                      qs: tuple[float, ...] = (0.01, 0.20)) -> HypothesisReport:
    """Compare object/context scores of top anticausal vs top causal features.

    A class supports the object/anticausal relation at fraction q when the
    mean object score over its top-q anticausal features strictly exceeds
    the mean object score over its top-q causal features.
    """
    rows: list[HypothesisRow] = []
    counts: dict[float, tuple[int, int]] = {}
    for q in qs:
        supporting = 0
        for table in tables:
            top_anti = top_fraction(table.anticausal_score, q)
            top_caus = top_fraction(table.causal_score, q)
            obj_anti = table.object_score[top_anti]
            obj_caus = table.object_score[top_caus]
            ctx_anti = table.context_score[top_anti]
            ctx_caus = table.context_score[top_caus]
            supports = bool(obj_anti.mean() > obj_caus.mean())
            supporting += supports
            rows.append(HypothesisRow(
                class_id=table.class_id, q=q, top_count=top_anti.size,
                object_mean_top_anticausal=float(obj_anti.mean()),
                object_std_top_anticausal=float(obj_anti.std()),
                object_mean_top_causal=float(obj_caus.mean()),
                object_std_top_causal=float(obj_caus.std()),
                context_mean_top_anticausal=float(ctx_anti.mean()),
                context_std_top_anticausal=float(ctx_anti.std()),
                context_mean_top_causal=float(ctx_caus.mean()),
                context_std_top_causal=float(ctx_caus.std()),
                supports=supports,
            ))
        counts[q] = (supporting, len(tables))
    return HypothesisReport(rows=rows, support_counts=counts)


def pairwise_object_relations(model: NCCModel, logodds_matrix: np.ndarray,
                              class_names: list[str] | None = None):
    """Directed relation scores between class log odds.

    For each ordered pair (a, b) the score is 1 - ncc_symmetric of the
    (odds_a, odds_b) bag, read as the strength of "a causes b". The two
    orders of a pair sum to 1 exactly. Returns rows sorted by descending
    score: (cause, effect, score).
    """
    logodds_matrix = np.asarray(logodds_matrix, dtype=np.float64)
    m, k = logodds_matrix.shape
    names = class_names if class_names is not None else [str(i) for i in range(k)]
    if len(names) != k:
        raise ValueError("one name per log-odds column required")
    cols = {}
    for i in range(k):
        try:
            cols[i] = standardize(logodds_matrix[:, i])
        except DegenerateSignal:
            continue  # constant odds columns cannot be scored
    live = sorted(cols)
    bags = [np.column_stack([cols[a], cols[b]])
            for ai, a in enumerate(live) for b in live[ai + 1:]]
    scores = symmetric_scores(model, bags)
    relations = []
    idx = 0
    for ai, a in enumerate(live):
        for b in live[ai + 1:]:
            s_ab = scores[idx]
            s_ba = 1.0 - s_ab  # exact complement by the _sym_pair construction
            relations.append((names[a], names[b], 1.0 - s_ab))
            relations.append((names[b], names[a], 1.0 - s_ba))
            idx += 1
    relations.sort(key=lambda r: -r[2])
    return relations


# -- synthetic oracle bundles ---------------------------------------------------


@dataclass(frozen=True)
class OracleConfig:
    """Planted-ground-truth bundle generator settings."""

    n_classes: int = 5
    n_features: int = 512
    n_images: int = 1000
    n_anticausal: int = 20
    n_causal: int = 8
    object_shift: float = 2.0   # blackout reaction scale for planted columns
    background_shift: float = 0.2

    def __post_init__(self):
        if self.n_anticausal + self.n_causal > self.n_features:
            raise ValueError("planted sets exceed the feature count")


def _even_spline(rng: np.random.Generator) -> Spline:
    """Random spline that is symmetric about the support midpoint, so its
    output is nearly uncorrelated with a symmetric input.

    Valleys and peaks alternate with a guaranteed gap, so the mechanism
    always has enough curvature to dominate the child's additive noise.
    """
    valleys = rng.uniform(0.2, 0.6, size=2)
    peak = rng.uniform(1.4, 2.0)
    ordinates = np.array([valleys[0], peak, valleys[1], peak, valleys[0]])
    sign = rng.choice([-1.0, 1.0])
    return Spline.from_support(-4.0, 4.0, sign * ordinates)


def synth_feature_oracle(cfg: OracleConfig, rng: np.random.Generator):
    """Per-class bundles with known causal structure.

    Causal features are non-Gaussian parents that the class log odds
    linearly combine; anticausal features are even-spline children of the
    log odds (strong dependence, near-zero linear correlation); the rest
    are independent noise. Context blackout perturbs anticausal columns
    hard, object blackout perturbs causal columns hard, so object scores
    align with planted-anticausal and context scores with planted-causal.

    Returns (bundles, ground_truth) where ground_truth[class_id] is a dict
    with "causal" and "anticausal" index arrays.
    """
    bundles: list[FeatureBundle] = []
    ground_truth: dict[int, dict[str, np.ndarray]] = {}
    m, n_feat = cfg.n_images, cfg.n_features
    for class_id in range(cfg.n_classes):
        perm = rng.permutation(n_feat)
        anticausal_idx = np.sort(perm[:cfg.n_anticausal])
        causal_idx = np.sort(perm[cfg.n_anticausal:cfg.n_anticausal + cfg.n_causal])

        features = rng.standard_normal((m, n_feat))
        # non-Gaussian parents: uniform, linear ANM into the log odds
        for l in causal_idx:
            features[:, l] = standardize(rng.uniform(-1.0, 1.0, size=m))
        weights = rng.uniform(0.7, 1.3, size=cfg.n_causal) * rng.choice(
            [-1.0, 1.0], size=cfg.n_causal)
        logodds = features[:, causal_idx] @ weights
        logodds = standardize(logodds + rng.normal(0.0, 0.5, size=m))
        # children: even splines of the log odds plus mild noise
        for l in anticausal_idx:
            child = _even_spline(rng).evaluate(logodds)
            features[:, l] = standardize(child + rng.normal(0.0, 0.15, size=m))
        for l in range(n_feat):
            if l not in causal_idx and l not in anticausal_idx:
                features[:, l] = standardize(features[:, l])

        shift = np.full(n_feat, cfg.background_shift)
        shift[anticausal_idx] = cfg.object_shift
        features_context = features + rng.standard_normal((m, n_feat)) * shift
        shift = np.full(n_feat, cfg.background_shift)
        shift[causal_idx] = cfg.object_shift
        features_object = features + rng.standard_normal((m, n_feat)) * shift

        logodds_all = rng.standard_normal((m, cfg.n_classes))
        logodds_all[:, class_id] = logodds
        bundles.append(FeatureBundle(
            class_id=class_id, features=features, features_object=features_object,
            features_context=features_context, logodds=logodds,
            logodds_all=logodds_all))
        ground_truth[class_id] = {"causal": causal_idx, "anticausal": anticausal_idx}
    return bundles, ground_truth


# -- bundle exchange format -------------------------------------------------------


def _write_matrix_csv(path, matrix: np.ndarray, header_cols: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header_cols) + "\n")
        for row in matrix:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_matrix_csv(path, expected_header: list[str] | None = None) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if expected_header is not None and header != expected_header:
            raise ValueError(f"{path}: unexpected header {header[:3]}...")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: row width != header width")
    return data


def feature_headers(n_features: int) -> list[str]:
    return [f"f{i}" for i in range(n_features)]


def logodds_headers(n_classes: int) -> list[str]:
    return [f"class_{i}" for i in range(n_classes)]


def write_feature_bundle(directory: str | os.PathLike, bundle: FeatureBundle) -> None:
    """Emit the four-CSV exchange layout for one class."""
    if bundle.logodds_all is None:
        raise ValueError("writing a bundle requires the full log-odds matrix")
    os.makedirs(directory, exist_ok=True)
    cols = feature_headers(bundle.n_features)
    _write_matrix_csv(os.path.join(directory, "features.csv"), bundle.features, cols)
    _write_matrix_csv(os.path.join(directory, "features_object.csv"),
                      bundle.features_object, cols)
    _write_matrix_csv(os.path.join(directory, "features_context.csv"),
                      bundle.features_context, cols)
    _write_matrix_csv(os.path.join(directory, "logodds.csv"), bundle.logodds_all,
                      logodds_headers(bundle.logodds_all.shape[1]))


def load_feature_bundle(directory: str | os.PathLike, class_id: int) -> FeatureBundle:
    """Read one class directory of the exchange format."""
    def read_with_expected_headers(name, make_headers):
        path = os.path.join(directory, name)
        with open(path) as fh:
            width = len(fh.readline().strip().split(","))
        return read_matrix_csv(path, make_headers(width))

    features = read_with_expected_headers("features.csv", feature_headers)
    cols = feature_headers(features.shape[1])
    f_object = read_matrix_csv(os.path.join(directory, "features_object.csv"), cols)
    f_context = read_matrix_csv(os.path.join(directory, "features_context.csv"), cols)
    logodds_all = read_with_expected_headers("logodds.csv", logodds_headers)
    k = logodds_all.shape[1]
    if not 0 <= class_id < k:
        raise ValueError(f"class_id {class_id} outside the log-odds columns")
    return FeatureBundle(class_id=class_id, features=features,
                         features_object=f_object, features_context=f_context,
                         logodds=logodds_all[:, class_id], logodds_all=logodds_all)


def write_bundle_set(directory: str | os.PathLike, bundles: list[FeatureBundle],
                     ground_truth: dict | None = None) -> None:
    """Bundle set layout: one class_<k>/ directory per class plus manifest."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "manifest.csv"), "w", newline="\n") as fh:
        fh.write("class_id,image_id,file\n")
        for bundle in bundles:
            sub = f"class_{bundle.class_id}"
            write_feature_bundle(os.path.join(directory, sub), bundle)
            for image_id in range(bundle.n_images):
                fh.write(f"{bundle.class_id},{image_id},{sub}/features.csv\n")
    if ground_truth is not None:
        with open(os.path.join(directory, "ground_truth.csv"), "w", newline="\n") as fh:
            fh.write("class_id,feature,role\n")
            for class_id in sorted(ground_truth):
                for role in ("causal", "anticausal"):
                    for l in ground_truth[class_id][role]:
                        fh.write(f"{class_id},{l},{role}\n")


def load_bundle_set(directory: str | os.PathLike) -> list[FeatureBundle]:
    class_ids = sorted(
        int(name.split("_", 1)[1]) for name in os.listdir(directory)
        if name.startswith("class_") and os.path.isdir(os.path.join(directory, name)))
    return [load_feature_bundle(os.path.join(directory, f"class_{k}"), k)
            for k in class_ids]


# -- report writers -----------------------------------------------------------------


def write_scores_csv(path: str | os.PathLike, table: ScoreTable) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("feature,object_score,context_score,causal_score,anticausal_score,"
                 "correlation,abs_correlation,dead\n")
        for l in range(table.object_score.size):
            fh.write(
                f"{l},{table.object_score[l]:.17g},{table.context_score[l]:.17g},"
                f"{table.causal_score[l]:.17g},{table.anticausal_score[l]:.17g},"
                f"{table.correlation[l]:.17g},{table.abs_correlation[l]:.17g},"
                f"{int(table.dead[l])}\n")


def write_hypothesis_csv(path: str | os.PathLike, report: HypothesisReport) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("class_id,q,top_count,"
                 "object_mean_top_anticausal,object_std_top_anticausal,"
                 "object_mean_top_causal,object_std_top_causal,"
                 "context_mean_top_anticausal,context_std_top_anticausal,"
                 "context_mean_top_causal,context_std_top_causal,supports\n")
        for r in report.rows:
            fh.write(f"{r.class_id},{r.q:g},{r.top_count},"
                     f"{r.object_mean_top_anticausal:.17g},"
                     f"{r.object_std_top_anticausal:.17g},"
                     f"{r.object_mean_top_causal:.17g},"
                     f"{r.object_std_top_causal:.17g},"
                     f"{r.context_mean_top_anticausal:.17g},"
                     f"{r.context_std_top_anticausal:.17g},"
                     f"{r.context_mean_top_causal:.17g},"
                     f"{r.context_std_top_causal:.17g},{int(r.supports)}\n")


def write_pairwise_csv(path: str | os.PathLike, relations) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("cause,effect,score\n")
        for cause, effect, score in relations:
            fh.write(f"{cause},{effect},{score:.17g}\n")
