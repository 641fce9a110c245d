"""The Neural Causation Coefficient: a set-input direction classifier.

Each input is a bag of (x, y) points. A point-wise feature map (the
embedding blocks) featurizes every point, the features are mean-pooled
into one vector per bag, and classifier blocks map that vector to two
logits whose softmax estimates the probability that the first coordinate
is the effect (label 1, "X <- Y").

Reported decisions always go through :func:`ncc_symmetric`, which blends
the forward pass of a bag with the forward pass of its coordinate-swapped
twin so that score(S) + score(swap(S)) == 1 exactly in double precision.
"""

from __future__ import annotations

import multiprocessing
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from ncc_lab import nn
from ncc_lab.seeding import derive_rng, derive_seed
from ncc_lab.synthgen import (
    CausalSample,
    GeneratorConfig,
    LABEL_ANTICAUSAL,
    LABEL_CAUSAL,
    make_training_minibatch,
    generate_scatterplot,
)


class EmptySample(ValueError):
    """A bag must contain at least one point."""


GRID_DROPOUTS = (0.1, 0.25, 0.3)
GRID_LAYERS = (2, 3)
GRID_UNITS = (50, 100, 500)


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the reference recipe."""

    iterations: int = 10000
    minibatch_n: int = 16  # each iteration sees both orientations: 2n bags
    hidden: int = 100
    layers: int = 2  # depth of both the embedding and classifier stacks
    dropout_rate: float = 0.25
    learning_rate: float = 1e-3
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-8
    bn_momentum: float = 0.99
    bn_epsilon: float = 1e-5
    with_independent: bool = False
    validation_size: int = 10000
    seed: int = 0
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)

    def __post_init__(self):
        for name in ("iterations", "minibatch_n", "hidden", "layers", "validation_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


class _Block:
    """One hidden unit of the network: batch norm, dense, ReLU, dropout."""

    def __init__(self, in_dim: int, out_dim: int, dropout_rate: float,
                 bn_momentum: float, bn_epsilon: float, rng: np.random.Generator):
        self.bn = nn.BatchNormLayer(in_dim, momentum=bn_momentum, epsilon=bn_epsilon)
        self.dense = nn.DenseLayer.init(in_dim, out_dim, rng)
        self.dropout_rate = dropout_rate

    def forward_train(self, x, rng, update_running=True):
        bn_out, bn_cache = self.bn.forward_train(x, update_running=update_running)
        pre_act = self.dense.forward(bn_out)
        act_mask = pre_act > 0.0
        act = pre_act * act_mask
        out, mask = nn.dropout(act, self.dropout_rate, rng, train=True)
        return out, (bn_cache, bn_out, act_mask, mask)

    def forward_eval(self, x):
        return nn.relu(self.dense.forward(self.bn.forward_eval(x)))

    def backward(self, cache, grad_out):
        bn_cache, bn_out, act_mask, mask = cache
        g = nn.dropout_backward(mask, grad_out)
        g = g * act_mask
        g, grad_w, grad_b = self.dense.backward(bn_out, g)
        g, grad_gamma, grad_beta = self.bn.backward(bn_cache, g)
        return g, {"dense.w": grad_w, "dense.b": grad_b,
                   "bn.gamma": grad_gamma, "bn.beta": grad_beta}


class NCCModel:
    """Point-wise embedding, mean pooling, classifier, two-logit head."""

    def __init__(self, hidden: int = 100, layers: int = 2, dropout_rate: float = 0.25,
                 bn_momentum: float = 0.99, bn_epsilon: float = 1e-5,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden = hidden
        self.layers = layers
        self.dropout_rate = dropout_rate
        self.bn_momentum = bn_momentum
        self.bn_epsilon = bn_epsilon
        self.embedding = []
        in_dim = 2
        for _ in range(layers):
            self.embedding.append(_Block(in_dim, hidden, dropout_rate,
                                         bn_momentum, bn_epsilon, rng))
            in_dim = hidden
        self.classifier = [
            _Block(hidden, hidden, dropout_rate, bn_momentum, bn_epsilon, rng)
            for _ in range(layers)
        ]
        self.output = nn.DenseLayer.init(hidden, 2, rng)

    # -- parameter plumbing ------------------------------------------------

    def _named_blocks(self):
        for i, block in enumerate(self.embedding):
            yield f"emb{i}", block
        for i, block in enumerate(self.classifier):
            yield f"clf{i}", block

    def parameters(self) -> dict[str, np.ndarray]:
        """Live views of every trainable array, for in-place updates."""
        params: dict[str, np.ndarray] = {}
        for prefix, block in self._named_blocks():
            params[f"{prefix}.bn.gamma"] = block.bn.gamma
            params[f"{prefix}.bn.beta"] = block.bn.beta
            params[f"{prefix}.dense.w"] = block.dense.weights
            params[f"{prefix}.dense.b"] = block.dense.bias
        params["out.w"] = self.output.weights
        params["out.b"] = self.output.bias
        return params

    def state_tensors(self) -> dict[str, np.ndarray]:
        """Parameters plus batch-norm running statistics."""
        tensors = dict(self.parameters())
        for prefix, block in self._named_blocks():
            tensors[f"{prefix}.bn.running_mean"] = block.bn.running_mean
            tensors[f"{prefix}.bn.running_var"] = block.bn.running_var
        return tensors

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        own = self.state_tensors()
        missing = set(own) - set(tensors)
        if missing:
            raise ValueError(f"checkpoint missing tensors: {sorted(missing)}")
        for name, arr in own.items():
            incoming = np.asarray(tensors[name], dtype=np.float64)
            if incoming.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}")
            arr[...] = incoming

    # -- forward / backward ------------------------------------------------

    def forward_train(self, points: np.ndarray, lengths: np.ndarray,
                      rng: np.random.Generator, update_running: bool = True):
        offsets = np.concatenate(([0], np.cumsum(lengths)[:-1]))
        caches = {"emb": [], "clf": [], "lengths": lengths}
        x = points
        for block in self.embedding:
            x, cache = block.forward_train(x, rng, update_running)
            caches["emb"].append(cache)
        m = np.add.reduceat(x, offsets, axis=0) / lengths[:, None]
        for block in self.classifier:
            m, cache = block.forward_train(m, rng, update_running)
            caches["clf"].append(cache)
        caches["head_in"] = m
        return self.output.forward(m), caches

    def backward(self, caches, grad_logits: np.ndarray) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        g, grads["out.w"], grads["out.b"] = self.output.backward(
            caches["head_in"], grad_logits)
        for i in reversed(range(len(self.classifier))):
            g, block_grads = self.classifier[i].backward(caches["clf"][i], g)
            grads.update({f"clf{i}.{k}": v for k, v in block_grads.items()})
        lengths = caches["lengths"]
        g = np.repeat(g / lengths[:, None], lengths, axis=0)  # mean-pool backward
        for i in reversed(range(len(self.embedding))):
            g, block_grads = self.embedding[i].backward(caches["emb"][i], g)
            grads.update({f"emb{i}.{k}": v for k, v in block_grads.items()})
        return grads

    def forward_eval(self, points: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        offsets = np.concatenate(([0], np.cumsum(lengths)[:-1]))
        x = points
        for block in self.embedding:
            x = block.forward_eval(x)
        m = np.add.reduceat(x, offsets, axis=0) / lengths[:, None]
        for block in self.classifier:
            m = block.forward_eval(m)
        return self.output.forward(m)

    def prob_anticausal(self, bags: list[np.ndarray]) -> np.ndarray:
        """Eval-mode softmax probability of label 1 for each bag."""
        lengths = np.array([b.shape[0] for b in bags], dtype=np.int64)
        if np.any(lengths == 0):
            raise EmptySample("every bag must contain at least one point")
        points = np.ascontiguousarray(np.concatenate(bags, axis=0), dtype=np.float64)
        logits = self.forward_eval(points, lengths)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e[:, 1] / e.sum(axis=1)


def _as_points(sample) -> np.ndarray:
    pts = sample.points if isinstance(sample, CausalSample) else np.asarray(sample)
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("a sample must be an (m, 2) array of points")
    if pts.shape[0] == 0:
        raise EmptySample("sample contains no points")
    return pts


def ncc_forward(model: NCCModel, sample) -> float:
    """Probability that the first coordinate is the effect (X <- Y)."""
    pts = _as_points(sample)
    return float(model.prob_anticausal([pts])[0])


def _sym_pair(a: float, b: float) -> tuple[float, float]:
    """Blend two orientation probabilities into exact complements.

    Returns (s, 1 - s) where s = (1 + a - b) / 2 up to rounding. The
    branch keeps the larger of the pair in [0.5, 1], where 1 - s is
    exact (Sterbenz), so the two values sum to 1.0 exactly.
    """
    if a >= b:
        s = 0.5 * (1.0 + (a - b))
        return s, 1.0 - s
    s = 0.5 * (1.0 + (b - a))
    return 1.0 - s, s


def ncc_symmetric(model: NCCModel, sample) -> float:
    """Symmetrized anticausal probability; used for all reported decisions.

    Combines the coefficient of the bag and of its coordinate-swapped twin
    so that ncc_symmetric(S) + ncc_symmetric(swap(S)) == 1 exactly.
    """
    pts = _as_points(sample)
    swapped = np.ascontiguousarray(pts[:, ::-1])
    a = ncc_forward(model, pts)
    b = ncc_forward(model, swapped)
    return _sym_pair(a, b)[0]


def symmetric_scores(model: NCCModel, bags: list, chunk_points: int = 400_000) -> np.ndarray:
    """Batched ncc_symmetric over many bags (eval mode, chunked)."""
    bags = [_as_points(b) for b in bags]
    doubled: list[np.ndarray] = []
    for b in bags:
        doubled.append(b)
        doubled.append(np.ascontiguousarray(b[:, ::-1]))
    probs = np.empty(len(doubled))
    start = 0
    while start < len(doubled):
        stop = start
        total = 0
        while stop < len(doubled) and (total == 0
                                       or total + doubled[stop].shape[0] <= chunk_points):
            total += doubled[stop].shape[0]
            stop += 1
        probs[start:stop] = model.prob_anticausal(doubled[start:stop])
        start = stop
    return np.array([_sym_pair(probs[2 * i], probs[2 * i + 1])[0]
                     for i in range(len(bags))])


# -- training ---------------------------------------------------------------


def _targets_for(labels: np.ndarray) -> np.ndarray:
    """Soft two-class targets: label l maps to the row [1 - l, l]."""
    labels = np.asarray(labels, dtype=np.float64)
    return np.column_stack([1.0 - labels, labels])


def minibatch_arrays(samples: list[CausalSample]):
    points = np.ascontiguousarray(
        np.concatenate([s.points for s in samples], axis=0), dtype=np.float64)
    lengths = np.array([s.points.shape[0] for s in samples], dtype=np.int64)
    targets = _targets_for(np.array([s.label for s in samples]))
    return points, lengths, targets


def train(cfg: TrainConfig, progress=None) -> tuple[NCCModel, np.ndarray]:
    """Train a fresh model; returns (model, per-iteration loss history).

    All randomness derives from cfg.seed, so identical configs produce
    bit-identical models and checkpoints.
    """
    init_rng = derive_rng(cfg.seed, "init")
    data_rng = derive_rng(cfg.seed, "data")
    dropout_rng = derive_rng(cfg.seed, "dropout")
    model = NCCModel(hidden=cfg.hidden, layers=cfg.layers,
                     dropout_rate=cfg.dropout_rate, bn_momentum=cfg.bn_momentum,
                     bn_epsilon=cfg.bn_epsilon, rng=init_rng)
    optimizer = nn.RMSProp(learning_rate=cfg.learning_rate, decay=cfg.rms_decay,
                           epsilon=cfg.rms_epsilon)
    params = model.parameters()
    history = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        batch = make_training_minibatch(cfg.generator, cfg.minibatch_n,
                                        cfg.with_independent, data_rng)
        points, lengths, targets = minibatch_arrays(batch)
        logits, caches = model.forward_train(points, lengths, dropout_rng)
        loss, grad_logits = nn.softmax_xent(logits, targets)
        grads = model.backward(caches, grad_logits)
        optimizer.step(params, grads)
        history[it] = loss
        if progress is not None:
            progress(it, loss)
    return model, history


def make_validation_set(generator: GeneratorConfig, size: int,
                        rng: np.random.Generator) -> list[CausalSample]:
    """Balanced labeled set: size//2 scatterplots, each in both orientations."""
    samples: list[CausalSample] = []
    for _ in range((size + 1) // 2):
        s = generate_scatterplot(generator, rng)
        samples.append(s)
        samples.append(s.swapped())
    return samples[:size]


def validate(model: NCCModel, samples: list[CausalSample]) -> float:
    """Fraction of samples whose symmetric score lands on the right side
    of 0.5; an exact 0.5 earns half credit."""
    labels = np.array([s.label for s in samples])
    if np.any((labels != LABEL_CAUSAL) & (labels != LABEL_ANTICAUSAL)):
        raise ValueError("validation labels must be 0 or 1")
    scores = symmetric_scores(model, [s.points for s in samples])
    credit = np.where(scores == 0.5, 0.5,
                      ((scores > 0.5) == (labels == LABEL_ANTICAUSAL)).astype(float))
    return float(credit.mean())


# -- model persistence --------------------------------------------------------


def save_model(path: str | os.PathLike, model: NCCModel,
               extra_header: dict[str, str] | None = None) -> None:
    header = {
        "kind": "ncc-model",
        "hidden": str(model.hidden),
        "layers": str(model.layers),
        "dropout_rate": format(model.dropout_rate, ".17g"),
        "bn_momentum": format(model.bn_momentum, ".17g"),
        "bn_epsilon": format(model.bn_epsilon, ".17g"),
    }
    header.update(extra_header or {})
    nn.save_checkpoint(path, model.state_tensors(), header)


def load_model(path: str | os.PathLike) -> NCCModel:
    tensors, header = nn.load_checkpoint(path)
    if header.get("kind") != "ncc-model":
        raise ValueError(f"{path}: not an ncc-model checkpoint")
    model = NCCModel(hidden=int(header["hidden"]), layers=int(header["layers"]),
                     dropout_rate=float(header["dropout_rate"]),
                     bn_momentum=float(header["bn_momentum"]),
                     bn_epsilon=float(header["bn_epsilon"]))
    model.load_state_tensors(tensors)
    return model


def model_bytes(model: NCCModel) -> bytes:
    """Checkpoint serialization as bytes (for determinism checks)."""
    fd, path = tempfile.mkstemp(suffix=".ckpt")
    os.close(fd)
    try:
        save_model(path, model)
        with open(path, "rb") as fh:
            return fh.read()
    finally:
        os.unlink(path)


# -- grid search ---------------------------------------------------------------


def grid_points() -> list[tuple[float, int, int]]:
    return [(d, l, u) for d in GRID_DROPOUTS for l in GRID_LAYERS for u in GRID_UNITS]


def _config_for_grid_point(cfg: TrainConfig, dropout: float, layers: int,
                           units: int) -> TrainConfig:
    seed = derive_seed(cfg.seed, f"grid-d{dropout}-l{layers}-u{units}")
    return replace(cfg, dropout_rate=dropout, layers=layers, hidden=units, seed=seed)


def _param_count(layers: int, units: int) -> int:
    count = 0
    in_dim = 2
    for _ in range(layers):  # embedding blocks: bn(in) + dense(in -> units)
        count += 2 * in_dim + in_dim * units + units
        in_dim = units
    for _ in range(layers):  # classifier blocks
        count += 2 * units + units * units + units
    count += units * 2 + 2  # output head
    return count


def _grid_worker(payload):
    cfg_kwargs, dropout, layers, units, work_dir = payload
    cfg = TrainConfig(**cfg_kwargs)
    sub_cfg = _config_for_grid_point(cfg, dropout, layers, units)
    model, _ = train(sub_cfg)
    acc = validate(model, _load_validation_bags(work_dir))
    ckpt = os.path.join(work_dir, f"grid_d{dropout:g}_l{layers}_u{units}.ckpt")
    save_model(ckpt, model)
    return {"dropout": dropout, "layers": layers, "units": units,
            "val_accuracy": acc, "checkpoint": ckpt}


def _dump_validation_bags(directory: str, samples: list[CausalSample]) -> None:
    points = np.concatenate([s.points for s in samples])
    lengths = np.array([s.points.shape[0] for s in samples])
    labels = np.array([s.label for s in samples])
    np.savez_compressed(os.path.join(directory, "validation.npz"),
                        points=points, lengths=lengths, labels=labels)


def _load_validation_bags(directory: str) -> list[CausalSample]:
    data = np.load(os.path.join(directory, "validation.npz"))
    offsets = np.concatenate(([0], np.cumsum(data["lengths"])))
    return [CausalSample(points=data["points"][offsets[i]:offsets[i + 1]],
                         label=float(data["labels"][i]))
            for i in range(len(data["lengths"]))]


def grid_search(cfg: TrainConfig, workers: int = 1, work_dir: str | None = None,
                progress=None):
    """Train every grid configuration, pick the best by held-out accuracy.

    All 18 points share one held-out validation set derived from cfg.seed.
    Ties break toward the smaller parameter count, then the lower dropout.
    Returns (best_model, report) where report holds one dict per point.
    """
    if work_dir is None:
        work_dir = tempfile.mkdtemp(prefix="ncc-grid-")
    os.makedirs(work_dir, exist_ok=True)
    val_rng = derive_rng(cfg.seed, "grid-validation")
    _dump_validation_bags(work_dir,
                          make_validation_set(cfg.generator, cfg.validation_size, val_rng))

    cfg_kwargs = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    payloads = [(cfg_kwargs, d, l, u, work_dir) for d, l, u in grid_points()]
    if workers > 1:
        with multiprocessing.get_context("spawn").Pool(workers) as pool:
            report = list(pool.imap_unordered(_grid_worker, payloads))
    else:
        report = []
        for payload in payloads:
            result = _grid_worker(payload)
            report.append(result)
            if progress is not None:
                progress(result)
    report.sort(key=lambda r: (GRID_DROPOUTS.index(r["dropout"]),
                               GRID_LAYERS.index(r["layers"]),
                               GRID_UNITS.index(r["units"])))
    best = max(report, key=lambda r: (r["val_accuracy"],
                                      -_param_count(r["layers"], r["units"]),
                                      -r["dropout"]))
    best_model = load_model(best["checkpoint"])
    return best_model, report
