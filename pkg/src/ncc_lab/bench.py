"""Loading and scoring the Tuebingen cause-effect pair collection.

The directory layout is the version 1.0 distribution: ``pair0001.txt``
through ``pair0100.txt`` holding whitespace-separated numeric columns,
plus ``pairmeta.txt`` with one line per pair: pair id, first and last
column of the cause, first and last column of the effect, and a weight.
Pairs are oriented on load so that ground truth is always X -> Y.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ncc_lab.ncc import NCCModel, symmetric_scores
from ncc_lab.seeding import derive_rng
from ncc_lab.synthgen import DegenerateSignal, standardize


class MissingFile(FileNotFoundError):
    """pairmeta.txt or a referenced pair file is absent."""


class MalformedMeta(ValueError):
    """A pairmeta.txt line does not parse."""


class NonNumericData(ValueError):
    """A pair file contains non-numeric entries."""


@dataclass(frozen=True)
class TuebingenPair:
    """One benchmark pair, oriented so the ground truth is X -> Y."""

    id: int
    x: np.ndarray
    y: np.ndarray
    weight: float
    scalar: bool  # False when cause or effect spans several columns

    def __post_init__(self):
        if self.x.shape != self.y.shape or self.x.size < 2:
            raise ValueError("cause and effect must be equal-length vectors (>= 2)")
        if not self.weight > 0:
            raise ValueError("pair weight must be positive")


def _parse_meta_line(line: str) -> tuple[int, int, int, int, int, float]:
    tokens = line.split()
    if len(tokens) != 6:
        raise MalformedMeta(f"expected 6 fields, got {len(tokens)}: {line!r}")
    try:
        pair_id = int(tokens[0])
        cause_first, cause_last, effect_first, effect_last = map(int, tokens[1:5])
        weight = float(tokens[5])
    except ValueError as exc:
        raise MalformedMeta(f"unparsable meta line {line!r}") from exc
    if cause_last < cause_first or effect_last < effect_first:
        raise MalformedMeta(f"inverted column span in {line!r}")
    return pair_id, cause_first, cause_last, effect_first, effect_last, weight


def load_tuebingen(directory: str | os.PathLike) -> list[TuebingenPair]:
    """Read every pair listed in pairmeta.txt, oriented cause-first.

    Pairs whose cause or effect spans multiple columns are flagged
    non-scalar; evaluation excludes them but reports the count.
    """
    meta_path = os.path.join(directory, "pairmeta.txt")
    if not os.path.exists(meta_path):
        raise MissingFile(f"{meta_path} not found")
    pairs: list[TuebingenPair] = []
    with open(meta_path) as fh:
        for line in fh:
            if not line.strip():
                continue
            pair_id, cf, cl, ef, el, weight = _parse_meta_line(line)
            pair_path = os.path.join(directory, f"pair{pair_id:04d}.txt")
            if not os.path.exists(pair_path):
                raise MissingFile(f"{pair_path} not found")
            try:
                data = np.loadtxt(pair_path, ndmin=2)
            except ValueError as exc:
                raise NonNumericData(f"{pair_path}: {exc}") from exc
            if data.shape[1] < max(cl, el):
                raise MalformedMeta(
                    f"pair {pair_id}: meta references column {max(cl, el)}, "
                    f"file has {data.shape[1]}")
            scalar = cf == cl and ef == el
            pairs.append(TuebingenPair(
                id=pair_id,
                x=np.ascontiguousarray(data[:, cf - 1]),
                y=np.ascontiguousarray(data[:, ef - 1]),
                weight=weight,
                scalar=scalar,
            ))
    return pairs


@dataclass(frozen=True)
class PairResult:
    id: int
    n_points: int
    weight: float
    score: float
    decision: str
    correct: float


@dataclass(frozen=True)
class BenchReport:
    results: list[PairResult]
    weighted_accuracy: float
    unweighted_accuracy: float
    excluded_nonscalar: int
    excluded_degenerate: int


def evaluate_tuebingen(model: NCCModel, pairs: list[TuebingenPair],
                       max_points: int = 5000, seed: int = 0) -> BenchReport:
    """Score every scalar pair with the symmetric coefficient.

    Each pair is subsampled to at most ``max_points`` (seeded, uniform)
    and both columns standardized before scoring. A score below 0.5 reads
    as X -> Y, which is the ground-truth orientation, so it counts as
    correct; an exact 0.5 earns half credit.
    """
    excluded_nonscalar = sum(1 for p in pairs if not p.scalar)
    kept: list[TuebingenPair] = []
    bags: list[np.ndarray] = []
    excluded_degenerate = 0
    for pair in pairs:
        if not pair.scalar:
            continue
        x, y = pair.x, pair.y
        if x.size > max_points:
            idx = derive_rng(seed, f"tuebingen-subsample-{pair.id}").choice(
                x.size, size=max_points, replace=False)
            x, y = x[idx], y[idx]
        try:
            bag = np.column_stack([standardize(x), standardize(y)])
        except DegenerateSignal:
            excluded_degenerate += 1
            continue
        kept.append(pair)
        bags.append(bag)

    scores = symmetric_scores(model, bags) if bags else np.empty(0)
    results = []
    for pair, bag, score in zip(kept, bags, scores):
        score = float(score)
        if score < 0.5:
            decision, correct = "X->Y", 1.0
        elif score > 0.5:
            decision, correct = "Y->X", 0.0
        else:
            decision, correct = "tie", 0.5
        results.append(PairResult(id=pair.id, n_points=bag.shape[0],
                                  weight=pair.weight, score=score,
                                  decision=decision, correct=correct))
    if results:
        weights = np.array([r.weight for r in results])
        credit = np.array([r.correct for r in results])
        weighted = float((weights * credit).sum() / weights.sum())
        unweighted = float(credit.mean())
    else:
        weighted = unweighted = float("nan")
    return BenchReport(results=results, weighted_accuracy=weighted,
                       unweighted_accuracy=unweighted,
                       excluded_nonscalar=excluded_nonscalar,
                       excluded_degenerate=excluded_degenerate)


def write_tuebingen_report(path: str | os.PathLike, report: BenchReport) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("id,n_points,weight,score,decision,correct\n")
        for r in report.results:
            fh.write(f"{r.id},{r.n_points},{r.weight:.17g},{r.score:.17g},"
                     f"{r.decision},{r.correct:g}\n")
