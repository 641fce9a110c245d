"""End-to-end extraction into the feature-bundle exchange format.

For every requested class the pipeline selects the images annotated with
that class, featurizes the original / object / context crops, computes
per-class log odds from the original-image features, and writes one
``class_<k>/`` directory of four CSVs plus a shared ``manifest.csv``.
Per-image failures (undecodable files) are collected and reported, never
silently dropped.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
import torch

from feature_extractor.annotations import AnnotatedImage
from feature_extractor.backbone import FEATURE_DIM, features
from feature_extractor.head import log_odds, train_head
from feature_extractor.preprocess import UndecodableImage, preprocess_image

log = logging.getLogger("featx")


@dataclass(frozen=True)
class ExtractionResult:
    class_counts: dict[int, int]          # class_id -> images written
    flagged: list[tuple[int, str]]        # object invisible in the crop
    failures: list[tuple[str, str]]       # (path, reason)


def _write_matrix(path, matrix: np.ndarray, headers: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(headers) + "\n")
        for row in matrix:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def _featurize(backbone, crops: list[torch.Tensor], batch_size: int) -> torch.Tensor:
    out = []
    for start in range(0, len(crops), batch_size):
        batch = torch.stack(crops[start:start + batch_size])
        out.append(features(backbone, batch))
    return torch.cat(out) if out else torch.empty(0, FEATURE_DIM)


def extract_bundles(images: list[AnnotatedImage], class_names: list[str],
                    class_ids: list[int], backbone, head,
                    out_dir: str | os.PathLike, head_epochs: int = 20,
                    batch_size: int = 8, seed: int = 0) -> ExtractionResult:
    """Run the full pipeline; returns per-class counts and failure lists."""
    os.makedirs(out_dir, exist_ok=True)
    n_classes = len(class_names)
    failures: list[tuple[str, str]] = []
    flagged: list[tuple[int, str]] = []

    # featurize original crops once per image (shared by head training)
    originals: dict[str, torch.Tensor] = {}
    multihot: dict[str, np.ndarray] = {}
    decoded: list[AnnotatedImage] = []
    for annotated in images:
        first_class = annotated.boxes[0].class_id if annotated.boxes else None
        if first_class is None:
            continue
        try:
            pre = preprocess_image(annotated, first_class)
        except UndecodableImage as exc:
            failures.append((annotated.path, str(exc)))
            continue
        originals[annotated.path] = pre.original
        labels = np.zeros(n_classes)
        for box in annotated.boxes:
            labels[box.class_id] = 1.0
        multihot[annotated.path] = labels
        decoded.append(annotated)

    feats = _featurize(backbone, [originals[a.path] for a in decoded], batch_size)
    if head_epochs > 0 and len(decoded) > 0:
        targets = torch.tensor(np.stack([multihot[a.path] for a in decoded]),
                               dtype=feats.dtype)
        losses = train_head(head, feats, targets, epochs=head_epochs, seed=seed)
        log.info("head training loss %.4f -> %.4f", losses[0], losses[-1])
    odds = log_odds(head, feats).numpy()
    odds_by_path = {a.path: odds[i] for i, a in enumerate(decoded)}
    feats_by_path = {a.path: feats[i].numpy() for i, a in enumerate(decoded)}

    class_counts: dict[int, int] = {}
    manifest_rows: list[str] = []
    for class_id in class_ids:
        members = [a for a in decoded if a.boxes_for(class_id)]
        if not members:
            class_counts[class_id] = 0
            continue
        object_crops, context_crops = [], []
        for annotated in members:
            pre = preprocess_image(annotated, class_id)
            if not pre.object_visible:
                flagged.append((class_id, annotated.path))
            object_crops.append(pre.object_crop)
            context_crops.append(pre.context_crop)
        f_obj = _featurize(backbone, object_crops, batch_size).numpy()
        f_ctx = _featurize(backbone, context_crops, batch_size).numpy()
        f_orig = np.stack([feats_by_path[a.path] for a in members])
        odds_mat = np.stack([odds_by_path[a.path] for a in members])

        sub = os.path.join(out_dir, f"class_{class_id}")
        os.makedirs(sub, exist_ok=True)
        feature_cols = [f"f{i}" for i in range(FEATURE_DIM)]
        _write_matrix(os.path.join(sub, "features.csv"), f_orig, feature_cols)
        _write_matrix(os.path.join(sub, "features_object.csv"), f_obj, feature_cols)
        _write_matrix(os.path.join(sub, "features_context.csv"), f_ctx, feature_cols)
        _write_matrix(os.path.join(sub, "logodds.csv"), odds_mat,
                      [f"class_{i}" for i in range(n_classes)])
        for image_id, annotated in enumerate(members):
            manifest_rows.append(
                f"{class_id},{image_id},class_{class_id}/features.csv")
        class_counts[class_id] = len(members)

    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="\n") as fh:
        fh.write("class_id,image_id,file\n")
        fh.write("".join(row + "\n" for row in manifest_rows))
    if failures:
        with open(os.path.join(out_dir, "failures.csv"), "w", newline="\n") as fh:
            fh.write("file,reason\n")
            for path, reason in failures:
                fh.write(f"{path},{reason}\n")
    return ExtractionResult(class_counts=class_counts, flagged=flagged,
                            failures=failures)
