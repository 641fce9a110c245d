"""Smoke test: ten annotated images through the full extraction pipeline.

The emitted bundles must be loadable by the scoring package's bundle
loader (the exchange-format contract), carry 512-dim rows, and respect
the blackout semantics.
"""

import json

import numpy as np
import pytest
from PIL import Image

from feature_extractor.annotations import load_annotations
from feature_extractor.backbone import FEATURE_DIM, build_backbone, features
from feature_extractor.cli import main
from feature_extractor.extract import extract_bundles
from feature_extractor.head import build_head
from feature_extractor.preprocess import normalize

from ncc_lab.scores import load_feature_bundle

CLASSES = ["circle", "square", "stripe"]


def paint_image(path, rng, box=None):
    img = Image.new("RGB", (280, 240), tuple(int(v) for v in rng.integers(0, 255, 3)))
    if box is not None:
        img.paste(tuple(int(v) for v in rng.integers(0, 255, 3)),
                  (box[0], box[1], box[2], box[3]))
    img.save(path)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("imgs")
    rng = np.random.default_rng(0)
    entries = []
    for i in range(10):
        name = f"img_{i:02d}.png"
        box = (20 + 4 * i, 30, 160 + 4 * i, 170)
        paint_image(root / name, rng, box)
        boxes = [{"class_id": i % 2, "xmin": box[0], "ymin": box[1],
                  "xmax": box[2], "ymax": box[3]}]
        if i == 0:  # one image with a second class and a full-frame box
            boxes.append({"class_id": 2, "xmin": 0, "ymin": 0,
                          "xmax": 280, "ymax": 240})
        entries.append({"file": name, "boxes": boxes})
    ann = root / "annotations.json"
    ann.write_text(json.dumps({"classes": CLASSES, "images": entries}))
    return root, ann


@pytest.fixture(scope="module")
def extracted(dataset, tmp_path_factory):
    root, ann = dataset
    out = tmp_path_factory.mktemp("bundles")
    class_names, images = load_annotations(ann, image_root=str(root))
    backbone = build_backbone("random", seed=0)
    head = build_head(len(class_names), seed=0)
    result = extract_bundles(images, class_names, [0, 1, 2], backbone, head,
                             out, head_epochs=5)
    return out, result


def test_counts_and_manifest(extracted):
    out, result = extracted
    assert result.class_counts == {0: 5, 1: 5, 2: 1}
    assert not result.failures
    manifest = (out / "manifest.csv").read_text().splitlines()
    assert manifest[0] == "class_id,image_id,file"
    assert len(manifest) == 1 + 5 + 5 + 1


def test_bundles_load_with_scoring_package(extracted):
    out, _ = extracted
    for class_id, expected_rows in ((0, 5), (1, 5), (2, 1)):
        if expected_rows < 2:
            continue  # the loader requires m >= 2 for scoring use
        bundle = load_feature_bundle(out / f"class_{class_id}", class_id)
        assert bundle.features.shape == (expected_rows, FEATURE_DIM)
        assert bundle.logodds_all.shape == (expected_rows, len(CLASSES))
        assert np.all(np.isfinite(bundle.features))


def test_rows_are_512_dim(extracted):
    out, _ = extracted
    header = (out / "class_0" / "features.csv").read_text().splitlines()[0]
    cols = header.split(",")
    assert len(cols) == 512
    assert cols[0] == "f0" and cols[-1] == "f511"


def test_full_frame_box_gives_zero_context_features(extracted, dataset):
    out, _ = extracted
    # class 2's single image has a box covering the whole frame, so its
    # context crop is all zeros and the context features equal the
    # features of a zero image
    backbone = build_backbone("random", seed=0)
    import torch
    zero_feats = features(backbone, torch.zeros(1, 3, 224, 224)).numpy()[0]
    ctx = np.loadtxt(out / "class_2" / "features_context.csv", delimiter=",",
                     skiprows=1, ndmin=2)
    np.testing.assert_allclose(ctx[0], zero_feats, atol=1e-5)


def test_identical_images_identical_rows(dataset, tmp_path_factory):
    root, _ = dataset
    dup_root = tmp_path_factory.mktemp("dups")
    rng = np.random.default_rng(5)
    paint_image(dup_root / "a.png", rng, (10, 10, 200, 200))
    (dup_root / "b.png").write_bytes((dup_root / "a.png").read_bytes())
    ann = dup_root / "ann.json"
    ann.write_text(json.dumps({
        "classes": ["thing"],
        "images": [{"file": "a.png", "boxes": [{"class_id": 0, "xmin": 10,
                                                "ymin": 10, "xmax": 200,
                                                "ymax": 200}]},
                   {"file": "b.png", "boxes": [{"class_id": 0, "xmin": 10,
                                                "ymin": 10, "xmax": 200,
                                                "ymax": 200}]}]}))
    out = tmp_path_factory.mktemp("dup-bundles")
    rc = main(["extract", "--dataset", str(dup_root), "--annotations", str(ann),
               "--classes", "all", "--out", str(out), "--head-epochs", "0"])
    assert rc == 0
    rows = (out / "class_0" / "features.csv").read_text().splitlines()[1:]
    assert rows[0] == rows[1]


def test_cli_rejects_unknown_class(dataset, tmp_path):
    root, ann = dataset
    rc = main(["extract", "--dataset", str(root), "--annotations", str(ann),
               "--classes", "dragon", "--out", str(tmp_path / "x")])
    assert rc == 4


def test_cli_missing_annotations_is_io_error(tmp_path):
    rc = main(["extract", "--dataset", str(tmp_path), "--annotations",
               str(tmp_path / "none.json"), "--out", str(tmp_path / "x")])
    assert rc == 3
