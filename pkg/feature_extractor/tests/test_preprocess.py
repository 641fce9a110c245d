import numpy as np
import pytest
import torch
from PIL import Image

from feature_extractor.annotations import AnnotatedImage, Box
from feature_extractor.preprocess import (
    CROP,
    NoBoxForClass,
    UndecodableImage,
    blackout,
    boxes_to_mask,
    normalize,
    preprocess_image,
)


def make_image(path, size=(320, 240), color=(200, 30, 30)):
    img = Image.new("RGB", size, color)
    # a brighter block so crops are not constant
    img.paste((30, 200, 30), (40, 40, 160, 160))
    img.save(path)
    return path


def annotated(path, boxes):
    return AnnotatedImage(path=str(path), boxes=tuple(boxes))


def test_normalize_shape_and_range(tmp_path):
    path = make_image(tmp_path / "img.png")
    with Image.open(path) as img:
        tensor = normalize(img.convert("RGB"))
    assert tensor.shape == (3, CROP, CROP)
    assert torch.isfinite(tensor).all()


def test_full_image_box_means_all_zero_context(tmp_path):
    path = make_image(tmp_path / "img.png", size=(300, 260))
    full_box = Box(class_id=0, xmin=0, ymin=0, xmax=300, ymax=260)
    pre = preprocess_image(annotated(path, [full_box]), 0)
    assert torch.all(pre.context_crop == 0.0)
    assert pre.object_visible
    torch.testing.assert_close(pre.object_crop, pre.original)


def test_box_outside_crop_flags_image(tmp_path):
    # wide image: the center crop keeps x in [113, 337) of the resized image;
    # a box at the far left is cropped away entirely
    path = make_image(tmp_path / "img.png", size=(600, 300))
    left_box = Box(class_id=0, xmin=0, ymin=0, xmax=50, ymax=300)
    pre = preprocess_image(annotated(path, [left_box]), 0)
    assert not pre.object_visible
    assert torch.all(pre.object_crop == 0.0)
    torch.testing.assert_close(pre.context_crop, pre.original)


def test_original_untouched_by_blackout(tmp_path):
    path = make_image(tmp_path / "img.png")
    box = Box(class_id=0, xmin=10, ymin=10, xmax=100, ymax=100)
    pre = preprocess_image(annotated(path, [box]), 0)
    with Image.open(path) as img:
        reference = normalize(img.convert("RGB"))
    torch.testing.assert_close(pre.original, reference)


def test_blackout_idempotent(tmp_path):
    path = make_image(tmp_path / "img.png")
    box = Box(class_id=0, xmin=20, ymin=30, xmax=150, ymax=180)
    pre = preprocess_image(annotated(path, [box]), 0)
    again = blackout(pre.object_crop, pre.mask, keep_inside=True)
    torch.testing.assert_close(again, pre.object_crop)
    again = blackout(pre.context_crop, pre.mask, keep_inside=False)
    torch.testing.assert_close(again, pre.context_crop)


def test_object_and_context_partition_the_crop(tmp_path):
    path = make_image(tmp_path / "img.png")
    box = Box(class_id=0, xmin=50, ymin=40, xmax=200, ymax=180)
    pre = preprocess_image(annotated(path, [box]), 0)
    torch.testing.assert_close(pre.object_crop + pre.context_crop, pre.original)


def test_union_of_multiple_boxes(tmp_path):
    boxes = [Box(class_id=0, xmin=0, ymin=0, xmax=60, ymax=60),
             Box(class_id=0, xmin=100, ymin=100, xmax=200, ymax=200)]
    mask = boxes_to_mask(boxes, 224, 224)
    assert mask[10, 10] and mask[150, 150]
    assert not mask[10, 200]


def test_no_box_for_class_raises(tmp_path):
    path = make_image(tmp_path / "img.png")
    box = Box(class_id=1, xmin=0, ymin=0, xmax=50, ymax=50)
    with pytest.raises(NoBoxForClass):
        preprocess_image(annotated(path, [box]), class_id=0)


def test_undecodable_image_raises(tmp_path):
    path = tmp_path / "junk.png"
    path.write_bytes(b"not an image at all")
    box = Box(class_id=0, xmin=0, ymin=0, xmax=10, ymax=10)
    with pytest.raises(UndecodableImage):
        preprocess_image(annotated(path, [box]), 0)
