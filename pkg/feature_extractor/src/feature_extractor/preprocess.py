"""Image normalization and bounding-box blackout.

Every image is resized so its shortest side is 224 pixels, center-cropped
to 224 x 224, and normalized with the standard ImageNet statistics. The
blackout variants are produced *after* normalization so the blacked-out
pixels are true zeros in the network's input space:

* object image  -- pixels outside the (union of) boxes zeroed,
* context image -- pixels inside the boxes zeroed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from feature_extractor.annotations import AnnotatedImage, Box

CROP = 224
IMAGENET_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)
IMAGENET_STD = torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)


class UndecodableImage(ValueError):
    """The image file cannot be decoded."""


class NoBoxForClass(ValueError):
    """The image carries no bounding box for the requested class."""


@dataclass(frozen=True)
class PreprocessedImage:
    """Normalized crops plus bookkeeping for one (image, class) pair."""

    original: torch.Tensor   # 3 x 224 x 224
    object_crop: torch.Tensor
    context_crop: torch.Tensor
    mask: torch.Tensor       # bool 224 x 224, True inside the boxes
    object_visible: bool     # False when no box intersects the crop


def _load_rgb(path: str | os.PathLike) -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except Exception as exc:  # PIL raises a zoo of types
        raise UndecodableImage(f"cannot decode {path}: {exc}") from exc


def _resize_crop_geometry(width: int, height: int):
    """Returns (scale, left, top) of the shortest-side-224 center crop."""
    scale = CROP / min(width, height)
    new_w, new_h = round(width * scale), round(height * scale)
    return scale, (new_w - CROP) // 2, (new_h - CROP) // 2, new_w, new_h


def normalize(image: Image.Image) -> torch.Tensor:
    """Resize, center-crop, scale to [0, 1], normalize per channel."""
    scale, left, top, new_w, new_h = _resize_crop_geometry(*image.size)
    resized = image.resize((new_w, new_h), Image.BILINEAR)
    cropped = resized.crop((left, top, left + CROP, top + CROP))
    arr = np.asarray(cropped, dtype=np.float32) / 255.0
    tensor = torch.from_numpy(arr).permute(2, 0, 1)
    return (tensor - IMAGENET_MEAN) / IMAGENET_STD


def boxes_to_mask(boxes, width: int, height: int) -> torch.Tensor:
    """Union of the boxes as a crop-space boolean mask (True = object)."""
    scale, left, top, _, _ = _resize_crop_geometry(width, height)
    mask = torch.zeros(CROP, CROP, dtype=torch.bool)
    for box in boxes:
        x0 = max(0, round(box.xmin * scale) - left)
        x1 = min(CROP, round(box.xmax * scale) - left)
        y0 = max(0, round(box.ymin * scale) - top)
        y1 = min(CROP, round(box.ymax * scale) - top)
        if x1 > x0 and y1 > y0:
            mask[y0:y1, x0:x1] = True
    return mask


def blackout(normalized: torch.Tensor, mask: torch.Tensor, keep_inside: bool):
    """Zero the pixels outside (keep_inside) or inside (not keep_inside)
    the mask. Idempotent: applying the same blackout twice equals once."""
    keep = mask if keep_inside else ~mask
    return normalized * keep.unsqueeze(0)


def preprocess_image(annotated: AnnotatedImage, class_id: int) -> PreprocessedImage:
    """Normalized original / object / context crops for one class.

    Raises NoBoxForClass when the image has no box of the class at all;
    when boxes exist but none intersects the central crop, the object
    crop is legitimately all zeros and ``object_visible`` is False.
    """
    boxes = annotated.boxes_for(class_id)
    if not boxes:
        raise NoBoxForClass(f"{annotated.path}: no box for class {class_id}")
    image = _load_rgb(annotated.path)
    original = normalize(image)
    mask = boxes_to_mask(boxes, *image.size)
    return PreprocessedImage(
        original=original,
        object_crop=blackout(original, mask, keep_inside=True),
        context_crop=blackout(original, mask, keep_inside=False),
        mask=mask,
        object_visible=bool(mask.any()),
    )
