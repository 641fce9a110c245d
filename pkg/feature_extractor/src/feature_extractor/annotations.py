"""Annotation file parsing.

The annotation file is JSON:

    {
      "classes": ["aeroplane", "bicycle", ...],
      "images": [
        {"file": "img_001.png",
         "boxes": [{"class_id": 0, "xmin": 10, "ymin": 4,
                    "xmax": 120, "ymax": 80}, ...]},
        ...
      ]
    }

Box coordinates are pixels in the original image, xmax/ymax exclusive.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass


class AnnotationError(ValueError):
    """The annotation file is malformed."""


@dataclass(frozen=True)
class Box:
    class_id: int
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise AnnotationError(f"empty box {self!r}")


@dataclass(frozen=True)
class AnnotatedImage:
    path: str
    boxes: tuple[Box, ...]

    def boxes_for(self, class_id: int) -> tuple[Box, ...]:
        return tuple(b for b in self.boxes if b.class_id == class_id)


def load_annotations(path: str | os.PathLike, image_root: str | None = None):
    """Returns (class_names, images) from an annotation JSON file.

    Image paths in the file are resolved against ``image_root`` (default:
    the annotation file's directory).
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "classes" not in doc or "images" not in doc:
        raise AnnotationError(f"{path}: expected top-level 'classes' and 'images'")
    class_names = list(doc["classes"])
    base = image_root if image_root is not None else os.path.dirname(os.fspath(path))
    images = []
    for entry in doc["images"]:
        try:
            boxes = tuple(
                Box(class_id=int(b["class_id"]), xmin=float(b["xmin"]),
                    ymin=float(b["ymin"]), xmax=float(b["xmax"]),
                    ymax=float(b["ymax"]))
                for b in entry.get("boxes", []))
            for box in boxes:
                if not 0 <= box.class_id < len(class_names):
                    raise AnnotationError(
                        f"box class_id {box.class_id} outside the class list")
            images.append(AnnotatedImage(
                path=os.path.join(base, entry["file"]), boxes=boxes))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, AnnotationError):
                raise
            raise AnnotationError(
                f"{path}: malformed image entry {entry!r}") from exc
    return class_names, images
