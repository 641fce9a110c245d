"""featx: extract feature bundles from an annotated image dataset.

    featx extract --dataset <dir> --annotations <file> \
                  --classes <list|all> --out <dir>

The annotation file (JSON, see annotations.py) lists images relative to
the dataset directory, class names, and bounding boxes. Bundles land as
one class_<k>/ directory of four CSVs plus manifest.csv — the exchange
format consumed by `ncc-lab score` / `ncc-lab report`.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from feature_extractor.annotations import AnnotationError, load_annotations
from feature_extractor.backbone import build_backbone
from feature_extractor.extract import extract_bundles
from feature_extractor.head import build_head


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="featx")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="emit feature-bundle CSVs")
    p.add_argument("--dataset", required=True, help="image directory")
    p.add_argument("--annotations", required=True, help="annotation JSON file")
    p.add_argument("--classes", default="all",
                   help="comma-separated class names, or 'all'")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--weights", default="random",
                   help="'random', 'imagenet', or a state-dict path")
    p.add_argument("--head-epochs", type=int, default=20, dest="head_epochs",
                   help="epochs for the log-odds head (0 = untrained)")
    p.add_argument("--batch-size", type=int, default=8, dest="batch_size")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("FEATX_LOG", "INFO").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        class_names, images = load_annotations(args.annotations,
                                               image_root=args.dataset)
        if args.classes == "all":
            class_ids = list(range(len(class_names)))
        else:
            wanted = [c.strip() for c in args.classes.split(",")]
            missing = [c for c in wanted if c not in class_names]
            if missing:
                raise AnnotationError(f"unknown classes: {', '.join(missing)}")
            class_ids = [class_names.index(c) for c in wanted]
        backbone = build_backbone(args.weights, seed=args.seed)
        head = build_head(len(class_names), seed=args.seed)
        result = extract_bundles(images, class_names, class_ids, backbone, head,
                                 args.out, head_epochs=args.head_epochs,
                                 batch_size=args.batch_size, seed=args.seed)
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (AnnotationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    for class_id, count in sorted(result.class_counts.items()):
        name = class_names[class_id]
        print(f"class {class_id} ({name}): {count} images")
    if result.flagged:
        print(f"{len(result.flagged)} image(s) had no box inside the central crop")
    if result.failures:
        print(f"{len(result.failures)} image(s) failed, see failures.csv",
              file=sys.stderr)
    print(f"bundles written under {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
