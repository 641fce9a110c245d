"""The benchmark file format, end to end on a miniature pair collection.

The real Tuebingen cause-effect pairs (version 1.0) are a hundred
hand-collected bivariate datasets; this demo fabricates four pairs in the
same on-disk layout (pairNNNN.txt + pairmeta.txt), loads them with the
benchmark loader, and scores them with a quickly trained model. Point
`ncc-lab eval-tuebingen --pairs <dir>` at the real collection to
reproduce the headline accuracy.
"""

import os

import numpy as np

from ncc_lab import TrainConfig, load_model, train
from ncc_lab.bench import evaluate_tuebingen, load_tuebingen, write_tuebingen_report
from ncc_lab.synthgen import GeneratorConfig

OUT = os.path.join(os.path.dirname(__file__), "out", "tuebingen_toy")
CKPT = os.path.join(os.path.dirname(__file__), "..", "artifacts", "checkpoints",
                    "ncc_default_seed0.ckpt")
os.makedirs(OUT, exist_ok=True)

# Four fabricated cause-effect pairs with known X -> Y ground truth.
rng = np.random.default_rng(3)
meta = []
for pid, mech in ((1, lambda x: x ** 2), (2, np.tanh),
                  (3, lambda x: np.abs(x)), (4, np.exp)):
    x = rng.standard_normal(800)
    y = mech(x) + 0.2 * rng.standard_normal(800)
    np.savetxt(os.path.join(OUT, f"pair{pid:04d}.txt"),
               np.column_stack([x, y]), fmt="%.17g")
    meta.append(f"{pid:04d} 1 1 2 2 1.0")
with open(os.path.join(OUT, "pairmeta.txt"), "w") as fh:
    fh.write("\n".join(meta) + "\n")

pairs = load_tuebingen(OUT)
print(f"loaded {len(pairs)} pairs; "
      f"sizes {[p.x.size for p in pairs]}, weights {[p.weight for p in pairs]}")

if os.path.exists(CKPT):
    print("\nusing the committed full-scale checkpoint")
    model = load_model(CKPT)
else:
    print("\ntraining a small stand-in model (a few minutes; the full-scale "
          "checkpoint under artifacts/ is much stronger)...")
    model, _ = train(TrainConfig(iterations=2500, hidden=32, seed=0,
                                 generator=GeneratorConfig(points=300)))

report = evaluate_tuebingen(model, pairs)
for row in report.results:
    print(f"  pair {row.id}: score {row.score:.3f} -> {row.decision} "
          f"({'correct' if row.correct == 1.0 else 'wrong' if row.correct == 0 else 'tie'})")
print(f"weighted accuracy {report.weighted_accuracy:.2f}, "
      f"unweighted {report.unweighted_accuracy:.2f}")

write_tuebingen_report(os.path.join(OUT, "tuebingen_report.csv"), report)
print(f"report CSV under {OUT}")
