"""Log-odds classifier head over backbone features.

Two hidden layers of 512 units map a 512-dim feature vector to one logit
per class. Images can contain several classes at once, so the head is
trained as independent binary classifiers (sigmoid + binary
cross-entropy); the emitted log odds are the raw pre-sigmoid logits.
"""

from __future__ import annotations

import torch
from torch import nn

from feature_extractor.backbone import FEATURE_DIM

HIDDEN = 512


def build_head(n_classes: int, seed: int = 0) -> nn.Module:
    torch.manual_seed(seed)
    return nn.Sequential(
        nn.Linear(FEATURE_DIM, HIDDEN), nn.ReLU(),
        nn.Linear(HIDDEN, HIDDEN), nn.ReLU(),
        nn.Linear(HIDDEN, n_classes),
    )


def train_head(head: nn.Module, features: torch.Tensor, labels: torch.Tensor,
               epochs: int = 20, lr: float = 1e-3, seed: int = 0) -> list[float]:
    """Fit the head on (features, multi-hot labels); returns epoch losses."""
    torch.manual_seed(seed)
    optimizer = torch.optim.Adam(head.parameters(), lr=lr)
    criterion = nn.BCEWithLogitsLoss()
    head.train()
    losses = []
    for _ in range(epochs):
        optimizer.zero_grad()
        loss = criterion(head(features), labels)
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
    head.eval()
    return losses


@torch.no_grad()
def log_odds(head: nn.Module, features: torch.Tensor) -> torch.Tensor:
    head.eval()
    return head(features)
