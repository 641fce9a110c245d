"""512-dim features from an 18-layer residual network.

The feature vector is the global average pool of the network's last
hidden representation taken *before* its final rectification, so the
values have full support on the real line (the downstream coefficient
was trained on continuous data, not on clipped activations).
"""

from __future__ import annotations

import torch
from torchvision.models import resnet18

FEATURE_DIM = 512


def build_backbone(weights: str = "random", seed: int = 0) -> torch.nn.Module:
    """Construct the feature network.

    weights: "random" (seeded initialization, for smoke pipelines),
    "imagenet" (torchvision's pretrained weights; needs download access),
    or a path to a state-dict file.
    """
    if weights == "imagenet":
        from torchvision.models import ResNet18_Weights
        model = resnet18(weights=ResNet18_Weights.IMAGENET1K_V1)
    else:
        torch.manual_seed(seed)
        model = resnet18(weights=None)
        if weights != "random":
            state = torch.load(weights, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
    model.eval()
    return model


@torch.no_grad()
def features(model: torch.nn.Module, batch: torch.Tensor) -> torch.Tensor:
    """Pre-nonlinearity features for a batch of normalized crops.

    Runs the standard forward up to the last residual block, then stops
    right after that block's residual addition (before its ReLU) and
    average-pools to FEATURE_DIM values per image.
    """
    x = model.conv1(batch)
    x = model.bn1(x)
    x = model.relu(x)
    x = model.maxpool(x)
    x = model.layer1(x)
    x = model.layer2(x)
    x = model.layer3(x)
    x = model.layer4[0](x)
    block = model.layer4[1]
    identity = x
    out = block.conv1(x)
    out = block.bn1(out)
    out = block.relu(out)
    out = block.conv2(out)
    out = block.bn2(out)
    if block.downsample is not None:
        identity = block.downsample(x)
    pre_activation = out + identity  # the last hidden representation
    pooled = model.avgpool(pre_activation)
    return torch.flatten(pooled, 1)
