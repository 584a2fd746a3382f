#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Convert torchvision's pretrained VGG-19 weights into the binary format the
perceptual-loss extractor reads (see src/extractor.cpp).

Usage:
    python3 tools/export_vgg19_weights.py vgg19.weights

Requires torch + torchvision with download access to the pretrained model.
"""
import argparse
import struct
import sys

NAMES = [
    "conv1_1", "conv1_2",
    "conv2_1", "conv2_2",
    "conv3_1", "conv3_2", "conv3_3", "conv3_4",
    "conv4_1", "conv4_2", "conv4_3", "conv4_4",
    "conv5_1", "conv5_2", "conv5_3", "conv5_4",
]
MEAN = (0.485, 0.456, 0.406)
STD = (0.229, 0.224, 0.225)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", help="destination weight file")
    args = parser.parse_args()

    import torch
    import torchvision

    model = torchvision.models.vgg19(
        weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1
    )
    convs = [m for m in model.features if isinstance(m, torch.nn.Conv2d)]
    if len(convs) != len(NAMES):
        sys.exit(f"expected {len(NAMES)} conv layers, found {len(convs)}")

    with open(args.output, "wb") as f:
        f.write(b"NUIGOVG1")
        f.write(struct.pack("<II", 1, len(NAMES)))
        f.write(struct.pack("<6f", *MEAN, *STD))
        for name, conv in zip(NAMES, convs):
            w = conv.weight.detach().cpu().numpy().astype("<f4")
            b = conv.bias.detach().cpu().numpy().astype("<f4")
            f.write(struct.pack("<I", len(name)))
            f.write(name.encode("ascii"))
            f.write(struct.pack("<4I", *w.shape))
            f.write(w.tobytes())
            f.write(b.tobytes())
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
