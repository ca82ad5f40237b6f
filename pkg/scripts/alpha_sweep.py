#!/usr/bin/env python3
"""Sweep the masked/unmasked loss weight alpha and report masked accuracy.

Reproduces the qualitative ablation that pure unmasked prediction
(alpha = 0) makes the pretext task too easy to learn anything useful,
while weighting the masked positions recovers predictive context models.

Usage:
    python3 scripts/alpha_sweep.py [--alphas 0.0 0.25 0.5 0.75 1.0] [--steps 3000]
"""

import argparse

from mvqtok.quantiser import QuantiserTrainConfig, train_quantiser
from mvqtok.selfsup import SslTrainConfig, eval_masked_accuracy, pretrain
from mvqtok.synth import SynthConfig, generate_synthetic


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--alphas", type=float, nargs="+",
                        default=[0.0, 0.25, 0.5, 0.75, 1.0])
    parser.add_argument("--steps", type=int, default=3000)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    data = generate_synthetic(SynthConfig(num_states=8, dim=16, p_stay=0.95,
                                          noise_sigma=0.02, length=5000, seed=42))
    quantiser, _ = train_quantiser(data, QuantiserTrainConfig(
        n_codebooks=4, codebook_size=8, steps=1000, batch_size=256, seed=7))

    print("alpha\tmasked_acc\tfinal_loss")
    for alpha in args.alphas:
        cfg = SslTrainConfig(alpha=alpha, steps=args.steps, seed=args.seed)
        model, trace = pretrain(data, quantiser, cfg)
        acc = eval_masked_accuracy(model, data, quantiser, cfg.p_start,
                                   cfg.mask_span, seed=11, passes=4)
        print(f"{alpha:g}\t{acc.mean():.4f}\t{trace[-1]['loss_total']:.4f}")


if __name__ == "__main__":
    main()
