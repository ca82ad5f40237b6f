#!/usr/bin/env python3
"""Sweep the number of codebooks N and report reconstruction quality.

More parallel codebooks consistently lower reconstruction MSE at fixed K:
the representable vocabulary grows as K^N while the parameter count only
grows linearly in N.

Usage:
    python3 scripts/codebook_sweep.py [--counts 1 2 4 8] [--steps 2000]
"""

import argparse

import numpy as np

from mvqtok.quantiser import (QuantiserTrainConfig, encode_sequence,
                              reconstruction_mse, train_quantiser,
                              usage_entropy)
from mvqtok.synth import SynthConfig, generate_synthetic


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--counts", type=int, nargs="+", default=[1, 2, 4, 8])
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    data = generate_synthetic(SynthConfig(num_states=8, dim=16, p_stay=0.95,
                                          noise_sigma=0.1, length=5000, seed=42))

    print("n_codebooks\tmse\tmean_entropy/lnK")
    for n in args.counts:
        cfg = QuantiserTrainConfig(n_codebooks=n, codebook_size=args.k,
                                   steps=args.steps, batch_size=256,
                                   seed=args.seed)
        quantiser, _ = train_quantiser(data, cfg)
        mse = reconstruction_mse(data, quantiser)
        ent = usage_entropy(encode_sequence(data, quantiser).tokens, args.k)
        print(f"{n}\t{mse:.5f}\t{ent.mean() / np.log(args.k):.3f}")


if __name__ == "__main__":
    main()
