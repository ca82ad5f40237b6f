#!/usr/bin/env python3
"""Compare dual-domain training strategies on paired synthetic domains.

Trains one student per strategy (joint / disjoint / asymmetrical) on a
speech-tagged and an audio-tagged synthetic stream with separate target
quantisers, then reports masked accuracy against both target sets.

Usage:
    python3 scripts/strategy_compare.py [--steps 2000]
"""

import argparse

from mvqtok.data import FeatureSequence
from mvqtok.quantiser import QuantiserTrainConfig, train_quantiser
from mvqtok.selfsup import SslTrainConfig, eval_masked_accuracy, pretrain
from mvqtok.synth import SynthConfig, generate_synthetic


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--lam", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    speech = generate_synthetic(SynthConfig(num_states=8, dim=16, p_stay=0.95,
                                            noise_sigma=0.02, length=5000,
                                            seed=42, domain_tag="speech"))
    audio = generate_synthetic(SynthConfig(num_states=6, dim=16, p_stay=0.95,
                                           noise_sigma=0.02, length=5000,
                                           seed=43, domain_tag="audio"))
    q_cfg = QuantiserTrainConfig(n_codebooks=4, codebook_size=8, steps=1000,
                                 batch_size=256, seed=7)
    q_speech, _ = train_quantiser(speech, q_cfg)
    q_audio, _ = train_quantiser(FeatureSequence(audio.frames), q_cfg)

    print("strategy\tacc_speech_targets\tacc_audio_targets")
    for strategy in ("joint", "disjoint", "asymmetrical"):
        cfg = SslTrainConfig(strategy=strategy, lam=args.lam, steps=args.steps,
                             seed=args.seed)
        model, _ = pretrain(speech, q_speech, cfg, audio=audio, q_audio=q_audio)
        acc_s = eval_masked_accuracy(model, speech, q_speech, cfg.p_start,
                                     cfg.mask_span, seed=11, passes=4,
                                     heads="speech")
        acc_a = eval_masked_accuracy(model, audio, q_audio, cfg.p_start,
                                     cfg.mask_span, seed=11, passes=4,
                                     heads="audio")
        print(f"{strategy}\t{acc_s.mean():.4f}\t{acc_a.mean():.4f}")


if __name__ == "__main__":
    main()
