"""Command-line surface for the full pipeline.

Subcommands: gen-synth, train-quantiser, encode, decode, eval-recon,
pretrain, eval-pretrain, inspect. Exit codes: 0 success, 1 usage error,
2 data/format error. All stochastic subcommands take --seed, so reruns with
identical flags produce byte-identical artifacts and metric traces.

Metrics traces are tab-separated with a header line, one record per step:
  quantiser training: step, loss_total, loss_residual, loss_prediction,
                      loss_reg, entropy_cb_<n>
  pretraining:        step, loss_total, loss_masked, loss_unmasked,
                      loss_audio (dual only), acc_cb_<n>
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config as cfgmod
from . import fileio, selfsup, synth
from .errors import MvqError, UsageError
from .quantiser import (QuantiserTrainConfig, decode_frames, encode_sequence,
                        reconstruction_mse, train_quantiser)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.12g" % value
    return str(value)


def _write_trace(path, trace: list[dict]) -> None:
    if not trace:
        return
    keys = list(trace[0].keys())
    lines = ["\t".join(keys)]
    for record in trace:
        lines.append("\t".join(_fmt(record[k]) for k in keys))
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _pick(flag_value, config_value):
    return config_value if flag_value is None else flag_value


def cmd_gen_synth(args) -> int:
    cfg = synth.SynthConfig(num_states=args.states, dim=args.dim,
                            p_stay=args.p_stay, noise_sigma=args.sigma,
                            length=args.frames, seed=args.seed,
                            frame_rate_hz=args.rate, domain_tag=args.domain)
    fileio.write_features(args.out, synth.generate_synthetic(cfg))
    print(f"wrote {args.out}: T={cfg.length} d={cfg.dim} states={cfg.num_states}")
    return 0


def cmd_train_quantiser(args) -> int:
    base = cfgmod.parse_config(args.config) if args.config else cfgmod.RunConfig()
    features = fileio.read_features(args.features)
    cfg = QuantiserTrainConfig(
        n_codebooks=_pick(args.n, base.n_codebooks),
        codebook_size=_pick(args.k, base.codebook_size),
        refine_steps=_pick(args.refine_steps, base.refine_steps),
        beta=_pick(args.beta, base.beta),
        batch_size=_pick(args.batch_size, base.batch_size),
        steps=_pick(args.steps, base.steps),
        learning_rate=_pick(args.lr, base.learning_rate),
        init_noise_sigma=_pick(args.init_noise_sigma, base.init_noise_sigma),
        seed=args.seed)
    q, trace = train_quantiser(features, cfg)
    fileio.write_quantiser(args.out, q)
    if args.metrics_out:
        _write_trace(args.metrics_out, trace)
    print(f"wrote {args.out}: N={cfg.n_codebooks} K={cfg.codebook_size} "
          f"final_residual={_fmt(trace[-1]['loss_residual'])}")
    return 0


def cmd_encode(args) -> int:
    features = fileio.read_features(args.features)
    q = fileio.read_quantiser(args.quantiser)
    fileio.write_tokens(args.out, encode_sequence(features, q))
    print(f"wrote {args.out}: T={features.num_frames} N={q.n_codebooks}")
    return 0


def cmd_decode(args) -> int:
    tokens = fileio.read_tokens(args.tokens)
    q = fileio.read_quantiser(args.quantiser)
    frames = decode_frames(tokens.tokens, q)
    from .data import FeatureSequence
    fileio.write_features(args.out, FeatureSequence(frames, args.rate, args.domain))
    print(f"wrote {args.out}: T={tokens.num_frames} d={q.dim}")
    return 0


def cmd_eval_recon(args) -> int:
    features = fileio.read_features(args.features)
    q = fileio.read_quantiser(args.quantiser)
    print(f"mse {_fmt(reconstruction_mse(features, q))}")
    return 0


def cmd_pretrain(args) -> int:
    base = cfgmod.parse_config(args.config) if args.config else cfgmod.RunConfig()
    speech = fileio.read_features(args.features)
    q_speech = fileio.read_quantiser(args.quantiser)
    audio = q_audio = None
    if args.audio_features:
        if not args.audio_quantiser:
            raise UsageError("--audio-features requires --audio-quantiser")
        audio = fileio.read_features(args.audio_features)
        q_audio = fileio.read_quantiser(args.audio_quantiser)
    cfg = selfsup.SslTrainConfig(
        alpha=_pick(args.alpha, base.alpha),
        lam=_pick(getattr(args, "lambda"), base.lam),
        strategy=_pick(args.strategy, base.strategy),
        p_start=_pick(args.p_start, base.p_start),
        mask_span=_pick(args.span, base.mask_span),
        d_model=_pick(args.d_model, base.d_model),
        n_blocks=_pick(args.blocks, base.n_blocks),
        window=_pick(args.window, base.window),
        learning_rate=_pick(args.lr, base.learning_rate),
        steps=_pick(args.steps, base.steps),
        batch_frames=_pick(args.batch_frames, base.batch_size),
        speech_ratio=_pick(args.speech_ratio, base.speech_ratio),
        audio_ratio=_pick(args.audio_ratio, base.audio_ratio),
        seed=args.seed)
    print("config:")
    for key, value in (("alpha", cfg.alpha), ("lambda", cfg.lam),
                       ("strategy", cfg.strategy), ("p_start", cfg.p_start),
                       ("mask_span", cfg.mask_span), ("d_model", cfg.d_model),
                       ("n_blocks", cfg.n_blocks), ("window", cfg.window),
                       ("learning_rate", cfg.learning_rate), ("steps", cfg.steps),
                       ("batch_frames", cfg.batch_frames), ("seed", cfg.seed)):
        print(f"  {key} = {_fmt(value)}")
    model, trace = selfsup.pretrain(speech, q_speech, cfg, audio=audio, q_audio=q_audio)
    fileio.write_student(args.out, model)
    if args.metrics_out:
        _write_trace(args.metrics_out, trace)
    print(f"wrote {args.out}: final loss_total={_fmt(trace[-1]['loss_total'])}")
    return 0


def cmd_eval_pretrain(args) -> int:
    model = fileio.read_student(args.model)
    features = fileio.read_features(args.features)
    q = fileio.read_quantiser(args.quantiser)
    acc = selfsup.eval_masked_accuracy(model, features, q, args.p_start,
                                       args.span, args.seed, passes=args.passes,
                                       heads=args.heads)
    for n, value in enumerate(acc):
        print(f"acc_cb_{n} {_fmt(float(value))}")
    print(f"acc_mean {_fmt(float(acc.mean()))}")
    return 0


def cmd_inspect(args) -> int:
    header = fileio.inspect_header(args.path)
    for key, value in header.items():
        print(f"{key} {_fmt(value)}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mvqtok",
                     description="Multi-codebook quantisation and masked-token "
                                 "prediction pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate synthetic HMM features")
    p.add_argument("--states", type=int, required=True, help="number of hidden states")
    p.add_argument("--dim", type=int, required=True, help="feature dimension")
    p.add_argument("--frames", type=int, required=True, help="sequence length T")
    p.add_argument("--p-stay", type=float, default=0.9, help="self-loop probability (default 0.9)")
    p.add_argument("--sigma", type=float, default=0.1, help="emission noise std (default 0.1)")
    p.add_argument("--rate", type=float, default=100.0, help="frame rate in Hz (default 100)")
    p.add_argument("--domain", choices=("speech", "audio", "unspecified"),
                   default="unspecified", help="domain tag (default unspecified)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output .mvqf path")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train-quantiser", help="train an MVQ quantiser")
    p.add_argument("--features", required=True)
    p.add_argument("--n", type=int, default=None, help="number of codebooks (default 4)")
    p.add_argument("--k", type=int, default=None, help="codebook size (default 256)")
    p.add_argument("--steps", type=int, default=None, help="training steps (default 1000)")
    p.add_argument("--batch-size", type=int, default=None, help="minibatch frames (default 64)")
    p.add_argument("--beta", type=float, default=None, help="diversity loss scale (default 0.1)")
    p.add_argument("--refine-steps", type=int, default=None, help="refinement sweeps (default 5)")
    p.add_argument("--lr", type=float, default=None, help="Adam learning rate (default 0.01)")
    p.add_argument("--init-noise-sigma", type=float, default=None,
                   help="codebook init noise scale (default 0.01)")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output .mvqq path")
    p.add_argument("--metrics-out", default=None, help="metrics trace path ('-' for stdout)")
    p.set_defaults(func=cmd_train_quantiser)

    p = sub.add_parser("encode", help="encode features to tokens")
    p.add_argument("--features", required=True)
    p.add_argument("--quantiser", required=True)
    p.add_argument("--out", required=True, help="output .mvqt path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct features from tokens")
    p.add_argument("--tokens", required=True)
    p.add_argument("--quantiser", required=True)
    p.add_argument("--rate", type=float, default=100.0, help="frame rate for the output (default 100)")
    p.add_argument("--domain", choices=("speech", "audio", "unspecified"),
                   default="unspecified", help="domain tag (default unspecified)")
    p.add_argument("--out", required=True, help="output .mvqf path")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval-recon", help="print reconstruction MSE")
    p.add_argument("--features", required=True)
    p.add_argument("--quantiser", required=True)
    p.set_defaults(func=cmd_eval_recon)

    p = sub.add_parser("pretrain", help="masked-token-prediction pretraining")
    p.add_argument("--features", required=True, help="speech-domain features")
    p.add_argument("--quantiser", required=True, help="speech-target quantiser")
    p.add_argument("--audio-features", default=None, help="enables dual-domain training")
    p.add_argument("--audio-quantiser", default=None)
    p.add_argument("--strategy", choices=("joint", "disjoint", "asymmetrical"),
                   default=None, help="dual-domain strategy (default asymmetrical)")
    p.add_argument("--alpha", type=float, default=None,
                   help="masked/unmasked loss weight (default 0.5)")
    p.add_argument("--lambda", type=float, default=None, dest="lambda",
                   help="audio-target loss weight (default 0.1)")
    p.add_argument("--p-start", type=float, default=None, help="mask span start prob (default 0.065)")
    p.add_argument("--span", type=int, default=None, help="mask span length (default 10)")
    p.add_argument("--d-model", type=int, default=None, help="encoder width (default 64)")
    p.add_argument("--blocks", type=int, default=None, help="context blocks (default 2)")
    p.add_argument("--window", type=int, default=None, help="conv window, odd (default 9)")
    p.add_argument("--lr", type=float, default=None, help="Adam learning rate (default 0.001)")
    p.add_argument("--steps", type=int, default=None, help="training steps (default 1000)")
    p.add_argument("--batch-frames", type=int, default=None, help="frames per step (default 64)")
    p.add_argument("--speech-ratio", type=int, default=None, help="speech batches per cycle (default 1)")
    p.add_argument("--audio-ratio", type=int, default=None, help="audio batches per cycle (default 1)")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output .mvqm path")
    p.add_argument("--metrics-out", default=None, help="metrics trace path ('-' for stdout)")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("eval-pretrain", help="masked top-1 accuracy of a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--quantiser", required=True)
    p.add_argument("--heads", choices=("speech", "audio"), default="speech")
    p.add_argument("--p-start", type=float, default=0.065)
    p.add_argument("--span", type=int, default=10)
    p.add_argument("--passes", type=int, default=4, help="independent mask draws (default 4)")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_eval_pretrain)

    p = sub.add_parser("inspect", help="print header fields of a binary file")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MvqError, ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
