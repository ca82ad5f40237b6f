"""Masked fine-grained token prediction.

Frames are replaced by a learnable mask embedding, a small contextual encoder
(input projection plus conv-tanh-residual blocks) produces representations,
and per-codebook linear heads predict the quantised target token at every
frame. The single-domain loss weights masked and unmasked frames by alpha;
the dual-domain loss combines speech-target and audio-target losses under the
Joint / Disjoint / Asymmetrical strategies with weight lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FeatureSequence, TokenSequence
from .errors import ConfigurationError
from .numerics import Adam, make_rng
from .quantiser import Quantiser, encode_sequence

STRATEGIES = ("joint", "disjoint", "asymmetrical")


# ---------------------------------------------------------------------------
# masking

@dataclass
class MaskSpec:
    """Sorted, deduplicated set of masked frame indices plus policy params."""

    indices: np.ndarray
    p_start: float
    span: int

    def __post_init__(self) -> None:
        self.indices = np.unique(np.asarray(self.indices, dtype=np.int64))


def sample_mask(num_frames: int, p_start: float, span: int,
                rng: np.random.Generator | int) -> MaskSpec:
    """Span masking: each frame starts a span of `span` frames with prob p_start.

    Spans are clipped to [0, num_frames); overlaps merge. `rng` may be a seed.
    """
    if not 0.0 <= p_start <= 1.0:
        raise ValueError("p_start must be in [0, 1]")
    if span < 1:
        raise ValueError("span must be >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = make_rng(int(rng))
    starts = rng.random(num_frames) < p_start
    masked = np.zeros(num_frames, dtype=bool)
    for off in range(span):
        masked[off:] |= starts[:num_frames - off] if off else starts
    return MaskSpec(np.nonzero(masked)[0], p_start, span)


def apply_mask(frames: np.ndarray, mask: MaskSpec, mask_embedding: np.ndarray) -> np.ndarray:
    """Replace masked frames with the mask embedding; the input is not mutated."""
    frames = np.asarray(frames, dtype=np.float64)
    mask_embedding = np.asarray(mask_embedding, dtype=np.float64)
    if frames.ndim != 2 or mask_embedding.shape != (frames.shape[1],):
        raise ValueError("mask embedding dimension must match frame dimension")
    if mask.indices.size and mask.indices[-1] >= frames.shape[0]:
        raise ValueError("mask index beyond sequence length")
    out = frames.copy()
    out[mask.indices] = mask_embedding
    return out


# ---------------------------------------------------------------------------
# student encoder

@dataclass
class StudentModel:
    """Mask embedding, input projection, conv-tanh-residual blocks, heads.

    Each context block computes h + tanh(conv(h)) with a same-length temporal
    convolution of odd window w, so the receptive field after L blocks is
    L*(w-1)/2 frames on each side. Heads are one (K, d_model) matrix per
    codebook; `heads_audio` is present only in dual-domain setups.
    """

    mask_embedding: np.ndarray
    proj_w: np.ndarray                # (d_model, d_in)
    proj_b: np.ndarray                # (d_model,)
    conv_w: list                      # each (d_model, window, d_model)
    conv_b: list                      # each (d_model,)
    heads_speech: np.ndarray          # (N_s, K_s, d_model)
    heads_audio: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.conv_w and self.conv_w[0].shape[1] % 2 == 0:
            raise ValueError("conv window must be odd")

    @property
    def d_in(self) -> int:
        return self.proj_w.shape[1]

    @property
    def d_model(self) -> int:
        return self.proj_w.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.conv_w)

    @property
    def window(self) -> int:
        return self.conv_w[0].shape[1] if self.conv_w else 1

    @property
    def receptive_radius(self) -> int:
        return self.n_blocks * (self.window - 1) // 2

    def parameters(self) -> dict[str, np.ndarray]:
        params = {"mask_embedding": self.mask_embedding,
                  "proj_w": self.proj_w, "proj_b": self.proj_b}
        for i in range(self.n_blocks):
            params[f"conv_w_{i}"] = self.conv_w[i]
            params[f"conv_b_{i}"] = self.conv_b[i]
        params["heads_speech"] = self.heads_speech
        if self.heads_audio is not None:
            params["heads_audio"] = self.heads_audio
        return params


def init_student(d_in: int, d_model: int, n_blocks: int, window: int,
                 n_heads_speech: int, k_speech: int,
                 n_heads_audio: int = 0, k_audio: int = 0,
                 seed: int = 0) -> StudentModel:
    if window % 2 == 0 or window < 1:
        raise ValueError("window must be odd and positive")
    rng = make_rng(seed, stream=7)
    conv_w = []
    conv_b = []
    for _ in range(n_blocks):
        conv_w.append(rng.normal(size=(d_model, window, d_model)) * (0.5 / np.sqrt(window * d_model)))
        conv_b.append(np.zeros(d_model))
    heads_audio = None
    if n_heads_audio:
        heads_audio = rng.normal(size=(n_heads_audio, k_audio, d_model)) * 0.01
    return StudentModel(
        mask_embedding=rng.normal(size=d_in) * 0.1,
        proj_w=rng.normal(size=(d_model, d_in)) / np.sqrt(d_in),
        proj_b=np.zeros(d_model),
        conv_w=conv_w,
        conv_b=conv_b,
        heads_speech=rng.normal(size=(n_heads_speech, k_speech, d_model)) * 0.01,
        heads_audio=heads_audio,
    )


def student_forward(masked_frames: np.ndarray, model: StudentModel
                    ) -> tuple[np.ndarray, dict]:
    """Run the encoder; returns (H, cache) with intermediates for backprop."""
    x = np.asarray(masked_frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d_in:
        raise ValueError("input shape does not match model d_in")
    t_len = x.shape[0]
    h = x @ model.proj_w.T + model.proj_b
    blocks = []
    half = (model.window - 1) // 2
    for wc, bc in zip(model.conv_w, model.conv_b):
        padded = np.zeros((t_len + model.window - 1, model.d_model))
        padded[half:half + t_len] = h
        windows = np.lib.stride_tricks.sliding_window_view(padded, model.window, axis=0)
        # (T, d_model, w) -> (T, w * d_model) matching wc.reshape(d_model, -1)
        unfolded = np.ascontiguousarray(windows.transpose(0, 2, 1)).reshape(t_len, -1)
        act = np.tanh(unfolded @ wc.reshape(model.d_model, -1).T + bc)
        blocks.append((unfolded, act))
        h = h + act
    return h, {"input": x, "blocks": blocks}


def student_backward(cache: dict, grad_h: np.ndarray, model: StudentModel
                     ) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Backprop through the encoder.

    Returns (param_grads, grad_input); the mask-embedding gradient is the sum
    of grad_input rows at masked positions and is assembled by the caller.
    """
    t_len = grad_h.shape[0]
    half = (model.window - 1) // 2
    grads: dict[str, np.ndarray] = {}
    dh = grad_h.copy()
    for i in range(model.n_blocks - 1, -1, -1):
        unfolded, act = cache["blocks"][i]
        wc = model.conv_w[i]
        da = dh * (1.0 - act * act)
        grads[f"conv_b_{i}"] = da.sum(axis=0)
        grads[f"conv_w_{i}"] = (da.T @ unfolded).reshape(wc.shape)
        dunf = (da @ wc.reshape(model.d_model, -1)).reshape(t_len, model.window, model.d_model)
        dpad = np.zeros((t_len + model.window - 1, model.d_model))
        for off in range(model.window):
            dpad[off:off + t_len] += dunf[:, off, :]
        dh = dh + dpad[half:half + t_len]
    x = cache["input"]
    grads["proj_w"] = dh.T @ x
    grads["proj_b"] = dh.sum(axis=0)
    return grads, dh @ model.proj_w


def head_logits(h: np.ndarray, head: np.ndarray) -> np.ndarray:
    """Logits for one prediction head: (T, K) = H @ W^T."""
    if h.shape[1] != head.shape[1]:
        raise ValueError("head width does not match d_model")
    return h @ head.T


# ---------------------------------------------------------------------------
# losses

@dataclass
class SingleLossResult:
    total: float
    masked_parts: np.ndarray      # (N,) summed CE on masked frames per codebook
    unmasked_parts: np.ndarray    # (N,)
    grad_heads: np.ndarray        # (N, K, d_model)
    grad_h: np.ndarray            # (T, d_model)
    logits: np.ndarray            # (N, T, K)

    @property
    def masked_total(self) -> float:
        """(1/N) sum of per-codebook masked CE sums."""
        return float(self.masked_parts.sum() / len(self.masked_parts))

    @property
    def unmasked_total(self) -> float:
        return float(self.unmasked_parts.sum() / len(self.unmasked_parts))


def single_domain_loss(h: np.ndarray, targets: np.ndarray, mask: MaskSpec,
                       heads: np.ndarray, alpha: float) -> SingleLossResult:
    """Average over codebooks of alpha-weighted masked/unmasked cross-entropy.

    total = (1/N) sum_n [alpha * sum_{t in M} CE + (1 - alpha) * sum_{t not in M} CE].
    Sums over frames are raw (not length-normalised); gradients flow to the
    heads and, through H, to the encoder.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    targets = np.asarray(targets, dtype=np.int64)
    t_len = h.shape[0]
    n_cb, k_sz, _ = heads.shape
    if targets.shape != (t_len, n_cb):
        raise ValueError("targets must have shape (T, N)")
    if targets.size and (targets.min() < 0 or targets.max() >= k_sz):
        raise IndexError("target token out of range [0, K)")

    logits = np.einsum("td,nkd->ntk", h, heads)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(logp)

    ncols = np.arange(n_cb)[:, None]
    tcols = np.arange(t_len)[None, :]
    ce = -logp[ncols, tcols, targets.T]          # (N, T)

    masked_flags = np.zeros(t_len, dtype=bool)
    masked_flags[mask.indices] = True
    masked_parts = ce[:, masked_flags].sum(axis=1)
    unmasked_parts = ce[:, ~masked_flags].sum(axis=1)
    total = float((alpha * masked_parts + (1.0 - alpha) * unmasked_parts).sum() / n_cb)

    frame_w = np.where(masked_flags, alpha, 1.0 - alpha)
    dlogits = probs.copy()
    dlogits[ncols, tcols, targets.T] -= 1.0
    dlogits *= frame_w[None, :, None] / n_cb
    grad_heads = np.einsum("ntk,td->nkd", dlogits, h)
    grad_h = np.einsum("ntk,nkd->td", dlogits, heads)
    return SingleLossResult(total, masked_parts, unmasked_parts, grad_heads, grad_h, logits)


@dataclass
class DualLossResult:
    total: float
    grad_heads_speech: np.ndarray
    grad_heads_audio: np.ndarray
    grad_h: np.ndarray
    speech: SingleLossResult | None
    audio: SingleLossResult | None
    audio_weight: float


def dual_domain_loss(h: np.ndarray, targets_speech: np.ndarray | None,
                     targets_audio: np.ndarray | None, mask: MaskSpec,
                     heads_speech: np.ndarray, heads_audio: np.ndarray | None,
                     is_audio: bool, lam: float, strategy: str,
                     alpha: float = 0.5) -> DualLossResult:
    """Combine speech-target and audio-target single-domain losses.

    asymmetrical: total = L(H, Z_s) + is_audio * lam * L(H, Z_a)
    joint:        total = L(H, Z_s) + lam * L(H, Z_a), for every input
    disjoint:     speech input -> L(H, Z_s); audio input -> lam * L(H, Z_a)

    Terms that a strategy does not select contribute exactly zero loss and
    exactly zero gradient.
    """
    strategy = strategy.lower()
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    use_speech = strategy in ("joint", "asymmetrical") or not is_audio
    use_audio = strategy == "joint" or (is_audio and strategy in ("disjoint", "asymmetrical"))
    if use_speech and targets_speech is None:
        raise ConfigurationError("speech targets required but missing")
    if use_audio and (targets_audio is None or heads_audio is None):
        raise ConfigurationError("audio targets/heads required but missing")

    total = 0.0
    grad_h = np.zeros_like(h)
    grad_s = np.zeros_like(heads_speech)
    grad_a = np.zeros_like(heads_audio) if heads_audio is not None else np.zeros((0,))
    speech_res = None
    audio_res = None
    if use_speech:
        speech_res = single_domain_loss(h, targets_speech, mask, heads_speech, alpha)
        total += speech_res.total
        grad_h = grad_h + speech_res.grad_h
        grad_s = speech_res.grad_heads
    audio_weight = 0.0
    if use_audio:
        audio_res = single_domain_loss(h, targets_audio, mask, heads_audio, alpha)
        audio_weight = lam
        total = total + lam * audio_res.total
        grad_h = grad_h + lam * audio_res.grad_h
        grad_a = lam * audio_res.grad_heads
    return DualLossResult(total, grad_s, grad_a, grad_h, speech_res, audio_res, audio_weight)


# ---------------------------------------------------------------------------
# teacher frame-rate interpolation

def interpolate_targets(seq: FeatureSequence, target_rate_hz: float,
                        mode: str = "linear") -> FeatureSequence:
    """Resample teacher features to the student frame rate.

    Output length is round(T * r_s / r_t). `nearest` picks the temporally
    closest source frame; `linear` blends the two bracketing frames. Equal
    rates pass through bit-identically.
    """
    if mode not in ("nearest", "linear"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    if target_rate_hz <= 0:
        raise ValueError("target rate must be positive")
    if seq.frame_rate_hz == target_rate_hz:
        return FeatureSequence(seq.frames.copy(), seq.frame_rate_hz, seq.domain_tag)
    t_len = seq.num_frames
    if t_len == 0:
        raise ValueError("cannot resample an empty sequence to a different rate")
    if mode == "linear" and t_len < 2:
        raise ValueError("linear interpolation needs at least 2 frames")
    out_len = int(round(t_len * target_rate_hz / seq.frame_rate_hz))
    pos = np.arange(out_len) * (seq.frame_rate_hz / target_rate_hz)
    if mode == "nearest":
        idx = np.clip(np.floor(pos + 0.5).astype(np.int64), 0, t_len - 1)
        frames = seq.frames[idx]
    else:
        i0 = np.clip(np.floor(pos).astype(np.int64), 0, t_len - 1)
        i1 = np.minimum(i0 + 1, t_len - 1)
        frac = (pos - i0)[:, None]
        frames = (1.0 - frac) * seq.frames[i0] + frac * seq.frames[i1]
    return FeatureSequence(frames, target_rate_hz, seq.domain_tag)


# ---------------------------------------------------------------------------
# training loop

@dataclass
class SslTrainConfig:
    alpha: float = 0.5
    lam: float = 0.1
    strategy: str = "asymmetrical"
    p_start: float = 0.065
    mask_span: int = 10
    d_model: int = 64
    n_blocks: int = 2
    window: int = 9
    learning_rate: float = 1e-3
    steps: int = 1000
    batch_frames: int = 64
    speech_ratio: int = 1
    audio_ratio: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.strategy.lower() not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.speech_ratio < 1 or self.audio_ratio < 1:
            raise ValueError("mixing ratio parts must be >= 1")


def _window_tokens(tokens: np.ndarray | None, start: int, length: int):
    return None if tokens is None else tokens[start:start + length]


def pretrain(speech: FeatureSequence, q_speech: Quantiser, cfg: SslTrainConfig,
             audio: FeatureSequence | None = None,
             q_audio: Quantiser | None = None
             ) -> tuple[StudentModel, list[dict]]:
    """Desk-scale masked-prediction pretraining.

    Targets are precomputed once with the (frozen) quantisers. Each step draws
    a contiguous window of frames from one domain (alternating by the
    configured speech:audio ratio in dual mode), masks it, runs the encoder,
    applies the configured loss and takes one Adam step. Returns the model and
    a per-step metrics trace with keys step, loss_total, loss_masked,
    loss_unmasked, loss_audio (dual only) and acc_cb_<n> (masked top-1
    accuracy per speech codebook; nan when the batch has no masked frame).
    """
    dual = audio is not None
    if dual and q_audio is None:
        raise ConfigurationError("dual-domain pretraining requires an audio quantiser")
    if speech.num_frames == 0 or (dual and audio.num_frames == 0):
        raise ConfigurationError("empty dataset")

    strategy = cfg.strategy.lower()
    tok_s_speech = encode_sequence(speech, q_speech).tokens
    tok_s_audio = tok_a_audio = tok_a_speech = None
    if dual:
        tok_s_audio = encode_sequence(audio, q_speech).tokens
        tok_a_audio = encode_sequence(audio, q_audio).tokens
        if strategy == "joint":
            tok_a_speech = encode_sequence(speech, q_audio).tokens

    model = init_student(
        speech.dim, cfg.d_model, cfg.n_blocks, cfg.window,
        q_speech.n_codebooks, q_speech.codebook_size,
        n_heads_audio=q_audio.n_codebooks if dual else 0,
        k_audio=q_audio.codebook_size if dual else 0,
        seed=cfg.seed)
    params = model.parameters()
    opt = Adam(params, learning_rate=cfg.learning_rate)
    rng = make_rng(cfg.seed, stream=1)

    cycle = ["speech"] * cfg.speech_ratio + (["audio"] * cfg.audio_ratio if dual else [])
    trace = []
    for step in range(cfg.steps):
        domain = cycle[step % len(cycle)]
        is_audio = domain == "audio"
        frames = audio.frames if is_audio else speech.frames
        tok_s = tok_s_audio if is_audio else tok_s_speech
        tok_a = tok_a_audio if is_audio else tok_a_speech
        length = min(cfg.batch_frames, frames.shape[0])
        start = int(rng.integers(0, frames.shape[0] - length + 1))
        window = frames[start:start + length]
        mask = sample_mask(length, cfg.p_start, cfg.mask_span, rng)
        masked_in = apply_mask(window, mask, model.mask_embedding)
        h, cache = student_forward(masked_in, model)

        if dual:
            res = dual_domain_loss(h, _window_tokens(tok_s, start, length),
                                   _window_tokens(tok_a, start, length), mask,
                                   model.heads_speech, model.heads_audio,
                                   is_audio, cfg.lam, strategy, alpha=cfg.alpha)
            grad_h = res.grad_h
            speech_res = res.speech
            grads_heads = {"heads_speech": res.grad_heads_speech,
                           "heads_audio": res.grad_heads_audio}
            loss_total = res.total
            loss_audio = res.audio_weight * res.audio.total if res.audio is not None else 0.0
        else:
            speech_res = single_domain_loss(h, tok_s[start:start + length], mask,
                                            model.heads_speech, cfg.alpha)
            grad_h = speech_res.grad_h
            grads_heads = {"heads_speech": speech_res.grad_heads}
            loss_total = speech_res.total
            loss_audio = None

        enc_grads, grad_in = student_backward(cache, grad_h, model)
        grads = dict(enc_grads)
        grads.update(grads_heads)
        grads["mask_embedding"] = (grad_in[mask.indices].sum(axis=0)
                                   if mask.indices.size else np.zeros(model.d_in))
        opt.step(grads)

        record = {"step": step,
                  "loss_total": loss_total,
                  "loss_masked": speech_res.masked_total if speech_res else float("nan"),
                  "loss_unmasked": speech_res.unmasked_total if speech_res else float("nan")}
        if dual:
            record["loss_audio"] = loss_audio
        target_tokens = tok_s[start:start + length] if tok_s is not None else None
        if speech_res is not None and mask.indices.size and target_tokens is not None:
            pred = speech_res.logits[:, mask.indices, :].argmax(axis=-1)  # (N, |M|)
            acc = (pred == target_tokens[mask.indices].T).mean(axis=1)
        else:
            acc = np.full(q_speech.n_codebooks, np.nan)
        for n in range(q_speech.n_codebooks):
            record[f"acc_cb_{n}"] = float(acc[n])
        trace.append(record)
    return model, trace


def eval_masked_accuracy(model: StudentModel, data: FeatureSequence,
                         quantiser: Quantiser, p_start: float, span: int,
                         seed: int, passes: int = 4,
                         heads: str = "speech") -> np.ndarray:
    """Masked top-1 accuracy per codebook over `passes` independent maskings."""
    head_arr = model.heads_speech if heads == "speech" else model.heads_audio
    if head_arr is None:
        raise ConfigurationError("model has no audio heads")
    targets = encode_sequence(data, quantiser).tokens
    rng = make_rng(seed, stream=2)
    correct = np.zeros(quantiser.n_codebooks)
    count = 0
    for _ in range(passes):
        mask = sample_mask(data.num_frames, p_start, span, rng)
        if mask.indices.size == 0:
            continue
        h, _ = student_forward(apply_mask(data.frames, mask, model.mask_embedding), model)
        hm = h[mask.indices]
        for n in range(quantiser.n_codebooks):
            pred = head_logits(hm, head_arr[n]).argmax(axis=-1)
            correct[n] += (pred == targets[mask.indices, n]).sum()
        count += mask.indices.size
    if count == 0:
        raise ConfigurationError("no frames were masked during evaluation")
    return correct / count
