"""Multi-codebook vector quantiser.

N parallel, non-hierarchical codebooks of K code vectors each. A frame is
encoded as one index per codebook and reconstructed as the direct sum of the
selected code vectors. Encoding starts from per-codebook linear classifiers
and is refined by coordinate descent (iterated conditional modes) with a
fixed sweep order and lowest-index tie-breaking, so results are deterministic
across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FeatureSequence, TokenSequence
from .numerics import Adam, make_rng

# Frames processed per chunk when encoding long sequences; bounds the
# (chunk, K, d) temporary without changing results.
_ENCODE_CHUNK = 2048


@dataclass
class Quantiser:
    """Codebooks (N, K, d), classifier weights (N, K, d) and biases (N, K)."""

    codebooks: np.ndarray
    weights: np.ndarray
    biases: np.ndarray
    refine_steps: int = 5

    def __post_init__(self) -> None:
        self.codebooks = np.asarray(self.codebooks, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.codebooks.ndim != 3:
            raise ValueError("codebooks must have shape (N, K, d)")
        n, k, d = self.codebooks.shape
        if n < 1 or k < 2 or d < 1:
            raise ValueError("need N >= 1, K >= 2, d >= 1")
        if self.weights.shape != (n, k, d) or self.biases.shape != (n, k):
            raise ValueError("classifier shapes must be (N, K, d) and (N, K)")
        if self.refine_steps < 0:
            raise ValueError("refine_steps must be >= 0")
        for arr in (self.codebooks, self.weights, self.biases):
            if not np.all(np.isfinite(arr)):
                raise ValueError("quantiser parameters must be finite")

    @property
    def n_codebooks(self) -> int:
        return self.codebooks.shape[0]

    @property
    def codebook_size(self) -> int:
        return self.codebooks.shape[1]

    @property
    def dim(self) -> int:
        return self.codebooks.shape[2]


def _check_tokens(z: np.ndarray, q: Quantiser) -> np.ndarray:
    z = np.asarray(z, dtype=np.int64)
    if z.shape[-1] != q.n_codebooks:
        raise ValueError(f"expected {q.n_codebooks} tokens per frame, got {z.shape[-1]}")
    if z.size and (z.min() < 0 or z.max() >= q.codebook_size):
        raise IndexError("token index out of range [0, K)")
    return z


def _check_frames(x: np.ndarray, q: Quantiser) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != q.dim:
        raise ValueError(f"frame dimension {x.shape[-1]} does not match quantiser dim {q.dim}")
    return x


def decode(z: np.ndarray, q: Quantiser) -> np.ndarray:
    """Direct-sum reconstruction: the sum of the N selected code vectors."""
    z = _check_tokens(z, q)
    if z.ndim != 1:
        raise ValueError("decode expects a single token tuple")
    out = q.codebooks[0, z[0]].copy()
    for n in range(1, q.n_codebooks):
        out += q.codebooks[n, z[n]]
    return out


def decode_frames(tokens: np.ndarray, q: Quantiser) -> np.ndarray:
    """Vectorised decode of a (B, N) token array to (B, d) reconstructions."""
    tokens = _check_tokens(tokens, q)
    out = q.codebooks[0][tokens[:, 0]].copy()
    for n in range(1, q.n_codebooks):
        out += q.codebooks[n][tokens[:, n]]
    return out


def classifier_logits(frames: np.ndarray, q: Quantiser) -> np.ndarray:
    """Per-codebook classifier logits, shape (B, N, K)."""
    frames = _check_frames(frames, q)
    return np.einsum("bd,nkd->bnk", frames, q.weights) + q.biases


def classifier_init_frames(frames: np.ndarray, q: Quantiser) -> np.ndarray:
    """Initial token estimate per frame: argmax of each classifier's logits.

    np.argmax returns the first maximiser, which gives lowest-index tie-breaking.
    """
    return np.argmax(classifier_logits(frames, q), axis=-1).astype(np.int64)


def classifier_init(x: np.ndarray, q: Quantiser) -> np.ndarray:
    x = _check_frames(x, q)
    if x.ndim != 1:
        raise ValueError("classifier_init expects a single frame")
    return classifier_init_frames(x[None, :], q)[0]


def refine_frames(frames: np.ndarray, tokens: np.ndarray, q: Quantiser,
                  sweeps: int | None = None,
                  on_update=None) -> np.ndarray:
    """Coordinate-descent refinement of token tuples, batched over frames.

    Runs `sweeps` rounds (default q.refine_steps); within each round codebooks
    are visited in order 0..N-1 and each index is re-chosen to minimise the
    squared reconstruction error with the others fixed. Each single-coordinate
    update is monotone: the error never increases. `on_update`, if given, is
    called as on_update(errors_before, errors_after) after every codebook
    update (used by tests to assert monotonicity).
    """
    frames = _check_frames(frames, q)
    tokens = _check_tokens(tokens, q).copy()
    if sweeps is None:
        sweeps = q.refine_steps
    if frames.shape[0] == 0 or sweeps == 0:
        return tokens
    recon = decode_frames(tokens, q)
    for _ in range(sweeps):
        for n in range(q.n_codebooks):
            cb = q.codebooks[n]
            # target for codebook n with all other choices fixed
            partial = frames - recon + cb[tokens[:, n]]
            costs = ((partial[:, None, :] - cb[None, :, :]) ** 2).sum(axis=-1)
            best = np.argmin(costs, axis=1)
            if on_update is not None:
                rows = np.arange(frames.shape[0])
                on_update(costs[rows, tokens[:, n]], costs[rows, best])
            recon = recon - cb[tokens[:, n]] + cb[best]
            tokens[:, n] = best
    return tokens


def refine(x: np.ndarray, z: np.ndarray, q: Quantiser, sweeps: int | None = None) -> np.ndarray:
    x = _check_frames(x, q)
    if x.ndim != 1:
        raise ValueError("refine expects a single frame")
    return refine_frames(x[None, :], np.asarray(z)[None, :], q, sweeps=sweeps)[0]


def encode(x: np.ndarray, q: Quantiser) -> np.ndarray:
    """Encode one frame: classifier initialisation followed by refinement."""
    return refine(x, classifier_init(x, q), q)


def encode_frames(frames: np.ndarray, q: Quantiser) -> np.ndarray:
    """Encode a (B, d) array of frames to (B, N) tokens, chunked over rows."""
    frames = _check_frames(frames, q)
    if frames.ndim != 2:
        raise ValueError("encode_frames expects a (B, d) array")
    parts = []
    for lo in range(0, frames.shape[0], _ENCODE_CHUNK):
        chunk = frames[lo:lo + _ENCODE_CHUNK]
        parts.append(refine_frames(chunk, classifier_init_frames(chunk, q), q))
    if not parts:
        return np.zeros((0, q.n_codebooks), dtype=np.int64)
    return np.concatenate(parts, axis=0)


def encode_sequence(seq: FeatureSequence, q: Quantiser) -> TokenSequence:
    """Frame-by-frame encoding of a feature sequence; length is preserved."""
    return TokenSequence(encode_frames(seq.frames, q), q.codebook_size)


def reconstruction_mse(seq: FeatureSequence, q: Quantiser) -> float:
    """Mean squared L2 error between frames and decode(encode(frame))."""
    if seq.num_frames == 0:
        raise ValueError("reconstruction_mse: empty sequence")
    recon = decode_frames(encode_frames(seq.frames, q), q)
    return float(((seq.frames - recon) ** 2).sum(axis=1).mean())


def usage_entropy(tokens: np.ndarray, codebook_size: int) -> np.ndarray:
    """Entropy (nats) of the empirical index histogram, per codebook."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.shape[0] == 0:
        raise ValueError("usage_entropy: no tokens")
    ents = np.empty(tokens.shape[1])
    for n in range(tokens.shape[1]):
        p = np.bincount(tokens[:, n], minlength=codebook_size) / tokens.shape[0]
        nz = p[p > 0]
        ents[n] = float(-(nz * np.log(nz)).sum())
    return ents


@dataclass
class QuantiserLoss:
    residual: float
    prediction: float
    reg: float
    total: float
    grad_codebooks: np.ndarray
    grad_weights: np.ndarray
    grad_biases: np.ndarray
    tokens: np.ndarray


def quantiser_loss(batch: np.ndarray, q: Quantiser, beta: float,
                   tokens: np.ndarray | None = None) -> QuantiserLoss:
    """Training loss and analytic gradients on a batch of frames.

    residual   mean squared reconstruction error; gradient flows only to the
               finally selected code vectors.
    prediction mean over frames of the summed per-codebook cross-entropy of the
               classifiers against the encoded indices (targets are detached).
    reg        sum over codebooks of KL(uniform || batch-mean classifier
               softmax); zero exactly when the mean softmax is uniform.

    `tokens` pins the encodings (used by finite-difference tests, since encode
    is piecewise constant in the parameters).
    """
    batch = _check_frames(batch, q)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise ValueError("quantiser_loss: batch must be a non-empty (B, d) array")
    if tokens is None:
        tokens = encode_frames(batch, q)
    else:
        tokens = _check_tokens(tokens, q)
    b_sz = batch.shape[0]
    n_cb, k_sz, _ = q.codebooks.shape

    recon = decode_frames(tokens, q)
    resid = batch - recon
    loss_res = float((resid ** 2).sum(axis=1).mean())
    grad_cb = np.zeros_like(q.codebooks)
    per_frame = (-2.0 / b_sz) * resid
    for n in range(n_cb):
        np.add.at(grad_cb[n], tokens[:, n], per_frame)

    logits = classifier_logits(batch, q)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(logp)
    rows = np.arange(b_sz)[:, None]
    cols = np.arange(n_cb)[None, :]
    loss_pred = float(-logp[rows, cols, tokens].sum(axis=1).mean())
    dlogits = probs.copy()
    dlogits[rows, cols, tokens] -= 1.0
    dlogits /= b_sz

    p_bar = probs.mean(axis=0)
    loss_reg = float((-np.log(k_sz) - np.log(p_bar).sum(axis=1) / k_sz).sum())
    dp = np.broadcast_to(-1.0 / (k_sz * p_bar * b_sz), probs.shape)
    dlogits_reg = probs * (dp - (dp * probs).sum(axis=-1, keepdims=True))

    dlogits_total = dlogits + beta * dlogits_reg
    grad_w = np.einsum("bnk,bd->nkd", dlogits_total, batch)
    grad_b = dlogits_total.sum(axis=0)

    total = loss_res + loss_pred + beta * loss_reg
    return QuantiserLoss(loss_res, loss_pred, loss_reg, total,
                         grad_cb, grad_w, grad_b, tokens)


@dataclass
class QuantiserTrainConfig:
    n_codebooks: int = 4
    codebook_size: int = 256
    refine_steps: int = 5
    beta: float = 0.1
    batch_size: int = 64
    steps: int = 1000
    learning_rate: float = 1e-2
    init_noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.steps < 1:
            raise ValueError("batch_size and steps must be >= 1")
        if self.beta < 0 or self.init_noise_sigma < 0:
            raise ValueError("beta and init_noise_sigma must be >= 0")
        if not 2 <= self.codebook_size <= 65536:
            raise ValueError("codebook_size must be in [2, 65536]")


def train_quantiser(features: FeatureSequence, cfg: QuantiserTrainConfig
                    ) -> tuple[Quantiser, list[dict]]:
    """Train codebooks and classifiers with Adam over shuffled minibatches.

    Code vectors start at (random training frame)/N plus Gaussian noise scaled
    by init_noise_sigma times the per-dimension data std, so initial direct
    sums lie near the data. Returns the quantiser and a per-step metrics trace
    (loss parts plus hard code-usage entropy per codebook).
    """
    frames = features.frames
    t_total = frames.shape[0]
    if t_total < cfg.batch_size:
        raise ValueError("need at least batch_size frames")
    d = frames.shape[1]
    rng = make_rng(cfg.seed)

    std = frames.std(axis=0)
    picks = rng.integers(0, t_total, size=(cfg.n_codebooks, cfg.codebook_size))
    codebooks = frames[picks] / cfg.n_codebooks
    codebooks = codebooks + rng.normal(size=codebooks.shape) * (cfg.init_noise_sigma * std)
    weights = rng.normal(size=(cfg.n_codebooks, cfg.codebook_size, d)) * 0.01
    biases = np.zeros((cfg.n_codebooks, cfg.codebook_size))
    q = Quantiser(codebooks, weights, biases, refine_steps=cfg.refine_steps)

    opt = Adam({"codebooks": q.codebooks, "weights": q.weights, "biases": q.biases},
               learning_rate=cfg.learning_rate)
    perm = rng.permutation(t_total)
    pos = 0
    trace = []
    for step in range(cfg.steps):
        if pos + cfg.batch_size > t_total:
            perm = rng.permutation(t_total)
            pos = 0
        idx = perm[pos:pos + cfg.batch_size]
        pos += cfg.batch_size
        loss = quantiser_loss(frames[idx], q, cfg.beta)
        opt.step({"codebooks": loss.grad_codebooks,
                  "weights": loss.grad_weights,
                  "biases": loss.grad_biases})
        ent = usage_entropy(loss.tokens, cfg.codebook_size)
        record = {"step": step, "loss_total": loss.total, "loss_residual": loss.residual,
                  "loss_prediction": loss.prediction, "loss_reg": loss.reg}
        for n in range(cfg.n_codebooks):
            record[f"entropy_cb_{n}"] = float(ent[n])
        trace.append(record)
    return q, trace
