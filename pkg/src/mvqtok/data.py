"""Core sequence containers shared by the quantiser, pretraining and I/O code."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DOMAIN_TAGS = ("speech", "audio", "unspecified")


@dataclass
class FeatureSequence:
    """A T x d sequence of real-valued frames (teacher or synthetic features)."""

    frames: np.ndarray
    frame_rate_hz: float = 100.0
    domain_tag: str = "unspecified"

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError("frames must be a 2-d (T, d) array")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("frames must be finite")
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be positive")
        if self.domain_tag not in DOMAIN_TAGS:
            raise ValueError(f"unknown domain_tag {self.domain_tag!r}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class TokenSequence:
    """T tuples of N integer tokens, each in [0, codebook_size)."""

    tokens: np.ndarray
    codebook_size: int

    def __post_init__(self) -> None:
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        if self.tokens.ndim != 2:
            raise ValueError("tokens must be a 2-d (T, N) array")
        if self.codebook_size < 1:
            raise ValueError("codebook_size must be at least 1")
        if self.tokens.size and (self.tokens.min() < 0 or self.tokens.max() >= self.codebook_size):
            raise ValueError("token out of range for codebook_size")

    @property
    def num_frames(self) -> int:
        return self.tokens.shape[0]

    @property
    def n_codebooks(self) -> int:
        return self.tokens.shape[1]
