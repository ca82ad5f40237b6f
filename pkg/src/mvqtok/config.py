"""Plain-text run configuration.

Format: one `key = value` pair per line, `#` starts a comment, blank lines
ignored. Unknown keys are an error; missing keys take the documented defaults
(alpha 0.5, lambda 0.1, beta 0.1, refine_steps 5, codebook_size 256, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigParseError
from .selfsup import STRATEGIES


@dataclass
class RunConfig:
    alpha: float = 0.5
    lam: float = 0.1
    beta: float = 0.1
    refine_steps: int = 5
    n_codebooks: int = 4
    codebook_size: int = 256
    steps: int = 1000
    batch_size: int = 64
    seed: int = 0
    p_start: float = 0.065
    mask_span: int = 10
    d_model: int = 64
    n_blocks: int = 2
    window: int = 9
    learning_rate: float = 1e-3
    strategy: str = "asymmetrical"
    init_noise_sigma: float = 0.01
    speech_ratio: int = 1
    audio_ratio: int = 1


# config-file key -> dataclass field (lambda is a Python keyword)
_KEY_TO_FIELD = {("lambda" if f.name == "lam" else f.name): f.name
                 for f in fields(RunConfig)}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, field_name: str, raw: str, lineno: int):
    kind = _FIELD_TYPES[field_name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigParseError(
            f"line {lineno}: value {raw!r} for key {key!r} is not a valid {kind}")
    if field_name == "strategy" and raw.lower() not in STRATEGIES:
        raise ConfigParseError(f"line {lineno}: unknown strategy {raw!r}")
    return raw


def parse_config(path) -> RunConfig:
    cfg = RunConfig()
    unknown = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigParseError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _KEY_TO_FIELD:
                unknown.append(f"{key!r} (line {lineno})")
                continue
            field_name = _KEY_TO_FIELD[key]
            setattr(cfg, field_name, _convert(key, field_name, value, lineno))
    if unknown:
        raise ConfigParseError("unknown keys: " + ", ".join(unknown))
    return cfg
