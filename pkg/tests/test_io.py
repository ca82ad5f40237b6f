from pathlib import Path

import numpy as np
import pytest

from conftest import random_quantiser
from mvqtok.config import RunConfig, parse_config
from mvqtok.data import FeatureSequence, TokenSequence
from mvqtok.errors import (BadMagicError, ConfigParseError, TruncatedFileError,
                           UnsupportedVersionError)
from mvqtok.fileio import (inspect_header, read_features, read_quantiser,
                           read_student, read_tokens, token_width,
                           write_features, write_quantiser, write_student,
                           write_tokens)
from mvqtok.quantiser import encode_sequence
from mvqtok.selfsup import init_student
from mvqtok.synth import SynthConfig, generate_synthetic, state_means

GOLDEN = Path(__file__).parent / "golden"


class TestFeatureRoundtrip:
    def test_roundtrip_float32_exact(self, rng, tmp_path):
        seq = FeatureSequence(rng.normal(size=(17, 5)), 50.0, "speech")
        p = tmp_path / "a.mvqf"
        write_features(p, seq)
        back = read_features(p)
        np.testing.assert_array_equal(back.frames,
                                      seq.frames.astype(np.float32).astype(np.float64))
        assert back.frame_rate_hz == 50.0
        assert back.domain_tag == "speech"

    def test_empty_sequence(self, tmp_path):
        p = tmp_path / "e.mvqf"
        write_features(p, FeatureSequence(np.zeros((0, 3))))
        back = read_features(p)
        assert back.frames.shape == (0, 3)

    def test_rewrite_byte_identical(self, rng, tmp_path):
        seq = FeatureSequence(rng.normal(size=(9, 4)))
        p1, p2 = tmp_path / "1.mvqf", tmp_path / "2.mvqf"
        write_features(p1, seq)
        write_features(p2, seq)
        assert p1.read_bytes() == p2.read_bytes()


class TestQuantiserRoundtrip:
    def test_behavioural_equality_after_reload(self, rng, tmp_path):
        q = random_quantiser(rng, 3, 5, 6)
        # quantise to f32 first so storage does not perturb decisions
        q = type(q)(q.codebooks.astype(np.float32).astype(np.float64),
                    q.weights.astype(np.float32).astype(np.float64),
                    q.biases.astype(np.float32).astype(np.float64),
                    refine_steps=q.refine_steps)
        p = tmp_path / "q.mvqq"
        write_quantiser(p, q)
        q2 = read_quantiser(p)
        frames = rng.normal(size=(100, 6))
        from mvqtok.quantiser import encode_frames
        np.testing.assert_array_equal(encode_frames(frames, q),
                                      encode_frames(frames, q2))
        assert q2.refine_steps == q.refine_steps

    def test_header_fields(self, rng, tmp_path):
        p = tmp_path / "q.mvqq"
        write_quantiser(p, random_quantiser(rng, 2, 4, 3, refine_steps=7))
        info = inspect_header(p)
        assert info == {"format": "quantiser", "N": 2, "K": 4, "d": 3,
                        "refine_steps": 7}


class TestTokenRoundtrip:
    def test_uint8_roundtrip(self, rng, tmp_path):
        toks = TokenSequence(rng.integers(0, 256, size=(40, 4)), 256)
        p = tmp_path / "t.mvqt"
        write_tokens(p, toks)
        back = read_tokens(p)
        np.testing.assert_array_equal(back.tokens, toks.tokens)
        assert back.codebook_size == 256

    def test_uint16_roundtrip_k_300(self, rng, tmp_path):
        toks = TokenSequence(rng.integers(0, 300, size=(25, 2)), 300)
        p = tmp_path / "t.mvqt"
        write_tokens(p, toks)
        back = read_tokens(p)
        np.testing.assert_array_equal(back.tokens, toks.tokens)

    def test_width_switch(self):
        assert token_width(2) == 1
        assert token_width(256) == 1
        assert token_width(257) == 2
        assert token_width(300) == 2

    def test_k256_n16_is_16_bytes_per_frame(self, rng, tmp_path):
        t_len = 10
        toks = TokenSequence(rng.integers(0, 256, size=(t_len, 16)), 256)
        p = tmp_path / "t.mvqt"
        write_tokens(p, toks)
        header = 4 + 4 + 4 + 4 + 4 + 1
        assert p.stat().st_size - header == 16 * t_len


class TestStudentRoundtrip:
    def test_speech_only(self, tmp_path):
        model = init_student(5, 8, 2, 3, 2, 4, seed=1)
        p = tmp_path / "m.mvqm"
        write_student(p, model)
        back = read_student(p)
        assert back.heads_audio is None
        for key, val in model.parameters().items():
            np.testing.assert_array_equal(
                back.parameters()[key], val.astype(np.float32).astype(np.float64))

    def test_dual_heads(self, tmp_path):
        model = init_student(5, 8, 1, 3, 2, 4, n_heads_audio=3, k_audio=6, seed=1)
        p = tmp_path / "m.mvqm"
        write_student(p, model)
        back = read_student(p)
        assert back.heads_audio.shape == (3, 6, 8)
        info = inspect_header(p)
        assert info["N_audio"] == 3 and info["K_audio"] == 6


class TestCorruptFiles:
    def _feature_bytes(self, tmp_path):
        p = tmp_path / "a.mvqf"
        write_features(p, FeatureSequence(np.ones((4, 2))))
        return p, bytearray(p.read_bytes())

    def test_bad_magic(self, tmp_path):
        p, data = self._feature_bytes(tmp_path)
        data[:4] = b"NOPE"
        p.write_bytes(data)
        with pytest.raises(BadMagicError):
            read_features(p)

    def test_bad_version(self, tmp_path):
        p, data = self._feature_bytes(tmp_path)
        data[4] = 99
        p.write_bytes(data)
        with pytest.raises(UnsupportedVersionError):
            read_features(p)

    def test_truncated_payload(self, tmp_path):
        p, data = self._feature_bytes(tmp_path)
        p.write_bytes(data[:-3])
        with pytest.raises(TruncatedFileError):
            read_features(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "short.mvqf"
        p.write_bytes(b"MVQF\x01")
        with pytest.raises(TruncatedFileError):
            read_features(p)

    def test_inspect_unknown_magic(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"XXXXXXXXXXXX")
        with pytest.raises(BadMagicError):
            inspect_header(p)


class TestGoldenFiles:
    """Committed reference files: the writers must reproduce them byte for byte."""

    def _golden_payloads(self):
        feat = FeatureSequence(
            np.array([[0.5, -1.25], [2.0, 0.0], [-3.5, 0.125]]), 100.0, "speech")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([99])))
        q = random_quantiser(rng, 2, 3, 2)
        toks = TokenSequence(np.array([[0, 2], [1, 0], [2, 1], [1, 1]]), 3)
        model = init_student(2, 4, 1, 3, 2, 3, seed=99)
        return feat, q, toks, model

    def test_golden_features(self, tmp_path):
        feat, _, _, _ = self._golden_payloads()
        p = tmp_path / "g.mvqf"
        write_features(p, feat)
        assert p.read_bytes() == (GOLDEN / "reference.mvqf").read_bytes()

    def test_golden_quantiser(self, tmp_path):
        _, q, _, _ = self._golden_payloads()
        p = tmp_path / "g.mvqq"
        write_quantiser(p, q)
        assert p.read_bytes() == (GOLDEN / "reference.mvqq").read_bytes()

    def test_golden_tokens(self, tmp_path):
        _, _, toks, _ = self._golden_payloads()
        p = tmp_path / "g.mvqt"
        write_tokens(p, toks)
        assert p.read_bytes() == (GOLDEN / "reference.mvqt").read_bytes()

    def test_golden_student(self, tmp_path):
        _, _, _, model = self._golden_payloads()
        p = tmp_path / "g.mvqm"
        write_student(p, model)
        assert p.read_bytes() == (GOLDEN / "reference.mvqm").read_bytes()

    def test_golden_files_still_parse(self):
        read_features(GOLDEN / "reference.mvqf")
        read_quantiser(GOLDEN / "reference.mvqq")
        read_tokens(GOLDEN / "reference.mvqt")
        read_student(GOLDEN / "reference.mvqm")


class TestSynthGenerator:
    def test_zero_noise_emits_exact_means(self):
        cfg = SynthConfig(num_states=3, dim=4, noise_sigma=0.0, length=50, seed=1)
        seq = generate_synthetic(cfg)
        means = state_means(cfg)
        for frame in seq.frames:
            assert any(np.array_equal(frame, m) for m in means)

    def test_mean_run_length(self):
        # geometric runs: expected length 1 / (1 - p_stay) = 20
        cfg = SynthConfig(num_states=5, dim=2, p_stay=0.95, noise_sigma=0.0,
                          length=10000, seed=3)
        frames = generate_synthetic(cfg).frames
        means = state_means(cfg)
        states = np.argmin(np.linalg.norm(frames[:, None, :] - means[None], axis=2),
                           axis=1)
        runs = np.diff(np.flatnonzero(np.r_[True, states[1:] != states[:-1], True]))
        assert abs(runs.mean() - 20.0) < 2.0

    def test_deterministic(self):
        cfg = SynthConfig(num_states=4, dim=3, length=200, seed=7)
        a = generate_synthetic(cfg)
        b = generate_synthetic(cfg)
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_seed_changes_output(self):
        a = generate_synthetic(SynthConfig(num_states=4, dim=3, length=50, seed=1))
        b = generate_synthetic(SynthConfig(num_states=4, dim=3, length=50, seed=2))
        assert not np.array_equal(a.frames, b.frames)

    def test_domain_tag_and_rate_carried(self):
        seq = generate_synthetic(SynthConfig(num_states=2, dim=2, length=5,
                                             frame_rate_hz=25.0, domain_tag="audio"))
        assert seq.frame_rate_hz == 25.0
        assert seq.domain_tag == "audio"

    def test_tokens_from_synth_roundtrip(self, rng, tmp_path):
        seq = generate_synthetic(SynthConfig(num_states=3, dim=4, length=30, seed=5))
        q = random_quantiser(rng, 2, 4, 4)
        toks = encode_sequence(seq, q)
        p = tmp_path / "t.mvqt"
        write_tokens(p, toks)
        np.testing.assert_array_equal(read_tokens(p).tokens, toks.tokens)

    def test_invalid_configs(self):
        with pytest.raises(ValueError):
            SynthConfig(num_states=1, dim=2)
        with pytest.raises(ValueError):
            SynthConfig(num_states=2, dim=2, p_stay=1.0)
        with pytest.raises(ValueError):
            SynthConfig(num_states=2, dim=2, noise_sigma=-0.1)


class TestParseConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("")
        assert parse_config(p) == RunConfig()

    def test_values_comments_and_lambda_alias(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# run settings\nalpha = 0.5\nlambda = 0.25\n\n"
                     "codebook_size=32  # inline comment\nstrategy = joint\n")
        cfg = parse_config(p)
        assert cfg.alpha == 0.5
        assert cfg.lam == 0.25
        assert cfg.codebook_size == 32
        assert cfg.strategy == "joint"

    def test_bad_value_reports_line_number(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("alpha = two\n")
        with pytest.raises(ConfigParseError, match="line 1"):
            parse_config(p)

    def test_unknown_keys_listed(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("alpha = 0.5\nbogus = 1\nwat = 2\n")
        with pytest.raises(ConfigParseError, match="'bogus'.*'wat'"):
            parse_config(p)

    def test_missing_equals(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("alpha 0.5\n")
        with pytest.raises(ConfigParseError, match="line 1"):
            parse_config(p)

    def test_unknown_strategy(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("strategy = sideways\n")
        with pytest.raises(ConfigParseError):
            parse_config(p)
