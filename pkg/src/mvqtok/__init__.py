"""Multi-codebook vector quantisation and masked fine-grained token prediction."""

from .data import FeatureSequence, TokenSequence
from .quantiser import (Quantiser, QuantiserTrainConfig, classifier_init, decode,
                        encode, encode_sequence, quantiser_loss,
                        reconstruction_mse, refine, train_quantiser)
from .selfsup import (MaskSpec, SslTrainConfig, StudentModel, apply_mask,
                      dual_domain_loss, eval_masked_accuracy, head_logits,
                      init_student, interpolate_targets, pretrain, sample_mask,
                      single_domain_loss, student_backward, student_forward)
from .synth import SynthConfig, generate_synthetic

__all__ = [
    "FeatureSequence", "TokenSequence",
    "Quantiser", "QuantiserTrainConfig", "classifier_init", "decode", "encode",
    "encode_sequence", "quantiser_loss", "reconstruction_mse", "refine",
    "train_quantiser",
    "MaskSpec", "SslTrainConfig", "StudentModel", "apply_mask",
    "dual_domain_loss", "eval_masked_accuracy", "head_logits", "init_student",
    "interpolate_targets", "pretrain", "sample_mask", "single_domain_loss",
    "student_backward", "student_forward",
    "SynthConfig", "generate_synthetic",
]
