"""Cross-tokenizer distribution alignment via entropic optimal transport.

Pairs two tokenizations of a text, aligns their per-step top-k
distributions with Sinkhorn-scaled transport plans, fuses the result,
and evaluates the combined distillation objective on a toy trainer.
"""

from .align import AlignConfig, AlignStats, align_baseline, align_matrices, fuse_pipeline
from .dist import (
    DistributionMatrix,
    MatrixFormatError,
    StepDistribution,
    read_matrices,
    read_matrix,
    softmax_step,
    validate_matrix,
    write_matrices,
    write_matrix,
)
from .diag import EmbeddedToken, center_distance, compactness, weighted_center
from .fusion import (
    FusionConfig,
    ToyModel,
    clm_loss,
    combined_loss,
    fuse_combine,
    fusion_loss,
    sequence_ce,
    train_toy,
)
from .pairing import PairGroup, PairingResult, brute_force_pairing, pair_tokens, token_cost
from .transport import (
    OtConfig,
    SolverError,
    TransportPlan,
    build_cost,
    exact_ot_2x2,
    extract_fused,
    plan_cost,
    sinkhorn,
)
from .vocab import TokenSequence, Vocabulary, VocabError, decode, load_vocab, tokenize

__version__ = "0.1.0"

__all__ = [
    "AlignConfig",
    "AlignStats",
    "DistributionMatrix",
    "EmbeddedToken",
    "FusionConfig",
    "MatrixFormatError",
    "OtConfig",
    "PairGroup",
    "PairingResult",
    "SolverError",
    "StepDistribution",
    "TokenSequence",
    "ToyModel",
    "TransportPlan",
    "VocabError",
    "Vocabulary",
    "align_baseline",
    "align_matrices",
    "brute_force_pairing",
    "build_cost",
    "center_distance",
    "clm_loss",
    "combined_loss",
    "compactness",
    "decode",
    "exact_ot_2x2",
    "extract_fused",
    "fuse_combine",
    "fuse_pipeline",
    "fusion_loss",
    "load_vocab",
    "pair_tokens",
    "plan_cost",
    "read_matrices",
    "read_matrix",
    "sequence_ce",
    "sinkhorn",
    "softmax_step",
    "token_cost",
    "tokenize",
    "train_toy",
    "validate_matrix",
    "weighted_center",
    "write_matrices",
    "write_matrix",
]
