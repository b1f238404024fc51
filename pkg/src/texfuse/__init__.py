"""texfuse: video forgery detection via masked local-texture reconstruction.

A small ViT encoder is shared between two branches: an auxiliary branch
that reconstructs a masked texture-descriptor video (LDP or LBP codes)
and a primary branch that reads the full RGB clip.  Their pooled features
are fused element-wise and classified; training mixes the two losses as
``lambda * l_cls + (1 - lambda) * l_rec``.
"""

from .ablation import ALL_PAIRS, AblationRow, run_ablation
from .config import (
    EVAL_MASK_MODES,
    MODALITY_PAIRS,
    TrainConfig,
    config_from_dict,
    parse_pair,
    read_config,
    write_config,
)
from .estimator import MaskedFusionClassifier, check_clip_array, check_labels
from .metrics import auc, roc_points, trapezoid_area, write_roc_svg
from .model import (
    FusionModel,
    build_model,
    fuse,
    load_checkpoint,
    pool,
    save_checkpoint,
)
from .objectives import LossReport, cross_entropy, joint_loss, masked_mse
from .synth import (
    DOMAINS,
    ClipRecord,
    DomainParams,
    build_dataset,
    generate_clip,
    generate_clip_with_region,
    read_clip,
    read_manifest,
    write_clip,
)
from .texture import (
    KIRSCH_MASKS,
    TextureCoder,
    descriptor_array,
    descriptor_video,
    kirsch_responses,
    lbp_code,
    lbp_code_image,
    ldp_code,
    ldp_code_image,
    to_grayscale,
)
from .trainer import (
    ClipSet,
    EvalResult,
    cosine_lr,
    evaluate,
    evaluate_clipset,
    fit_model,
    load_clipset,
    train,
)
from .video import (
    MaskSpec,
    PatchGeometry,
    VideoClip,
    apply_mask,
    clip_mask_seed,
    mask_for_clip_ids,
    patchify,
    sample_tube_mask,
    unpatchify,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_PAIRS",
    "AblationRow",
    "ClipRecord",
    "ClipSet",
    "DomainParams",
    "DOMAINS",
    "EvalResult",
    "EVAL_MASK_MODES",
    "FusionModel",
    "KIRSCH_MASKS",
    "LossReport",
    "MaskSpec",
    "MaskedFusionClassifier",
    "MODALITY_PAIRS",
    "PatchGeometry",
    "TextureCoder",
    "TrainConfig",
    "VideoClip",
    "apply_mask",
    "auc",
    "build_dataset",
    "build_model",
    "check_clip_array",
    "check_labels",
    "clip_mask_seed",
    "cosine_lr",
    "cross_entropy",
    "descriptor_array",
    "descriptor_video",
    "evaluate",
    "evaluate_clipset",
    "fit_model",
    "fuse",
    "generate_clip",
    "generate_clip_with_region",
    "joint_loss",
    "kirsch_responses",
    "lbp_code",
    "lbp_code_image",
    "ldp_code",
    "ldp_code_image",
    "load_checkpoint",
    "load_clipset",
    "mask_for_clip_ids",
    "masked_mse",
    "parse_pair",
    "patchify",
    "pool",
    "read_clip",
    "config_from_dict",
    "read_config",
    "read_manifest",
    "roc_points",
    "run_ablation",
    "sample_tube_mask",
    "save_checkpoint",
    "to_grayscale",
    "train",
    "trapezoid_area",
    "unpatchify",
    "write_clip",
    "write_config",
    "write_roc_svg",
]
