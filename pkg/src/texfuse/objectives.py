"""Training objectives: classification, masked reconstruction, joint loss.

All three losses operate on torch tensors and stay inside the autograd
graph.  ``joint_loss`` combines them as

    l_total = lam * l_cls + (1 - lam) * l_rec

so lam = 1 trains classification only and lam = 0 reconstruction only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import DegenerateMaskError, GeometryError, LabelError, ParameterError
from .video import MaskSpec

REC_NORMS = ("element", "patch")


@dataclass
class LossReport:
    """Scalar loss values for one step, as plain floats for logging."""

    l_cls: float
    l_rec: float
    l_total: float
    loss_lambda: float

    def to_record(self) -> dict:
        """Keys used in the JSON-lines training log."""
        return {
            "l_cls": self.l_cls,
            "l_rec": self.l_rec,
            "l_total": self.l_total,
            "lambda": self.loss_lambda,
        }


def cross_entropy(logits: torch.Tensor, labels) -> torch.Tensor:
    """Mean softmax cross-entropy over the batch.

    logits has shape (B, 2) with column 1 scoring the manipulated class;
    labels are integers in {0, 1}.  Uses the log-sum-exp stabilized form,
    so large logits do not overflow.
    """
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise GeometryError(f"logits must be (B, 2), got {tuple(logits.shape)}")
    if not torch.is_tensor(labels):
        labels = torch.as_tensor(np.asarray(labels))
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise LabelError(
            f"labels must be ({logits.shape[0]},), got {tuple(labels.shape)}"
        )
    if labels.numel() == 0:
        raise LabelError("labels must be non-empty")
    unique = torch.unique(labels)
    if not bool(((unique == 0) | (unique == 1)).all()):
        raise LabelError(f"labels must be 0 or 1, got values {unique.tolist()}")
    return F.cross_entropy(logits, labels.long())


def masked_mse(
    pred: torch.Tensor,
    target: torch.Tensor,
    mask: MaskSpec,
    norm: str = "element",
) -> torch.Tensor:
    """Mean squared reconstruction error over masked tokens only.

    For each sample the squared error is summed over its masked tokens and
    divided by the number of masked tokens; with ``norm="element"`` (the
    default) it is additionally divided by the token dimension, giving a
    per-element mean.  ``norm="patch"`` keeps the per-token sum.  Visible
    positions never contribute.
    """
    if norm not in REC_NORMS:
        raise ParameterError(f"norm must be one of {REC_NORMS}, got {norm!r}")
    if pred.shape != target.shape:
        raise GeometryError(
            f"pred shape {tuple(pred.shape)} != target shape {tuple(target.shape)}"
        )
    if pred.ndim != 3:
        raise GeometryError(f"pred must be (B, S, D_tok), got {tuple(pred.shape)}")
    if mask.seq_len != pred.shape[1] or mask.batch_size != pred.shape[0]:
        raise GeometryError(
            f"mask ({mask.batch_size}, seq_len={mask.seq_len}) does not match "
            f"pred {tuple(pred.shape)}"
        )
    if mask.n_masked == 0:
        raise DegenerateMaskError(
            "masked_mse needs at least one masked token per sample"
        )
    idx = torch.as_tensor(mask.masked, device=pred.device)
    gather_idx = idx.unsqueeze(-1).expand(-1, -1, pred.shape[2])
    diff = torch.gather(pred, 1, gather_idx) - torch.gather(target, 1, gather_idx)
    per_sample = diff.pow(2).sum(dim=(1, 2)) / mask.n_masked
    if norm == "element":
        per_sample = per_sample / pred.shape[2]
    return per_sample.mean()


def joint_loss(l_cls, l_rec, lam: float):
    """Weighted sum lam * l_cls + (1 - lam) * l_rec.

    Accepts tensors or plain floats; lam must be in [0, 1].
    """
    if not 0.0 <= float(lam) <= 1.0:
        raise ParameterError(f"lambda must be in [0, 1], got {lam}")
    return lam * l_cls + (1.0 - lam) * l_rec


def loss_report(l_cls, l_rec, lam: float) -> LossReport:
    """Bundle the three losses into a LossReport of plain floats."""
    total = joint_loss(l_cls, l_rec, lam)
    return LossReport(
        l_cls=float(l_cls),
        l_rec=float(l_rec),
        l_total=float(total),
        loss_lambda=float(lam),
    )
