"""Decoupled NCE loss on squared distances and the balance of its partials.

For a positive distance ``r_plus`` and negatives ``r_minus`` the loss is
``r_plus + lam * log(exp(-r_plus / tau) + sum_k exp(-r_minus_k / tau))``.
Its partial derivatives always sum to ``1 - lam / tau``.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class NcePoint:
    r_plus: float
    r_minus: np.ndarray
    tau_nce: float = 1.0
    lambda_nce: float = 1.0

    def __post_init__(self):
        if not self.tau_nce > 0:
            raise DomainError(f"temperature must be positive, got {self.tau_nce}")
        if self.lambda_nce < 0:
            raise ValidationError("lambda must be non-negative")
        r = np.atleast_1d(np.asarray(self.r_minus, dtype=float))
        if r.ndim != 1 or r.size == 0:
            raise ValidationError("r_minus must be a nonempty vector")
        object.__setattr__(self, "r_minus", r)


def _logits(pt):
    return -np.concatenate(([pt.r_plus], pt.r_minus)) / pt.tau_nce


def _softmax(z):
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def dnce_loss(pt):
    z = _logits(pt)
    m = float(np.max(z))
    return pt.r_plus + pt.lambda_nce * (m + math.log(float(np.sum(np.exp(z - m)))))


def dnce_partials(pt):
    """``{"d_r_plus": float, "d_r_minus": ndarray}``, computed with a max-shifted softmax."""
    w = _softmax(_logits(pt))
    scale = pt.lambda_nce / pt.tau_nce
    return {"d_r_plus": 1.0 - scale * float(w[0]), "d_r_minus": -scale * w[1:]}


def balance_sum(pt):
    d = dnce_partials(pt)
    return d["d_r_plus"] + math.fsum(d["d_r_minus"])
