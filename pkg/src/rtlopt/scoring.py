"""Candidate scoring and group-relative advantage.

Scores combine baseline-normalized WNS/TNS/area with a flat penalty for
excessive area growth; lower is better. Advantages standardize the scores
of SEC-passing siblings within one iteration group, so they are invariant
under translation and positive scaling of the raw scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .backend import PpaMetrics

NORMALIZE_CAP = 10.0
_ZERO = 1e-9


@dataclass(frozen=True)
class ScoreWeights:
    alpha: float = 0.5
    beta: float = 0.35
    gamma: float = 0.15
    area_penalty: float = 0.5
    area_penalty_threshold: float = 0.1

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.area_penalty_threshold <= 0:
            raise ValueError("area_penalty_threshold must be > 0")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
                "area_penalty": self.area_penalty,
                "area_penalty_threshold": self.area_penalty_threshold}

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreWeights":
        return cls(**d)


@dataclass(frozen=True)
class CandidateScore:
    wns_norm: float
    tns_norm: float
    area_norm: float
    penalty: float
    score: float
    sec_pass: bool

    def to_dict(self) -> dict:
        return {"wns_norm": self.wns_norm, "tns_norm": self.tns_norm,
                "area_norm": self.area_norm, "penalty": self.penalty,
                "score": self.score, "sec_pass": self.sec_pass}

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateScore":
        return cls(**d)


@dataclass(frozen=True)
class GroupStats:
    mean: float
    stddev: float  # population
    advantages: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stddev": self.stddev,
                "advantages": list(self.advantages)}

    @classmethod
    def from_dict(cls, d: dict) -> "GroupStats":
        return cls(d["mean"], d["stddev"], tuple(d["advantages"]))


def normalize(value: float, baseline: float) -> float:
    """Relative change vs the frozen baseline, guarded near baseline zero."""
    if abs(baseline) < _ZERO:
        if abs(value) < _ZERO:
            return 0.0
        return math.copysign(NORMALIZE_CAP, value)
    return (value - baseline) / baseline


def score(metrics: PpaMetrics, baseline: PpaMetrics,
          weights: ScoreWeights = ScoreWeights(), *,
          sec_pass: bool = True) -> CandidateScore:
    wns_norm = normalize(metrics.wns, baseline.wns)
    tns_norm = normalize(metrics.tns, baseline.tns)
    area_norm = normalize(metrics.area, baseline.area)
    penalty = weights.area_penalty if area_norm > weights.area_penalty_threshold else 0.0
    total = (weights.alpha * wns_norm + weights.beta * tns_norm
             + weights.gamma * area_norm + penalty)
    return CandidateScore(wns_norm, tns_norm, area_norm, penalty, total, sec_pass)


def select_next(parent, group):
    """Best SEC-passing candidate by score, or the parent when none pass.

    ``group`` entries expose ``sec_pass`` and a numeric ``score_value``
    attribute (or ``score.score``); ties break toward the earliest index.
    """
    best = None
    best_key = None
    for index, candidate in enumerate(group):
        if not _sec_pass(candidate):
            continue
        key = (_score_value(candidate), index)
        if best_key is None or key < best_key:
            best, best_key = candidate, key
    return parent if best is None else best


def _sec_pass(candidate) -> bool:
    return bool(getattr(candidate, "sec_pass"))


def _score_value(candidate) -> float:
    value = getattr(candidate, "score_value", None)
    if value is not None:
        return float(value)
    inner = getattr(candidate, "score")
    return float(inner.score if hasattr(inner, "score") else inner)


def group_advantage(scores: list[float]) -> GroupStats:
    """Population standardization of a group's scores.

    Degenerate groups (size <= 1 or zero spread) get all-zero advantages.
    """
    if not scores:
        return GroupStats(0.0, 0.0, ())
    mean = sum(scores) / len(scores)
    var = sum((s - mean) ** 2 for s in scores) / len(scores)
    std = math.sqrt(var)
    if std < 1e-12 or len(scores) <= 1:
        return GroupStats(mean, std, tuple(0.0 for _ in scores))
    return GroupStats(mean, std, tuple((s - mean) / std for s in scores))
