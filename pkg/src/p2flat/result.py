"""Shared verdict vocabulary for classifiers and the prolongation search."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

__all__ = ["Verdict", "ClassificationResult"]


class Verdict(enum.Enum):
    P2_FLAT = "P2_FLAT"
    NOT_P2_FLAT = "NOT_P2_FLAT"
    FLAT_SUFFICIENT = "FLAT_SUFFICIENT"
    NOT_FLAT = "NOT_FLAT"
    STATIC_LINEARIZABLE = "STATIC_LINEARIZABLE"
    NOT_STATIC_LINEARIZABLE = "NOT_STATIC_LINEARIZABLE"
    INCONCLUSIVE = "INCONCLUSIVE"

    def is_negative(self) -> bool:
        return self.name.startswith("NOT_")


@dataclass
class ClassificationResult:
    """Outcome of one analysis.

    ``permutation`` lists original input indices in the role order the
    winning condition set used; ``minimal_j`` is stated in the original
    input labelling.  ``evidence`` maps human-readable distribution
    descriptions to their measured rank/involutivity.  NOT_P2_FLAT is
    only ever emitted by checkers whose conditions are necessary;
    sufficient-only checkers degrade to INCONCLUSIVE on failure.
    """

    verdict: Verdict
    theorem: str
    case: Optional[str] = None
    minimal_j: Optional[tuple] = None
    permutation: Optional[tuple] = None
    evidence: dict = field(default_factory=dict)
    seed: Optional[int] = None
    reason: str = ""
    details: Any = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "theorem": self.theorem,
            "case": self.case,
            "minimal_j": list(self.minimal_j) if self.minimal_j is not None else None,
            "permutation": list(self.permutation) if self.permutation is not None else None,
            "evidence": self.evidence,
            "seed": self.seed,
            "reason": self.reason,
        }
