"""Expert committee selection from sampled-task feedback under query budgets."""

from .core import (
    BinaryOutcomeMatrix,
    CapExceeded,
    Committee,
    CommitteeError,
    DataError,
    Exhausted,
    QueryLedger,
    RankingProfile,
    RivalWeights,
    SelectionResult,
)
from .oracles import EmpiricalSource, GenerativeSource

__all__ = [
    "BinaryOutcomeMatrix",
    "CapExceeded",
    "Committee",
    "CommitteeError",
    "DataError",
    "EmpiricalSource",
    "Exhausted",
    "GenerativeSource",
    "QueryLedger",
    "RankingProfile",
    "RivalWeights",
    "SelectionResult",
]
