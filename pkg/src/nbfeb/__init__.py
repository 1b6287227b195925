"""Non-blocking full/empty-bit primitives and the software transactional memory built on them."""

from .combining import MemReply, MemRequest, Topology, combine, resolve, simulate
from .consensus import ConsensusInstance, propose
from .feb_memory import BOTTOM, FebMemory, Kind
from .lsa import Clock, Mode, ValidityRange, VersionView
from .reclaim import EpochManager, audit_live
from .stm import ABORTED, ACTIVE, COMMITTED, ContentionDecision, Policy, Stm, cm_decide

__all__ = [
    "ABORTED",
    "ACTIVE",
    "BOTTOM",
    "COMMITTED",
    "Clock",
    "ConsensusInstance",
    "ContentionDecision",
    "EpochManager",
    "FebMemory",
    "Kind",
    "MemReply",
    "MemRequest",
    "Mode",
    "Policy",
    "Stm",
    "Topology",
    "ValidityRange",
    "VersionView",
    "audit_live",
    "cm_decide",
    "combine",
    "propose",
    "resolve",
    "simulate",
]
