"""Betting blockDAG consensus library with a deterministic network simulator."""

__version__ = "0.1.0"

from .blockdag import Block, BlockDag, bcpc, make_block, make_genesis
from .vrf_beacon import (
    BeaconState,
    EligibilityProof,
    VrfKeypair,
    VrfRegistry,
    check_eligibility,
    fold_beacon,
    gen_keypair,
)

__all__ = [
    "__version__",
    "Block",
    "BlockDag",
    "bcpc",
    "make_block",
    "make_genesis",
    "BeaconState",
    "EligibilityProof",
    "VrfKeypair",
    "VrfRegistry",
    "check_eligibility",
    "fold_beacon",
    "gen_keypair",
]
