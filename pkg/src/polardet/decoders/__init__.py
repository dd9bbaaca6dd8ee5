from .bp import BpState, bp_decode, bp_init, bp_iterate
from .fastssc import FastSscTree, NodeKind, fastssc_build_tree, fastssc_decode
from .sc import sc_decode
from .scl import scl_decode, scl_decode_batch

__all__ = [
    "BpState", "bp_decode", "bp_init", "bp_iterate",
    "FastSscTree", "NodeKind", "fastssc_build_tree", "fastssc_decode",
    "sc_decode", "scl_decode", "scl_decode_batch",
]
