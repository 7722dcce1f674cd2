"""Dirty paper coding with sign-bit shaping and LDPC codes."""
from .channels import awgn_capacity_snr_for_rate, bc_capacity_region, granular_gain_and_shaping_loss
from .gf2 import Gf2Matrix, mat_vec_mul, row_reduce
from .ldpc import LdpcCode, bp_decode, construct, encode_systematic
from .modulation import PamMapping, ReplicatedConstellation, demap_llr, map_symbols, mod_fold
from .pipeline import DpcCodes, DpcSystemParams, decode_block, encode_block
from .shaping import ConvCode, conv_encode, inverse_syndrome_former, shape, syndrome_former

__version__ = "0.1.0"

__all__ = [
    "ConvCode",
    "DpcCodes",
    "DpcSystemParams",
    "Gf2Matrix",
    "LdpcCode",
    "PamMapping",
    "ReplicatedConstellation",
    "awgn_capacity_snr_for_rate",
    "bc_capacity_region",
    "bp_decode",
    "construct",
    "conv_encode",
    "decode_block",
    "demap_llr",
    "encode_block",
    "encode_systematic",
    "granular_gain_and_shaping_loss",
    "inverse_syndrome_former",
    "map_symbols",
    "mat_vec_mul",
    "mod_fold",
    "row_reduce",
    "shape",
    "syndrome_former",
]
