"""Polar-coded modulation over the AWGN channel.

Polar SC coding, modulation-matched frozen-set construction, multi-level
coding (MLC) and bit-interleaved coded modulation (BICM) transceivers, and a
Monte-Carlo BER/FER simulation harness.
"""
from .polar import (
    BACKEND,
    LLR_MAX,
    PolarCode,
    checknode_llr,
    polar_encode,
    polar_transform,
    sc_decode,
    sc_genie_probe,
    varnode_llr,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "LLR_MAX",
    "PolarCode",
    "checknode_llr",
    "polar_encode",
    "polar_transform",
    "sc_decode",
    "sc_genie_probe",
    "varnode_llr",
    "__version__",
]
