"""AWGN channel and SNR bookkeeping.

Random streams
--------------
Every frame (or Monte-Carlo trial) owns its own generator, built as
``numpy.random.Generator(PCG64(SeedSequence([master_seed, *keys])))``. The
``SeedSequence`` hash decorrelates neighbouring keys, and because a stream
depends only on its keys, results do not depend on how frames are split across
workers.

Gaussian samples come from the Box-Muller transform applied to PCG64 uniform
doubles: ``r = sqrt(-2 ln(1 - u1))``, ``(r cos 2 pi u2, r sin 2 pi u2)``. One
pair is drawn per channel symbol (real and imaginary part) even for real
constellations, so stream consumption does not depend on the constellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# domain tags keep construction, simulation and equivalence streams apart
STREAM_CONSTRUCTION = 1
STREAM_SIMULATION = 2
STREAM_EQUIVALENCE = 3
STREAM_INTERLEAVER = 4


def rng_stream(master_seed: int, *keys: int) -> np.random.Generator:
    """Deterministic generator for the substream ``(master_seed, *keys)``."""
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class SnrPoint:
    esn0_db: float
    ebn0_db: float
    rate: float

    @classmethod
    def from_esn0(cls, esn0_db, rate):
        return cls(esn0_db, esn0_to_ebn0(esn0_db, rate), rate)

    @classmethod
    def from_ebn0(cls, ebn0_db, rate):
        return cls(ebn0_to_esn0(ebn0_db, rate), ebn0_db, rate)


@dataclass(frozen=True)
class NoiseModel:
    """Noise variance per real dimension; ``complex_dims`` is 1 for ASK, 2 for QAM."""

    sigma2: float
    complex_dims: int = 2

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.complex_dims not in (1, 2):
            raise ValueError("complex_dims must be 1 or 2")

    @classmethod
    def from_esn0(cls, esn0_db, complex_dims=2):
        return cls(snr_to_sigma2(esn0_db, complex_dims), complex_dims)


def snr_to_sigma2(esn0_db: float, complex_dims: int = 2) -> float:
    """Per-real-dimension noise variance ``N0/2`` for unit symbol energy.

    The same per-dimension variance is used for real constellations; only
    the real dimension carries signal there.
    """
    if complex_dims not in (1, 2):
        raise ValueError("complex_dims must be 1 or 2")
    return 10.0 ** (-esn0_db / 10.0) / 2.0


def ebn0_to_esn0(ebn0_db: float, rate: float) -> float:
    """``rate`` is information bits per channel symbol."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return ebn0_db + 10.0 * math.log10(rate)


def esn0_to_ebn0(esn0_db: float, rate: float) -> float:
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return esn0_db - 10.0 * math.log10(rate)


def random_bits(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform bits as ``random() < 0.5`` on the stream's doubles."""
    return (rng.random(count) < 0.5).astype(np.uint8)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance-per-dimension complex Gaussian samples via Box-Muller."""
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    u = rng.random((2,) + shape)
    r = np.sqrt(-2.0 * np.log1p(-u[0]))
    theta = 2.0 * np.pi * u[1]
    return r * np.cos(theta) + 1j * (r * np.sin(theta))


def awgn_apply(symbols, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Add complex white Gaussian noise of variance ``sigma2`` per real dimension."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    return symbols + math.sqrt(noise.sigma2) * complex_normal(rng, symbols.shape).reshape(symbols.shape)
