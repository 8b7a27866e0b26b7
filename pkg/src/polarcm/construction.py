"""Bit-channel reliability estimation and frozen-set selection.

Three estimators produce a :class:`ReliabilityList` (lower = more reliable),
all in natural index order:

``bec``
    Bhattacharyya recursion on a binary erasure channel.
``ga``
    Gaussian-approximation density evolution of LLR means.
``mc``
    Genie-aided SC error counts measured on the actual scheme: real
    constellation, labeling, interleaver and demapper.

GA phi function
---------------
Check nodes use ``m_out = phi^-1(1 - (1 - phi(m))^2)`` with the two-piece
approximation::

    phi(x) = exp(-0.4527 x^0.86 + 0.0218)                       0 < x < 10
    phi(x) = sqrt(pi / x) exp(-x / 4) (1 - 10 / (7 x))          x >= 10

and ``phi(0) = 1``. The first piece is inverted in closed form, the second by
root finding on ``log phi``, so means in the thousands do not underflow. The
pieces do not meet at 10 (``log phi`` jumps up by about 0.025), so values in
that narrow overlap are inverted through the first piece.
A final mean ``m`` becomes the error estimate ``Q(sqrt(m / 2))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from . import channel
from .polar import PolarCode, sc_genie_probe
from .schemes import SchemeConfig, genie_channel_llrs, modulate_u

ESTIMATORS = ("bec", "ga", "mc")

_A, _B, _C = 0.4527, 0.86, 0.0218
_SWITCH = 10.0


@dataclass(frozen=True, eq=False)
class ReliabilityList:
    estimates: np.ndarray
    source: str
    design_point: float
    trials: int | None = None

    def __post_init__(self):
        est = np.asarray(self.estimates, dtype=np.float64).ravel()
        if est.size and (est.min() < 0 or est.max() > 1):
            raise ValueError("estimates must lie in [0, 1]")
        est.setflags(write=False)
        object.__setattr__(self, "estimates", est)

    def __len__(self):
        return self.estimates.size

    def std_errors(self) -> np.ndarray:
        """Binomial standard errors; only meaningful for ``mc`` lists."""
        if not self.trials:
            raise ValueError("standard errors need a Monte-Carlo list")
        p = self.estimates
        return np.sqrt(p * (1 - p) / self.trials)

    def split(self, parts: int) -> list["ReliabilityList"]:
        return [ReliabilityList(chunk, self.source, self.design_point, self.trials)
                for chunk in np.split(self.estimates, parts)]


@dataclass(frozen=True)
class DesignSpec:
    """How to pick a frozen set.

    ``design_snr_db`` is Es/N0 of the scheme's own constellation. For the
    ``bec`` and ``ga`` surrogates each coded bit is treated as BPSK carrying
    ``Es / m``.
    """

    design_snr_db: float
    k: int
    estimator: str = "ga"
    mc_trials: int = 10_000
    seed: int = 0
    constellation: dict | None = None
    batch: int = 512

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.mc_trials < 1:
            raise ValueError("mc_trials must be >= 1")


def bec_bhattacharyya(n: int, eps: float) -> ReliabilityList:
    """Erasure probabilities of the 2^n synthesized channels of a BEC(eps).

    Children of ``z`` are ``2z - z^2`` (index ``2i``) and ``z^2`` (``2i + 1``).
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if n < 0:
        raise ValueError("n must be non-negative")
    z = np.array([eps], dtype=np.float64)
    for _ in range(n):
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return ReliabilityList(z, "bec", eps)


def log_phi(x: float) -> float:
    if x <= 0:
        return 0.0
    if x < _SWITCH:
        return min(0.0, -_A * x ** _B + _C)
    return 0.5 * math.log(math.pi / x) - x / 4.0 + math.log1p(-10.0 / (7.0 * x))


def phi(x: float) -> float:
    return math.exp(log_phi(x))


def phi_inverse_log(log_y: float) -> float:
    """Solve ``log_phi(x) = log_y`` for ``x >= 0``."""
    if log_y >= 0.0:
        return 0.0
    if log_y > log_phi(_SWITCH - 1e-12):
        return ((_C - log_y) / _A) ** (1.0 / _B)
    hi = max(4.0 * (-log_y) + 40.0, 2 * _SWITCH)
    while log_phi(hi) > log_y:
        hi *= 2.0
    return brentq(lambda x: log_phi(x) - log_y, _SWITCH, hi, xtol=1e-12, rtol=1e-14)


def ga_checknode_mean(m: float) -> float:
    lp = log_phi(m)
    p = math.exp(lp)
    # 1 - (1 - p)^2 = p (2 - p), kept in the log domain
    return phi_inverse_log(lp + math.log(2.0 - p))


def ga_density_evolution(n: int, llr_mean: float) -> ReliabilityList:
    """Gaussian-approximation construction for a channel with LLR mean ``llr_mean``.

    Under the consistent-Gaussian assumption an LLR of mean ``m`` has variance
    ``2m``; BPSK over AWGN with per-dimension variance ``s2`` gives ``2/s2``.
    """
    if llr_mean < 0:
        raise ValueError(f"llr_mean must be non-negative, got {llr_mean}")
    means = np.array([float(llr_mean)])
    for _ in range(n):
        nxt = np.empty(2 * means.size)
        nxt[0::2] = [ga_checknode_mean(v) for v in means]
        nxt[1::2] = 2.0 * means
        means = nxt
    est = ndtr(-np.sqrt(means / 2.0))
    return ReliabilityList(est, "ga", float(llr_mean))


def bpsk_llr_mean(esn0_db: float) -> float:
    """LLR mean ``2 / s2`` of unit-energy BPSK at the given Es/N0."""
    return 2.0 / channel.snr_to_sigma2(esn0_db)


def select_frozen(rel, K: int) -> np.ndarray:
    """Frozen mask with information bits on the ``K`` smallest estimates.

    Among equal estimates the smaller indices are frozen first.
    """
    est = np.asarray(getattr(rel, "estimates", rel), dtype=np.float64)
    if not 0 <= K <= est.size:
        raise ValueError(f"K={K} out of range for {est.size} bit channels")
    order = np.lexsort((-np.arange(est.size), est))
    mask = np.ones(est.size, dtype=np.uint8)
    mask[order[:K]] = 0
    return mask


def allocate_mlc(per_level_rels, K_total: int) -> tuple[list[np.ndarray], list[int]]:
    """Pick the ``K_total`` globally most reliable channels across all levels."""
    lists = [np.asarray(getattr(r, "estimates", r), dtype=np.float64) for r in per_level_rels]
    if not lists:
        raise ValueError("need at least one level")
    if len({lst.size for lst in lists}) != 1:
        raise ValueError("all levels must have the same number of bit channels")
    pooled = np.concatenate(lists)
    if not 0 <= K_total <= pooled.size:
        raise ValueError(f"K_total={K_total} out of range for {pooled.size} bit channels")
    masks = np.split(select_frozen(pooled, K_total), len(lists))
    return masks, [int((mk == 0).sum()) for mk in masks]


def mc_bit_channel_estimate(spec: DesignSpec, scheme: SchemeConfig, mode="exact") -> ReliabilityList:
    """Genie-aided Monte-Carlo error rates of every bit channel of ``scheme``.

    Trial ``t`` draws a uniform input vector over all positions and its noise
    from stream ``(seed, STREAM_CONSTRUCTION, t)``, so results do not depend
    on batching. MLC lists are level-major.
    """
    if spec.k > scheme.bit_channels:
        raise ValueError(f"k={spec.k} exceeds the {scheme.bit_channels} bit channels of the scheme")
    if spec.mc_trials < 1:
        raise ValueError("mc_trials must be >= 1")
    c = scheme.constellation
    sigma2 = channel.snr_to_sigma2(spec.design_snr_db, c.complex_dims)
    noise = channel.NoiseModel(sigma2, c.complex_dims)
    total = scheme.bit_channels
    counts = np.zeros(total, dtype=np.int64)
    for start in range(0, spec.mc_trials, spec.batch):
        stop = min(spec.mc_trials, start + spec.batch)
        us = np.empty((stop - start, total), dtype=np.uint8)
        ws = np.empty((stop - start, scheme.n_sym), dtype=np.complex128)
        for row, t in enumerate(range(start, stop)):
            rng = channel.rng_stream(spec.seed, channel.STREAM_CONSTRUCTION, t)
            us[row] = channel.random_bits(rng, total)
            ws[row] = channel.complex_normal(rng, scheme.n_sym)
        ys = modulate_u(us, scheme) + math.sqrt(noise.sigma2) * ws
        llr = genie_channel_llrs(ys, sigma2, scheme, us, mode)
        if scheme.kind == "mlc":
            errs = sc_genie_probe(llr.reshape(-1, scheme.n_sym), us.reshape(-1, scheme.n_sym), mode)
            counts += errs.reshape(stop - start, total).sum(axis=0, dtype=np.int64)
        else:
            counts += sc_genie_probe(llr, us, mode).sum(axis=0, dtype=np.int64)
    return ReliabilityList(counts / spec.mc_trials, "mc", float(spec.design_snr_db), spec.mc_trials)


def surrogate_reliability(spec: DesignSpec, scheme: SchemeConfig) -> ReliabilityList:
    """BPSK-equivalent (mismatched) design: every coded bit gets ``Es / m``."""
    bit_snr = spec.design_snr_db - 10.0 * math.log10(scheme.m)
    length = scheme.n_sym if scheme.kind == "mlc" else scheme.bit_channels
    n = length.bit_length() - 1
    if spec.estimator == "ga":
        one = ga_density_evolution(n, bpsk_llr_mean(bit_snr))
    else:
        one = bec_bhattacharyya(n, math.exp(-10.0 ** (bit_snr / 10.0)))
    reps = scheme.m if scheme.kind == "mlc" else 1
    return ReliabilityList(np.tile(one.estimates, reps), one.source, float(spec.design_snr_db))


def scheme_reliability(spec: DesignSpec, scheme: SchemeConfig) -> ReliabilityList:
    if spec.estimator == "mc":
        return mc_bit_channel_estimate(spec, scheme)
    return surrogate_reliability(spec, scheme)


def codes_from_reliability(rel: ReliabilityList, scheme: SchemeConfig, K: int) -> list[PolarCode]:
    if scheme.kind == "bicm":
        return [PolarCode(select_frozen(rel, K))]
    masks, _ = allocate_mlc(rel.split(scheme.m), K)
    return [PolarCode(mk) for mk in masks]


def construct_scheme(template: SchemeConfig, spec: DesignSpec,
                     rel: ReliabilityList | None = None) -> SchemeConfig:
    """Attach frozen sets chosen by ``spec`` to a structural template."""
    if spec.k > template.bit_channels:
        raise ValueError(f"k={spec.k} exceeds the {template.bit_channels} bit channels of the scheme")
    if rel is None:
        rel = scheme_reliability(spec, template)
    return template.with_codes(codes_from_reliability(rel, template, spec.k))


def construction_report(template: SchemeConfig, spec: DesignSpec) -> dict:
    """JSON-ready document emitted by the ``construct`` command."""
    rel = scheme_reliability(spec, template)
    scheme = construct_scheme(template, spec, rel)
    doc = {
        "scheme": template.summary(),
        "design_point": {"esn0_db": spec.design_snr_db},
        "estimator": spec.estimator,
        "estimates": rel.estimates.tolist(),
        "k_per_level": scheme.level_k,
    }
    if spec.estimator == "mc":
        doc["mc_trials"] = spec.mc_trials
        doc["seed"] = spec.seed
    masks = [cd.frozen_mask.tolist() for cd in scheme.codes]
    if scheme.kind == "bicm":
        doc["frozen_mask"] = masks[0]
    else:
        doc["frozen_masks"] = masks
    return doc

