"""Constellations, labelings and soft demappers.

Conventions
-----------
* Labels are msb-first bit tuples; ``label_int`` packs them msb-first.
* Bit 0 maps to the positive amplitude: ASK position ``k`` (``k = 0`` is the
  largest positive amplitude) carries ``binary(k)`` (natural) or
  ``gray_code(m)[k]`` (Gray).
* Gray and natural labels are related by ``gray = natural . T`` (row vector
  times matrix over GF(2)), the same convention as ``x = u F`` for the polar
  transform. ``T`` is upper bidiagonal.
* MLC level ``l`` is label bit ``m - 1 - l``: the least significant label bit
  is level 0. For amplitude-ordered natural labels this bit splits the
  constellation into the two subsets with the largest intra-subset distance,
  so decoding lsb first follows the set-partitioning (SP) chain.

Square QAM with Gray labeling is the product of two Gray ASKs (I bits, then Q
bits). The natural labeling of square QAM is Ungerboeck set partitioning built
from the axis position indices ``kI`` and ``kQ``: level ``2j`` is
``bit_j(kI) xor bit_j(kQ)`` and level ``2j + 1`` is ``bit_j(kI)``. For 4-QAM
this is natural 4-PSK labeling around the circle and equals the Gray mapper
preceded by ``T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polar import LLR_MAX

LABELINGS = ("gray", "natural")


def _bits_of(values, m):
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(m - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def _int_of(bits):
    bits = np.asarray(bits, dtype=np.int64)
    m = bits.shape[-1]
    return (bits << np.arange(m - 1, -1, -1)).sum(axis=-1)


def gray_code(m: int) -> list[tuple[int, ...]]:
    """Binary-reflected Gray labels, msb-first."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    k = np.arange(2 ** m)
    return [tuple(int(b) for b in row) for row in _bits_of(k ^ (k >> 1), m)]


def gray_sp_matrix(m: int) -> np.ndarray:
    """Upper-bidiagonal ``T`` with ``gray_code(m)[k] = binary(k) . T (mod 2)``."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return (np.eye(m, dtype=np.uint8) + np.eye(m, k=1, dtype=np.uint8)).astype(np.uint8)


def apply_label_matrix(labels, T) -> np.ndarray:
    """Row-vector product ``labels . T`` over GF(2); works on stacked labels."""
    return (np.asarray(labels, dtype=np.int64) @ np.asarray(T, dtype=np.int64) % 2).astype(np.uint8)


def gf2_rank(M) -> int:
    M = np.array(M, dtype=np.uint8) % 2
    rank = 0
    rows, cols = M.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if M[r, c]), None)
        if pivot is None:
            continue
        M[[rank, pivot]] = M[[pivot, rank]]
        for r in range(rows):
            if r != rank and M[r, c]:
                M[r] ^= M[rank]
        rank += 1
    return rank


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-energy signal set with a labeling.

    ``points[label_int]`` is the point carrying that label, so the array is
    the label-to-point bijection.
    """

    kind: str
    m: int
    labeling: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        if pts.shape != (2 ** self.m,):
            raise ValueError("need exactly 2^m points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        labels = _bits_of(np.arange(2 ** self.m), self.m)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return 2 ** self.m

    @property
    def complex_dims(self) -> int:
        return 2 if self.kind == "qam" else 1

    @property
    def level_bits(self) -> np.ndarray:
        """Label bits reordered by MLC level (column ``l`` is level ``l``)."""
        return self.labels[:, ::-1]

    def label_to_point(self, label) -> complex:
        return complex(self.points[int(_int_of(label))])

    def descriptor(self) -> dict:
        return {"type": self.kind, "m": self.m, "labeling": self.labeling}

    def __repr__(self):
        return f"Constellation({self.kind}, m={self.m}, {self.labeling})"


def _ask_amplitudes(m):
    M = 2 ** m
    amps = (M - 1 - 2 * np.arange(M)).astype(float)
    return amps


def _ask_position_labels(m, labeling):
    k = np.arange(2 ** m)
    if labeling == "natural":
        return k
    if labeling == "gray":
        return k ^ (k >> 1)
    raise ValueError(f"unknown labeling {labeling!r}")


def build_ask(m: int, labeling: str = "gray") -> Constellation:
    """2^m-ASK with amplitudes ``{+-1, +-3, ...}`` scaled to unit energy."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    amps = _ask_amplitudes(m)
    amps /= np.sqrt(np.mean(amps ** 2))
    points = np.empty(2 ** m, dtype=np.complex128)
    points[_ask_position_labels(m, labeling)] = amps
    return Constellation("ask", m, labeling, points)


def build_square_qam(m: int, labeling: str = "gray") -> Constellation:
    """Square 2^m-QAM from two (m/2)-bit ASKs, jointly normalised."""
    if m < 2 or m % 2:
        raise ValueError(f"square QAM needs an even m >= 2, got {m}")
    if labeling not in LABELINGS:
        raise ValueError(f"unknown labeling {labeling!r}")
    p = m // 2
    amps = _ask_amplitudes(p)
    scale = np.sqrt(2 * np.mean(amps ** 2))
    kI, kQ = np.meshgrid(np.arange(2 ** p), np.arange(2 ** p), indexing="ij")
    kI, kQ = kI.ravel(), kQ.ravel()
    pts = (amps[kI] + 1j * amps[kQ]) / scale
    if labeling == "gray":
        labels = (_ask_position_labels(p, "gray")[kI] << p) | _ask_position_labels(p, "gray")[kQ]
    else:
        labels = np.zeros_like(kI)
        for j in range(p):
            bi, bq = (kI >> j) & 1, (kQ >> j) & 1
            labels |= (bi ^ bq) << (2 * j)      # level 2j
            labels |= bi << (2 * j + 1)         # level 2j + 1
    points = np.empty(2 ** m, dtype=np.complex128)
    points[labels] = pts
    return Constellation("qam", m, labeling, points)


def constellation_from_descriptor(desc: dict) -> Constellation:
    """Build from ``{"type": "ask"|"qam", "m": int, "labeling": "gray"|"natural"}``."""
    kind = desc.get("type")
    m = desc.get("m")
    labeling = desc.get("labeling", "gray")
    if not isinstance(m, int) or isinstance(m, bool):
        raise ValueError("constellation.m must be an integer")
    if kind == "ask":
        return build_ask(m, labeling)
    if kind == "qam":
        return build_square_qam(m, labeling)
    raise ValueError(f"constellation.type must be 'ask' or 'qam', got {kind!r}")


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map consecutive msb-first m-bit groups to points; works row-wise on 2-D input."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] % c.m:
        raise ValueError(f"bit count {bits.shape[-1]} not divisible by m={c.m}")
    groups = bits.reshape(bits.shape[:-1] + (-1, c.m))
    return c.points[_int_of(groups)]


def _metrics(y, sigma2, c):
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    y = np.asarray(y, dtype=np.complex128)
    return -np.abs(y[..., None] - c.points) ** 2 / (2.0 * sigma2)


def _lse(metric, mask, maxlog):
    # log-sum-exp over the last axis restricted to mask; -inf where empty
    masked = np.where(mask, metric, -np.inf)
    peak = masked.max(axis=-1)
    if maxlog:
        return peak
    safe = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.exp(masked - safe[..., None]).sum(axis=-1))


def bicm_llrs_raw(y, sigma2, c: Constellation, mode="exact") -> np.ndarray:
    """Unsaturated bit LLRs, shape ``y.shape + (m,)`` in label (msb-first) order."""
    if mode not in ("exact", "maxlog"):
        raise ValueError(f"unknown demapper mode {mode!r}")
    metric = _metrics(y, sigma2, c)
    out = np.empty(metric.shape[:-1] + (c.m,))
    for j in range(c.m):
        zero = c.labels[:, j] == 0
        out[..., j] = _lse(metric, zero, mode == "maxlog") - _lse(metric, ~zero, mode == "maxlog")
    return out


def demap_bicm_llrs(y, sigma2, c: Constellation, mode="exact") -> np.ndarray:
    """Parallel bit LLRs ``ln sum_{b_j=0} e^{-|y-s|^2/2s2} / sum_{b_j=1} ...``.

    ``mode="maxlog"`` replaces each sum by its largest term. Scalar ``y``
    gives shape ``(m,)``; an array gives ``y.shape + (m,)``.
    """
    return np.clip(bicm_llrs_raw(y, sigma2, c, mode), -LLR_MAX, LLR_MAX)


def mlc_level_llr_raw(y, sigma2, c: Constellation, level, lower_bits=(), mode="exact"):
    if not 0 <= level < c.m:
        raise ValueError(f"level must be in [0, {c.m}), got {level}")
    y = np.asarray(y, dtype=np.complex128)
    lower = np.asarray(lower_bits, dtype=np.uint8)
    if lower.shape != y.shape + (level,):
        if lower.shape == (level,):
            lower = np.broadcast_to(lower, y.shape + (level,))
        else:
            raise ValueError(f"lower_bits must have {level} entries per symbol, got shape {lower.shape}")
    metric = _metrics(y, sigma2, c)
    lv = c.level_bits
    agree = np.all(lv[:, :level] == lower[..., None, :], axis=-1) if level else np.ones(metric.shape, bool)
    zero = lv[:, level] == 0
    maxlog = mode == "maxlog"
    return _lse(metric, agree & zero, maxlog) - _lse(metric, agree & ~zero, maxlog)


def demap_mlc_level(y, sigma2, c: Constellation, level, lower_bits=(), mode="exact"):
    """LLR of MLC level ``level`` given the decided bits of lower levels.

    Only points whose labels agree with ``lower_bits`` on levels ``< level``
    enter the sums; higher levels are marginalised. ``lower_bits`` has shape
    ``(level,)`` or ``y.shape + (level,)``.
    """
    out = np.clip(mlc_level_llr_raw(y, sigma2, c, level, lower_bits, mode), -LLR_MAX, LLR_MAX)
    return float(out) if out.ndim == 0 else out


def _mc_symbols(c: Constellation, esn0_db, samples, rng):
    from . import channel
    sigma2 = channel.snr_to_sigma2(esn0_db, c.complex_dims)
    idx = rng.integers(0, c.size, samples)
    noise = channel.complex_normal(rng, samples)
    if c.complex_dims == 1:
        noise = noise.real
    return idx, c.points[idx] + np.sqrt(sigma2) * noise, sigma2


def symbol_mi(c: Constellation, esn0_db, samples, rng) -> float:
    """Monte-Carlo estimate of I(X; Y) in bits for uniform inputs.

    ``m - E[log2 sum_x' p(y|x') / p(y|x)]``.
    """
    idx, y, sigma2 = _mc_symbols(c, esn0_db, samples, rng)
    metric = _metrics(y, sigma2, c)
    own = metric[np.arange(samples), idx]
    lse = _lse(metric, np.ones(c.size, bool), False)
    return float(c.m - np.mean(lse - own) / np.log(2.0))


def level_mis(c: Constellation, esn0_db, samples, rng) -> np.ndarray:
    """Monte-Carlo estimates of I(B_l; Y | B_0 .. B_{l-1}) for every MLC level.

    Uses the exact conditional level LLR ``L`` given the true lower bits:
    ``1 - E[log2(1 + exp(-(1 - 2 b) L))]``. The same samples serve all levels.
    """
    idx, y, sigma2 = _mc_symbols(c, esn0_db, samples, rng)
    bits = c.level_bits[idx]
    out = np.empty(c.m)
    for level in range(c.m):
        llr = mlc_level_llr_raw(y, sigma2, c, level, bits[:, :level])
        signed = (1.0 - 2.0 * bits[:, level]) * llr
        out[level] = 1.0 - np.mean(np.logaddexp(0.0, -signed)) / np.log(2.0)
    return out
