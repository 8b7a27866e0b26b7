"""MLC and BICM transceivers over polar codes.

Both scheme kinds send exactly ``n_sym`` channel symbols per frame, which is
how equal structural delay is enforced.

* MLC: one polar code of length ``n_sym`` per level, natural labeling,
  multistage decoding (level 0 first, hard re-encoded decisions fed upward).
* BICM: one polar code of length ``m * n_sym``, an interleaver, consecutive
  m-bit groups mapped to symbols (Gray labeling by default) and parallel bit
  LLRs into a single SC decoder.

Interleaver kinds (``out[i] = seq[perm[i]]``):

``identity``
    codeword bit ``m t + b`` is label bit ``b`` of symbol ``t``.
``block``
    codeword block ``j`` (bits ``j n_sym .. (j+1) n_sym - 1``) feeds label bit
    ``m - 1 - j`` of every symbol, i.e. block ``j`` is mapped like MLC level
    ``j``. With this layout the outermost polar stage pairs the bits of each
    symbol, which is what makes Gray BICM and natural MLC coincide for 4-QAM.
``random``
    a Fisher-Yates shuffle (``Generator.permutation``) drawn from the
    ``(seed, STREAM_INTERLEAVER)`` stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import channel
from .modulation import (
    Constellation,
    apply_label_matrix,
    bicm_llrs_raw,
    build_square_qam,
    demap_bicm_llrs,
    demap_mlc_level,
    gray_sp_matrix,
    map_bits,
    mlc_level_llr_raw,
)
from .polar import PolarCode, polar_encode, polar_transform, sc_decode
from ._sc_py import boxplus

INTERLEAVERS = ("identity", "block", "random")


def _is_pow2(v):
    return v >= 1 and not v & (v - 1)


def make_permutation(kind: str, length: int, m: int = 1, seed: int = 0) -> np.ndarray:
    if kind == "identity":
        return np.arange(length)
    if kind == "block":
        if length % m:
            raise ValueError("block interleaver length must be a multiple of m")
        n_sym = length // m
        t, b = np.divmod(np.arange(length), m)
        return (m - 1 - b) * n_sym + t
    if kind == "random":
        return channel.rng_stream(seed, channel.STREAM_INTERLEAVER).permutation(length)
    raise ValueError(f"unknown interleaver {kind!r}; expected one of {INTERLEAVERS}")


def _check_perm(seq_len, perm):
    perm = np.asarray(perm)
    if perm.ndim != 1 or perm.size != seq_len or not np.array_equal(np.sort(perm), np.arange(seq_len)):
        raise ValueError("perm is not a permutation of the sequence positions")
    return perm


def interleave(seq, perm) -> np.ndarray:
    """``out[..., i] = seq[..., perm[i]]``."""
    seq = np.asarray(seq)
    perm = _check_perm(seq.shape[-1], perm)
    return seq[..., perm]


def deinterleave(seq, perm) -> np.ndarray:
    """Inverse of :func:`interleave`."""
    seq = np.asarray(seq)
    perm = _check_perm(seq.shape[-1], perm)
    out = np.empty_like(seq)
    out[..., perm] = seq
    return out


@dataclass(frozen=True, eq=False)
class SchemeConfig:
    """Transceiver description.

    ``codes`` holds ``m`` level codes for MLC or a single code for BICM. It
    may be ``None`` for a structural template, which is what the
    Monte-Carlo construction consumes before any frozen set exists.
    """

    kind: str
    n_sym: int
    constellation: Constellation
    codes: tuple | None = None
    interleaver: str = "identity"
    interleaver_seed: int = 0
    perm: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = self.constellation
        if self.kind not in ("mlc", "bicm"):
            raise ValueError(f"scheme kind must be 'mlc' or 'bicm', got {self.kind!r}")
        if not _is_pow2(self.n_sym):
            raise ValueError(f"n_sym must be a power of two, got {self.n_sym}")
        if self.kind == "mlc":
            if c.m > 1 and c.labeling != "natural":
                raise ValueError("MLC requires natural (set-partitioning) labeling")
            if self.interleaver != "identity":
                raise ValueError("MLC has no interleaver")
        elif not _is_pow2(c.m):
            raise ValueError(f"BICM needs a power-of-two m so that m * n_sym is a polar length, got m={c.m}")
        perm = make_permutation(self.interleaver, c.m * self.n_sym, c.m, self.interleaver_seed)
        perm.setflags(write=False)
        object.__setattr__(self, "perm", perm)
        if self.codes is not None:
            codes = tuple(self.codes)
            object.__setattr__(self, "codes", codes)
            want = (c.m, self.n_sym) if self.kind == "mlc" else (1, c.m * self.n_sym)
            if len(codes) != want[0] or any(cd.block_len != want[1] for cd in codes):
                raise ValueError(f"{self.kind} needs {want[0]} code(s) of length {want[1]}")

    @property
    def m(self) -> int:
        return self.constellation.m

    @property
    def bit_channels(self) -> int:
        return self.m * self.n_sym

    @property
    def level_k(self) -> list[int]:
        self._need_codes()
        return [cd.info_count for cd in self.codes]

    @property
    def info_bits(self) -> int:
        return sum(self.level_k)

    @property
    def rate_per_symbol(self) -> float:
        return self.info_bits / self.n_sym

    def with_codes(self, codes) -> "SchemeConfig":
        return replace(self, codes=tuple(codes))

    def _need_codes(self):
        if self.codes is None:
            raise ValueError("scheme has no codes yet; run a construction first")

    def summary(self) -> dict:
        out = {
            "kind": self.kind,
            "constellation": self.constellation.descriptor(),
            "n_sym": self.n_sym,
            "structural_delay_symbols": self.n_sym,
            "bit_channels": self.bit_channels,
            "interleaver": self.interleaver,
        }
        if self.codes is not None:
            out.update({
                "block_lengths": [cd.block_len for cd in self.codes],
                "k_per_level": self.level_k,
                "frozen_per_level": [cd.block_len - cd.info_count for cd in self.codes],
                "info_bits": self.info_bits,
                "code_rate": self.info_bits / self.bit_channels,
                "bits_per_symbol": self.rate_per_symbol,
            })
        return out


def mlc_scheme(constellation: Constellation, codes=None, n_sym=None) -> SchemeConfig:
    if n_sym is None:
        n_sym = codes[0].block_len
    return SchemeConfig("mlc", n_sym, constellation, codes)


def bicm_scheme(constellation: Constellation, code=None, n_sym=None,
                interleaver="identity", seed=0) -> SchemeConfig:
    if n_sym is None:
        n_sym = code.block_len // constellation.m
    return SchemeConfig("bicm", n_sym, constellation, None if code is None else (code,),
                        interleaver, seed)


@dataclass(frozen=True)
class FrameResult:
    """Decoded message; error fields are ``None`` when no reference was given."""

    msg_hat: np.ndarray
    bit_errors: int | None = None
    frame_error: bool | None = None


def _split_msg(msg, s):
    msg = np.asarray(msg, dtype=np.uint8)
    if msg.ndim == 0 or msg.shape[-1] != s.info_bits:
        raise ValueError(f"message length {msg.shape[-1] if msg.ndim else 0} != {s.info_bits}")
    edges = np.cumsum([0] + s.level_k)
    return [msg[..., a:b] for a, b in zip(edges[:-1], edges[1:])]


def _check_kind(s, kind):
    if s.kind != kind:
        raise ValueError(f"expected a {kind} scheme, got {s.kind}")
    s._need_codes()


def mlc_label_bits(level_codewords) -> np.ndarray:
    """Stack per-level codewords into msb-first labels (level l -> bit m-1-l)."""
    return np.stack(level_codewords[::-1], axis=-1)


def mlc_encode(msg, s: SchemeConfig) -> np.ndarray:
    """Encode each level and map; ``msg`` may be 2-D (frames x bits)."""
    _check_kind(s, "mlc")
    cws = [polar_encode(part, cd) for part, cd in zip(_split_msg(msg, s), s.codes)]
    labels = mlc_label_bits(cws)
    return map_bits(labels.reshape(labels.shape[:-2] + (-1,)), s.constellation)


def bicm_encode(msg, s: SchemeConfig) -> np.ndarray:
    _check_kind(s, "bicm")
    cw = polar_encode(np.asarray(msg, dtype=np.uint8), s.codes[0])
    return map_bits(interleave(cw, s.perm), s.constellation)


def encode(msg, s: SchemeConfig) -> np.ndarray:
    return mlc_encode(msg, s) if s.kind == "mlc" else bicm_encode(msg, s)


def _check_y(y, s):
    y = np.asarray(y, dtype=np.complex128)
    if y.ndim == 0 or y.shape[-1] != s.n_sym:
        raise ValueError(f"expected {s.n_sym} received symbols, got shape {y.shape}")
    return y


def mlc_decode_batch(y, sigma2, s: SchemeConfig, demap="exact", checknode="exact"):
    """Multistage decoding of each row of ``y``; returns ``(msg_hat, x_hats)``."""
    _check_kind(s, "mlc")
    y = np.atleast_2d(_check_y(y, s))
    lower = np.zeros(y.shape + (0,), dtype=np.uint8)
    msgs, xs = [], []
    for level, cd in enumerate(s.codes):
        llr = demap_mlc_level(y, sigma2, s.constellation, level, lower, demap)
        msg_l, _, x_l = sc_decode(np.atleast_2d(llr), cd, checknode)
        msgs.append(msg_l)
        xs.append(x_l)
        lower = np.concatenate([lower, x_l[..., None]], axis=-1)
    return np.concatenate(msgs, axis=-1), xs


def bicm_llrs(y, sigma2, s: SchemeConfig, demap="exact") -> np.ndarray:
    """Deinterleaved channel LLRs in codeword order, shape ``(frames, m n_sym)``."""
    y = np.atleast_2d(_check_y(y, s))
    llr = demap_bicm_llrs(y, sigma2, s.constellation, demap)
    return deinterleave(llr.reshape(y.shape[0], -1), s.perm)


def bicm_decode_batch(y, sigma2, s: SchemeConfig, demap="exact", checknode="exact"):
    _check_kind(s, "bicm")
    msg_hat, _, _ = sc_decode(bicm_llrs(y, sigma2, s, demap), s.codes[0], checknode)
    return msg_hat


def decode_batch(y, sigma2, s: SchemeConfig, demap="exact", checknode="exact") -> np.ndarray:
    if s.kind == "mlc":
        return mlc_decode_batch(y, sigma2, s, demap, checknode)[0]
    return bicm_decode_batch(y, sigma2, s, demap, checknode)


def _frame_result(msg_hat, msg):
    if msg is None:
        return FrameResult(msg_hat)
    errs = int(np.count_nonzero(msg_hat != np.asarray(msg, dtype=np.uint8)))
    return FrameResult(msg_hat, errs, errs > 0)


def mlc_msd_decode(y, sigma2, s: SchemeConfig, msg=None, demap="exact", checknode="exact") -> FrameResult:
    """Decode one frame by multistage decoding; ``msg`` enables error counts."""
    y = _check_y(y, s)
    if y.ndim != 1:
        raise ValueError("mlc_msd_decode takes one frame; use mlc_decode_batch for many")
    msg_hat = mlc_decode_batch(y, sigma2, s, demap, checknode)[0][0]
    return _frame_result(msg_hat, msg)


def bicm_sc_decode(y, sigma2, s: SchemeConfig, msg=None, demap="exact", checknode="exact") -> FrameResult:
    """Demap, deinterleave and SC-decode one frame."""
    y = _check_y(y, s)
    if y.ndim != 1:
        raise ValueError("bicm_sc_decode takes one frame; use bicm_decode_batch for many")
    msg_hat = bicm_decode_batch(y, sigma2, s, demap, checknode)[0]
    return _frame_result(msg_hat, msg)


def genie_channel_llrs(y, sigma2, s: SchemeConfig, u_true, mode="exact") -> np.ndarray:
    """Channel LLRs for genie-aided probing, level-major for MLC.

    MLC level ``l`` is demapped with the TRUE codeword bits of the lower levels;
    BICM uses the plain parallel bit metrics. ``u_true`` has shape
    ``(frames, m n_sym)`` in level-major order for MLC.
    """
    y = np.atleast_2d(_check_y(y, s))
    if s.kind == "bicm":
        return bicm_llrs(y, sigma2, s, mode)
    u = np.asarray(u_true).reshape(y.shape[0], s.m, s.n_sym)
    cws = polar_transform(u)
    out = np.empty((y.shape[0], s.m, s.n_sym))
    lower = np.zeros(y.shape + (0,), dtype=np.uint8)
    for level in range(s.m):
        out[:, level] = demap_mlc_level(y, sigma2, s.constellation, level, lower, mode)
        lower = np.concatenate([lower, cws[:, level, :, None]], axis=-1)
    return out.reshape(y.shape[0], -1)


def modulate_u(u, s: SchemeConfig) -> np.ndarray:
    """Map full input vectors (frozen positions included) to symbols."""
    u = np.asarray(u, dtype=np.uint8)
    if s.kind == "bicm":
        return map_bits(interleave(polar_transform(u), s.perm), s.constellation)
    cws = polar_transform(u.reshape(u.shape[:-1] + (s.m, s.n_sym)))
    labels = mlc_label_bits([cws[..., level, :] for level in range(s.m)])
    return map_bits(labels.reshape(labels.shape[:-2] + (-1,)), s.constellation)


@dataclass
class EquivalenceReport:
    label_identity_ok: bool
    trials_run: int
    decisions_equal: int
    max_llr_gap: float
    bicm_frame_errors: int = 0
    mlc_frame_errors: int = 0
    esn0_db: float = 0.0

    def as_dict(self) -> dict:
        return {
            "label_identity_ok": self.label_identity_ok,
            "trials_run": self.trials_run,
            "decisions_equal": self.decisions_equal,
            "max_llr_gap": self.max_llr_gap,
            "bicm_frame_errors": self.bicm_frame_errors,
            "mlc_frame_errors": self.mlc_frame_errors,
            "esn0_db": self.esn0_db,
        }


def static_label_identity(m: int = 2) -> bool:
    """Gray mapper preceded by ``T`` equals the natural mapper, for every label."""
    gray = build_square_qam(m, "gray")
    nat = build_square_qam(m, "natural")
    labels = nat.labels
    mapped = gray.points[apply_label_matrix(labels, gray_sp_matrix(m)) @ (1 << np.arange(m - 1, -1, -1))]
    return bool(np.array_equal(mapped, nat.points[np.arange(2 ** m)]))


def equivalence_schemes(n_sym: int, frozen_mask) -> tuple[SchemeConfig, SchemeConfig]:
    """4-QAM Gray BICM (block layout) and natural MLC sharing one frozen set.

    The BICM code of length ``2 n_sym`` factors as an outer kernel stage over
    two length-``n_sym`` constituent codes; constituent ``j`` (input block
    ``j``) is MLC level ``j``.
    """
    mask = np.asarray(frozen_mask, dtype=np.uint8)
    if mask.size != 2 * n_sym:
        raise ValueError("frozen mask must have 2 * n_sym entries")
    bicm = bicm_scheme(build_square_qam(2, "gray"), PolarCode(mask), interleaver="block")
    mlc = mlc_scheme(build_square_qam(2, "natural"),
                     [PolarCode(mask[:n_sym]), PolarCode(mask[n_sym:])])
    return bicm, mlc


def equivalence_check_4qam(n_sym, K_total, design, trials, seed, batch=256) -> EquivalenceReport:
    """Executable check that polar-coded 4-QAM BICM (Gray) and MLC (natural) coincide.

    Runs the static label identity, then ``trials`` common (message, noise)
    realizations at the design SNR through both receivers. Per symbol, the
    boxplus / variable-node pair applied to the two Gray bit LLRs is compared
    with the MLC level-0 and level-1 LLRs (unsaturated values); decisions are
    compared frame by frame.
    """
    from .construction import construct_scheme

    if getattr(design, "constellation", None) is not None:
        desc = design.constellation
        if desc.get("type") != "qam" or desc.get("m") != 2:
            raise ValueError("equivalence check is defined for 4-QAM only")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= K_total <= 2 * n_sym:
        raise ValueError("K_total must lie in [0, 2 n_sym]")

    template = bicm_scheme(build_square_qam(2, "gray"), n_sym=n_sym, interleaver="block")
    bicm = construct_scheme(template, replace(design, k=K_total))
    bicm, mlc = equivalence_schemes(n_sym, bicm.codes[0].frozen_mask)
    sigma2 = channel.snr_to_sigma2(design.design_snr_db, 2)
    noise = channel.NoiseModel(sigma2, 2)

    equal = 0
    gap = 0.0
    bicm_fe = mlc_fe = 0
    for start in range(0, trials, batch):
        idx = range(start, min(trials, start + batch))
        msgs, ys = [], []
        for t in idx:
            rng = channel.rng_stream(seed, channel.STREAM_EQUIVALENCE, t)
            msgs.append(channel.random_bits(rng, K_total))
            ys.append(channel.complex_normal(rng, n_sym))
        msgs = np.array(msgs).reshape(len(idx), K_total)
        ys = bicm_encode(msgs, bicm) + np.sqrt(noise.sigma2) * np.array(ys)
        # the two schemes must emit the same symbols for the same message
        tx_mlc = mlc_encode(msgs, mlc)
        tx_bicm = bicm_encode(msgs, bicm)
        if not np.allclose(tx_mlc, tx_bicm, atol=1e-12):
            raise AssertionError("BICM and MLC transmit different symbol streams")

        d_bicm = bicm_decode_batch(ys, sigma2, bicm)
        d_mlc, x_levels = mlc_decode_batch(ys, sigma2, mlc)
        equal += int(np.all(d_bicm == d_mlc, axis=1).sum())
        bicm_fe += int(np.any(d_bicm != msgs, axis=1).sum())
        mlc_fe += int(np.any(d_mlc != msgs, axis=1).sum())

        gray = bicm_llrs_raw(ys, sigma2, bicm.constellation)
        l_i, l_q = gray[..., 0], gray[..., 1]
        lvl0 = mlc_level_llr_raw(ys, sigma2, mlc.constellation, 0)
        c0 = x_levels[0]
        lvl1 = mlc_level_llr_raw(ys, sigma2, mlc.constellation, 1, c0[..., None])
        via_f = boxplus(l_q, l_i, exact=True, saturate=False)
        via_g = l_i + (1.0 - 2.0 * c0) * l_q
        gap = max(gap, float(np.max(np.abs(via_f - lvl0))), float(np.max(np.abs(via_g - lvl1))))

    return EquivalenceReport(static_label_identity(2), trials, equal, gap, bicm_fe, mlc_fe,
                             float(design.design_snr_db))
