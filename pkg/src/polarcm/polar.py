"""Binary polar transform, encoder and successive-cancellation decoder.

Conventions shared by the whole package:

* natural index order, no bit-reversal: ``x = u F^{(x)n}`` with ``F = [[1, 0], [1, 1]]``;
* LLRs are ``ln P(0)/P(1)``, so a positive value favours bit 0;
* LLRs saturate at ``+-LLR_MAX``; an LLR of exactly 0 decides 0.

The SC recursion runs in a compiled kernel when ``polarcm._sc_ext`` is built and
falls back to a batched numpy implementation otherwise; ``BACKEND`` says which.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _sc_py

try:
    from . import _sc_ext as _kernels
    BACKEND = "cython"
except ImportError:  # pragma: no cover - exercised only without a compiler
    _kernels = _sc_py
    BACKEND = "python"

LLR_MAX = _sc_py.LLR_MAX


def _log2_len(n_items: int) -> int:
    if n_items < 1 or n_items & (n_items - 1):
        raise ValueError(f"length must be a power of two, got {n_items}")
    return n_items.bit_length() - 1


def _as_bits(bits, name="bits") -> np.ndarray:
    arr = np.asarray(bits)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1")
    return arr.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class PolarCode:
    """A polar code in natural order.

    Parameters
    ----------
    frozen_mask : array_like of {0, 1}
        1 marks a frozen bit channel. Its length is the block length.
    frozen_values : array_like of {0, 1}, optional
        Values fed into frozen positions (ignored where the mask is 0).
        All zero by default.
    """

    frozen_mask: np.ndarray
    frozen_values: np.ndarray = field(default=None)

    def __post_init__(self):
        mask = _as_bits(self.frozen_mask, "frozen_mask").ravel()
        _log2_len(mask.size)
        if self.frozen_values is None:
            vals = np.zeros_like(mask)
        else:
            vals = _as_bits(self.frozen_values, "frozen_values").ravel()
            if vals.size != mask.size:
                raise ValueError("frozen_values length differs from frozen_mask")
        mask.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "frozen_mask", mask)
        object.__setattr__(self, "frozen_values", vals)
        object.__setattr__(self, "info_indices", np.flatnonzero(mask == 0))

    @classmethod
    def from_info_indices(cls, block_len, info_indices):
        mask = np.ones(block_len, dtype=np.uint8)
        mask[np.asarray(info_indices, dtype=int)] = 0
        return cls(mask)

    @property
    def block_len(self) -> int:
        return self.frozen_mask.size

    @property
    def n(self) -> int:
        return self.block_len.bit_length() - 1

    @property
    def info_count(self) -> int:
        return int(self.info_indices.size)

    @property
    def rate(self) -> float:
        return self.info_count / self.block_len

    def __eq__(self, other):
        if not isinstance(other, PolarCode):
            return NotImplemented
        return (np.array_equal(self.frozen_mask, other.frozen_mask)
                and np.array_equal(self.frozen_values, other.frozen_values))

    def __repr__(self):
        return f"PolarCode(N={self.block_len}, K={self.info_count})"


def polar_transform(u) -> np.ndarray:
    """Multiply ``u`` by the n-fold Kronecker power of the kernel over GF(2).

    Works on the last axis, so a 2-D array transforms each row. The transform
    is its own inverse.
    """
    u = _as_bits(u, "u")
    size = u.shape[-1] if u.ndim else 0
    _log2_len(size)
    x = u.reshape(-1, size).copy()
    rows = x.shape[0]
    half = 1
    while half < size:
        blocks = x.reshape(rows, size // (2 * half), 2, half)
        blocks[:, :, 0, :] ^= blocks[:, :, 1, :]
        half *= 2
    return x.reshape(u.shape)


def polar_encode(msg, code: PolarCode) -> np.ndarray:
    """Scatter ``msg`` into the information positions and transform.

    ``msg`` may be 2-D (one message per row), giving one codeword per row.
    """
    msg = _as_bits(msg, "msg")
    if msg.ndim == 0 or msg.shape[-1] != code.info_count:
        raise ValueError(f"message length {msg.shape[-1] if msg.ndim else 0} != K={code.info_count}")
    u = np.broadcast_to(code.frozen_values, msg.shape[:-1] + (code.block_len,)).copy()
    u[..., code.info_indices] = msg
    return polar_transform(u)


def checknode_llr(a, b, mode="exact"):
    """Check-node (``f``) update: boxplus of two LLRs.

    ``mode="exact"`` is ``2 atanh(tanh(a/2) tanh(b/2))``. The magnitude is
    evaluated as ``log1p(expm1(-A) expm1(-B) / (e^-A + e^-B))`` with
    ``A = |a|, B = |b|``, which keeps full relative accuracy for outputs near
    zero; the sign is ``sgn(a) sgn(b)``. ``mode="minsum"`` returns
    ``sgn(a) sgn(b) min(A, B)``.
    """
    if mode not in ("exact", "minsum"):
        raise ValueError(f"unknown check-node mode {mode!r}")
    out = _sc_py.boxplus(a, b, exact=(mode == "exact"))
    return float(out) if out.ndim == 0 else out


def varnode_llr(a, b, u_bit):
    """Variable-node (``g``) update ``b + (1 - 2u) a``, saturated."""
    out = np.clip(np.asarray(b, dtype=float) + (1.0 - 2.0 * np.asarray(u_bit)) * np.asarray(a, dtype=float),
                  -LLR_MAX, LLR_MAX)
    return float(out) if out.ndim == 0 else out


def _llr_matrix(llrs, length):
    llrs = np.asarray(llrs, dtype=np.float64)
    single = llrs.ndim == 1
    llrs = np.atleast_2d(llrs)
    if llrs.ndim != 2 or llrs.shape[1] != length:
        raise ValueError(f"expected {length} LLRs per frame, got shape {llrs.shape}")
    if np.isnan(llrs).any():
        raise ValueError("LLRs contain NaN")
    return llrs, single


def sc_decode(llrs, code: PolarCode, mode="exact"):
    """Successive-cancellation decoding.

    Parameters
    ----------
    llrs : array_like, shape (N,) or (B, N)
        Channel LLRs of the codeword bits; a 2-D input decodes B frames.
    code : PolarCode
    mode : {"exact", "minsum"}
        Check-node rule.

    Returns
    -------
    msg_hat, u_hat, x_hat : ndarray of uint8
        Decided message, full input vector and re-encoded codeword.
    """
    if mode not in ("exact", "minsum"):
        raise ValueError(f"unknown check-node mode {mode!r}")
    llrs, single = _llr_matrix(llrs, code.block_len)
    u_hat, x_hat = _kernels.sc_decode_batch(llrs, code.frozen_mask, code.frozen_values,
                                            mode == "exact")
    msg_hat = u_hat[:, code.info_indices]
    if single:
        return msg_hat[0], u_hat[0], x_hat[0]
    return msg_hat, u_hat, x_hat


def sc_genie_probe(llrs, u_true, mode="exact") -> np.ndarray:
    """Per-index SC decision errors with every earlier bit forced to its true value.

    Entry ``i`` is 1 when the hard decision on the bit-channel LLR of ``u_i``
    disagrees with ``u_true[i]``. No error propagates between indices.
    """
    u_true = _as_bits(u_true, "u_true")
    size = u_true.shape[-1] if u_true.ndim else 0
    _log2_len(size)
    llrs, single = _llr_matrix(llrs, size)
    u_true = np.atleast_2d(u_true)
    if u_true.shape != llrs.shape:
        raise ValueError("llrs and u_true shapes differ")
    errs = _kernels.sc_genie_batch(llrs, u_true, mode == "exact")
    return errs[0] if single else errs
