"""Pure numpy SC kernels, vectorised over the frame (batch) axis.

Used when the compiled ``_sc_ext`` module is unavailable. Both backends expose
``sc_decode_batch`` and ``sc_genie_batch`` and must agree bit for bit on decisions.
"""
import numpy as np

LLR_MAX = 40.0
# above this minimum magnitude the min-sum term dominates and exp(-|x|) may
# underflow, so the correction-term form takes over
_LOG_FORM_MIN = 30.0


def boxplus(a, b, exact=True, saturate=True):
    """Check-node update on arrays, saturated to +-LLR_MAX unless ``saturate`` is off."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    A, B = np.abs(a), np.abs(b)
    mag = np.minimum(A, B)
    if exact:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # 2 atanh(tanh(A/2) tanh(B/2)), free of cancellation near zero
            near = np.log1p(np.expm1(-A) * np.expm1(-B) / (np.exp(-A) + np.exp(-B)))
            far = mag + np.log1p(np.exp(-(A + B))) - np.log1p(np.exp(-np.abs(A - B)))
        mag = np.where(mag < _LOG_FORM_MIN, near, far)
    out = np.where((a < 0) != (b < 0), -mag, mag)
    return np.clip(out, -LLR_MAX, LLR_MAX) if saturate else out


def _g(a, b, bits):
    return np.clip(b + (1.0 - 2.0 * bits) * a, -LLR_MAX, LLR_MAX)


def _decode_node(alpha, frozen, fvals, u_out, offset, exact, genie):
    # alpha: (B, s); returns partial sums beta (B, s)
    s = alpha.shape[1]
    if s == 1:
        hard = (alpha[:, 0] < 0).astype(np.uint8)
        if genie is None:
            if frozen[offset]:
                bit = np.full(alpha.shape[0], fvals[offset], dtype=np.uint8)
            else:
                bit = hard
            u_out[:, offset] = bit
        else:
            bit = genie[:, offset]
            u_out[:, offset] = hard ^ bit
        return bit[:, None]
    h = s // 2
    left, right = alpha[:, :h], alpha[:, h:]
    beta_l = _decode_node(boxplus(left, right, exact), frozen, fvals, u_out, offset, exact, genie)
    beta_r = _decode_node(_g(left, right, beta_l), frozen, fvals, u_out, offset + h, exact, genie)
    return np.concatenate([beta_l ^ beta_r, beta_r], axis=1)


def sc_decode_batch(llr, frozen_mask, frozen_values, exact=True):
    """SC-decode each row of ``llr``; returns ``(u_hat, x_hat)`` as uint8 arrays."""
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    frozen = np.asarray(frozen_mask, dtype=np.uint8)
    fvals = np.asarray(frozen_values, dtype=np.uint8)
    u_hat = np.zeros(llr.shape, dtype=np.uint8)
    if llr.shape[0] == 0:
        return u_hat, u_hat.copy()
    x_hat = _decode_node(np.clip(llr, -LLR_MAX, LLR_MAX), frozen, fvals, u_hat, 0, exact, None)
    return u_hat, np.ascontiguousarray(x_hat, dtype=np.uint8)


def sc_genie_batch(llr, u_true, exact=True):
    """Genie-aided per-index error indicators for each row of ``llr``."""
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    u_true = np.ascontiguousarray(u_true, dtype=np.uint8)
    errs = np.zeros(llr.shape, dtype=np.uint8)
    if llr.shape[0] == 0:
        return errs
    _decode_node(np.clip(llr, -LLR_MAX, LLR_MAX), None, None, errs, 0, exact, u_true)
    return errs
