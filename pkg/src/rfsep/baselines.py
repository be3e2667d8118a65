"""Traditional separators: matched-filter passthrough and block LMMSE."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .signals import QpskConfig

__all__ = [
    "BlockCovariance",
    "LmmseSeparator",
    "estimate_block_covariance",
    "soi_covariance_analytic",
    "lmmse_gain",
    "lmmse_separate",
    "mf_passthrough",
    "MatchedFilterSeparator",
]


@dataclass(frozen=True)
class BlockCovariance:
    block_len: int
    C_ss: np.ndarray
    C_bb: np.ndarray
    sample_count: int = 0


def _block_outer(x: np.ndarray, block_len: int) -> tuple[np.ndarray, int]:
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] < block_len:
        raise ValueError(f"signal of length {x.shape[-1]} shorter than block_len={block_len}")
    n_blocks = x.shape[-1] // block_len
    blocks = x[..., : n_blocks * block_len].reshape(-1, block_len)
    return blocks.T @ blocks.conj(), blocks.shape[0]


def _hermitize(C: np.ndarray) -> np.ndarray:
    return 0.5 * (C + C.conj().T)


def estimate_block_covariance(examples, block_len: int) -> BlockCovariance:
    """Sample covariances of non-overlapping blocks of ground-truth ``s`` and ``b``.

    ``examples`` is an iterable of ``(s, b)`` pairs; each entry may carry a
    leading batch axis.
    """
    S = np.zeros((block_len, block_len), dtype=complex)
    B = np.zeros_like(S)
    M = 0
    for s, b in examples:
        Cs, ms = _block_outer(s, block_len)
        Cb, mb = _block_outer(b, block_len)
        if ms != mb:
            raise ValueError("s and b must have the same shape")
        S += Cs
        B += Cb
        M += ms
    if M == 0:
        raise ValueError("no examples given")
    return BlockCovariance(block_len, _hermitize(S / M), _hermitize(B / M), M)


def soi_covariance_analytic(cfg: QpskConfig, block_len: int, start: int = 0) -> np.ndarray:
    """Exact covariance of a block of the single-carrier SOI.

    With i.i.d. unit-variance symbols,
    ``C[m, n] = F * sum_l g[m - lF - tau0] g*[n - lF - tau0]`` (the ``F`` comes
    from the unit-power scaling).  ``start`` is the absolute index of the
    first sample in the block; blocks starting on a multiple of ``F`` all share
    one covariance.
    """
    g = cfg.pulse.taps
    c = cfg.pulse.center
    idx = np.arange(block_len) + start
    # every symbol whose pulse overlaps the block (edge truncation ignored here)
    l_lo = int(np.floor((start - cfg.tau0 - c) / cfg.F))
    l_hi = int(np.ceil((start + block_len - 1 - cfg.tau0 + c) / cfg.F))
    ls = np.arange(l_lo, l_hi + 1)
    offsets = idx[:, None] - ls[None, :] * cfg.F - cfg.tau0 + c
    valid = (offsets >= 0) & (offsets < g.size)
    G = np.where(valid, g[np.clip(offsets, 0, g.size - 1)], 0.0) * np.sqrt(cfg.F)
    return _hermitize((G @ G.conj().T).astype(complex))


def lmmse_gain(C_ss: np.ndarray, C_bb: np.ndarray, eps_reg: float | None = None) -> np.ndarray:
    """``W = C_ss (C_ss + C_bb + eps I)^{-1}``.

    ``eps_reg=None`` picks ``1e-8 * trace / block_len``; ``eps_reg=0`` disables
    regularisation and raises on a singular mixture covariance.
    """
    B = C_ss.shape[0]
    C_yy = C_ss + C_bb
    if eps_reg is None:
        eps_reg = 1e-8 * float(np.real(np.trace(C_yy))) / B
    if eps_reg:
        C_yy = C_yy + eps_reg * np.eye(B)
    try:
        with warnings.catch_warnings():
            # singularity is reported below with a clearer message
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(C_yy, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise np.linalg.LinAlgError(f"mixture covariance not invertible: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) <= 1e-13 * np.max(np.abs(np.diag(lu[0])), initial=0)):
        raise np.linalg.LinAlgError(
            "mixture covariance C_ss + C_bb is singular; pass eps_reg > 0 to regularise"
        )
    # W = C_ss C_yy^{-1}  <=>  C_yy^H W^H = C_ss^H, and both are Hermitian
    W = scipy.linalg.lu_solve(lu, C_ss.conj().T, trans=2).conj().T
    if not np.all(np.isfinite(W)):
        raise np.linalg.LinAlgError("non-finite LMMSE gain; increase eps_reg")
    return W


class LmmseSeparator:
    """Block LMMSE estimator built from block covariances."""

    def __init__(self, cov: BlockCovariance, eps_reg: float | None = None):
        self.cov = cov
        self.block_len = cov.block_len
        self.eps_reg = eps_reg
        self.W = lmmse_gain(cov.C_ss, cov.C_bb, eps_reg)
        self._residual: dict[int, np.ndarray] = {}

    @classmethod
    def from_matrices(cls, C_ss, C_bb, eps_reg=None) -> "LmmseSeparator":
        C_ss = np.asarray(C_ss, dtype=complex)
        return cls(BlockCovariance(C_ss.shape[0], C_ss, np.asarray(C_bb, dtype=complex)), eps_reg)

    def _gain_for(self, length: int) -> np.ndarray:
        if length == self.block_len:
            return self.W
        if length not in self._residual:
            C_ss = self.cov.C_ss[:length, :length]
            C_bb = self.cov.C_bb[:length, :length]
            self._residual[length] = lmmse_gain(C_ss, C_bb, self.eps_reg)
        return self._residual[length]

    def separate(self, y) -> np.ndarray:
        return lmmse_separate(y, self)

    __call__ = separate


def lmmse_separate(y, sep: LmmseSeparator) -> np.ndarray:
    """Apply the block gain to consecutive non-overlapping blocks of ``y``.

    A trailing partial block uses a gain rebuilt at the residual length.
    """
    y = np.asarray(y, dtype=complex)
    B = sep.block_len
    N = y.shape[-1]
    n_full = N // B
    out = np.empty_like(y)
    if n_full:
        blocks = y[..., : n_full * B].reshape(*y.shape[:-1], n_full, B)
        out[..., : n_full * B] = (blocks @ sep.W.T).reshape(*y.shape[:-1], n_full * B)
    rest = N - n_full * B
    if rest:
        out[..., n_full * B :] = y[..., n_full * B :] @ sep._gain_for(rest).T
    return out


def mf_passthrough(y) -> np.ndarray:
    """No interference mitigation; the matched filter lives in the demodulator."""
    return np.asarray(y)


class MatchedFilterSeparator:
    def separate(self, y):
        return mf_passthrough(y)

    __call__ = separate
