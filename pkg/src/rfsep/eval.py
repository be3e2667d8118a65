"""Metrics, the Gaussian MMSE oracle and SINR sweeps."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import oaconvolve
from scipy.special import erfc

from . import signals
from .baselines import LmmseSeparator, lmmse_gain, lmmse_separate, soi_covariance_analytic
from .mixtures import example_seed, interference_source, make_mixture

log = logging.getLogger(__name__)

__all__ = [
    "ber",
    "mse_db",
    "qfunc",
    "qpsk_awgn_ber",
    "ebn0_to_sinr_db",
    "ofdm_ebn0_to_sinr_db",
    "GaussianOracleSpec",
    "CyclostationaryGaussianTask",
    "gaussian_oracle",
    "mmse_trace",
    "SweepRow",
    "SweepResult",
    "sinr_sweep",
    "DEFAULT_SINR_GRID",
]

MSE_FLOOR_DB = -100.0
DEFAULT_SINR_GRID = tuple(float(x) for x in range(-30, 1, 3))
CSV_HEADER = ("method", "sinr_db", "mse_db", "ber", "trials", "seed")


def ber(b_hat, b) -> float:
    b_hat = np.asarray(b_hat)
    b = np.asarray(b)
    if b_hat.shape != b.shape:
        raise ValueError(f"length mismatch: {b_hat.shape} vs {b.shape}")
    if b.size == 0:
        raise ValueError("empty bit stream")
    return float(np.count_nonzero(b_hat != b)) / b.size


def mse_db(s_hat, s) -> float:
    """``10 log10 mean |s_hat - s|^2``, floored at -100 dB."""
    s_hat = np.asarray(s_hat)
    s = np.asarray(s)
    if s_hat.shape != s.shape:
        raise ValueError(f"length mismatch: {s_hat.shape} vs {s.shape}")
    mse = float(np.mean(np.abs(s_hat - s) ** 2))
    if mse <= 10 ** (MSE_FLOOR_DB / 10):
        return MSE_FLOOR_DB
    return 10 * np.log10(mse)


def qfunc(x):
    return 0.5 * erfc(np.asarray(x) / np.sqrt(2))


def qpsk_awgn_ber(ebn0_db):
    """Gray-coded QPSK in AWGN: ``Q(sqrt(2 Eb/N0))``."""
    return qfunc(np.sqrt(2 * 10 ** (np.asarray(ebn0_db) / 10)))


def ebn0_to_sinr_db(ebn0_db, samples_per_symbol: float, bits_per_symbol: int = 2) -> float:
    """Per-sample SINR for a unit-power SOI carrying ``samples_per_symbol`` samples per symbol."""
    return float(ebn0_db + 10 * np.log10(bits_per_symbol / samples_per_symbol))


def ofdm_ebn0_to_sinr_db(ebn0_db, cfg: signals.OfdmConfig) -> float:
    """SINR giving per-subcarrier ``Es/N0 = 2 Eb/N0`` after the receiver FFT."""
    return float(ebn0_db + 10 * np.log10(2 * len(cfg.active) / cfg.K))


def mmse_trace(C_ss, C_bb) -> float:
    """Per-sample MMSE ``trace(C_ss - C_ss (C_ss + C_bb)^{-1} C_ss) / B``."""
    W = lmmse_gain(np.asarray(C_ss, complex), np.asarray(C_bb, complex), eps_reg=0)
    return float(np.real(np.trace(C_ss - W @ C_ss))) / C_ss.shape[0]


@dataclass(frozen=True)
class GaussianOracleSpec:
    C_ss: np.ndarray
    C_bb: np.ndarray

    @property
    def block_len(self) -> int:
        return self.C_ss.shape[0]

    @property
    def mmse(self) -> float:
        return mmse_trace(self.C_ss, self.C_bb)


def _psd_factor(C: np.ndarray) -> np.ndarray:
    """``A`` with ``A A^H = C``; raises for indefinite input."""
    C = 0.5 * (C + C.conj().T)
    w, V = np.linalg.eigh(C)
    tol = 1e-8 * max(float(np.real(np.trace(C))) / C.shape[0], 1e-300)
    if w.min() < -tol:
        raise ValueError(f"covariance is not positive semidefinite (min eigenvalue {w.min():.3g})")
    return V * np.sqrt(np.clip(w, 0, None))


def gaussian_oracle(spec: GaussianOracleSpec, trials: int, seed) -> tuple[float, float]:
    """Empirical LMMSE MSE on circular Gaussian blocks vs the closed-form MMSE."""
    A_s = _psd_factor(spec.C_ss)
    A_b = _psd_factor(spec.C_bb)
    B = spec.block_len
    rng = np.random.default_rng(seed)

    def cn(shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    s = cn((trials, B)) @ A_s.T
    b = cn((trials, B)) @ A_b.T
    sep = LmmseSeparator.from_matrices(spec.C_ss, spec.C_bb)
    err = lmmse_separate(s + b, sep) - s
    return float(np.mean(np.abs(err) ** 2)), spec.mmse


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class CyclostationaryGaussianTask:
    """Jointly Gaussian separation problem with exactly known covariances.

    SOI: circular Gaussian symbols shaped by an RRC pulse, so the process is
    cyclostationary with period ``F``.  Interference: stationary low-pass
    Gaussian noise (white noise through a windowed-sinc filter) plus a white
    floor carrying ``white_fraction`` of its power.  Both are unit power, and
    the whole frame of ``N`` samples is one block, so ``mmse`` is the optimal
    per-sample error of any estimator on this data.
    """

    def __init__(
        self,
        N: int = 2048,
        F: int = 8,
        rolloff: float = 0.5,
        span: int = 64,
        cutoff: float = 0.1,
        filter_len: int = 129,
        white_fraction: float = 0.1,
        sinr_db: float = 0.0,
    ):
        self.N = N
        self.soi_cfg = signals.QpskConfig(F=F, tau0=F // 2, N=N, rolloff=rolloff, span=span)
        n = np.arange(filter_len) - (filter_len - 1) / 2
        h = np.hanning(filter_len) * np.sinc(cutoff * n)
        self.taps = h / np.linalg.norm(h)
        self.white_fraction = white_fraction
        self.amp = 10 ** (-sinr_db / 20)

    @property
    def C_ss(self) -> np.ndarray:
        return soi_covariance_analytic(self.soi_cfg, self.N)

    @property
    def C_bb(self) -> np.ndarray:
        M = self.taps.size
        r = np.correlate(self.taps, self.taps, "full")
        lag = np.arange(self.N)[:, None] - np.arange(self.N)[None, :]
        colored = np.where(np.abs(lag) < M, r[np.clip(lag + M - 1, 0, 2 * M - 2)], 0.0)
        C = (1 - self.white_fraction) * colored + self.white_fraction * np.eye(self.N)
        return (self.amp**2 * C).astype(complex)

    @property
    def spec(self) -> GaussianOracleSpec:
        return GaussianOracleSpec(self.C_ss, self.C_bb)

    @property
    def mmse(self) -> float:
        return self.spec.mmse

    def draw(self, seed, count: int):
        """``(y, s, b)``, each ``(count, N)``; usable as a training batch source."""
        rng = np.random.default_rng(seed)
        L = self.soi_cfg.num_symbols
        s = signals.modulate_qpsk(_cn(rng, (count, L)), self.soi_cfg)
        M = self.taps.size
        colored = oaconvolve(_cn(rng, (count, self.N + M - 1)), self.taps[None], mode="valid", axes=-1)
        white = _cn(rng, (count, self.N))
        b = self.amp * (np.sqrt(1 - self.white_fraction) * colored + np.sqrt(self.white_fraction) * white)
        return s + b, s, b


@dataclass(frozen=True)
class SweepRow:
    method: str
    sinr_db: float
    mse_db: float
    ber: float
    trials: int
    seed: int
    error: str = ""


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def sorted(self) -> "SweepResult":
        return SweepResult(sorted(self.rows, key=lambda r: (r.method, r.sinr_db)))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.method, repr(float(r.sinr_db)), repr(float(r.mse_db)), repr(float(r.ber)), r.trials, r.seed])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="", encoding="ascii") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "SweepResult":
        if hasattr(source, "read"):
            text = source.read()
        elif isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source, encoding="ascii") as fh:
                text = fh.read()
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        rows = [
            SweepRow(m, float(sinr), float(mse), float(b), int(t), int(seed))
            for m, sinr, mse, b, t, seed in reader
        ]
        return cls(rows)

    def column(self, name: str, method: str | None = None) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows if method is None or r.method == method])


def _as_callable(separator) -> Callable[[np.ndarray], np.ndarray]:
    if hasattr(separator, "separate"):
        return separator.separate
    if callable(separator):
        return separator
    raise TypeError("separator must be callable or expose .separate(y)")


def _soi_chain(soi_kind: str, N: int, soi_cfg=None):
    if soi_kind == "qpsk":
        cfg = soi_cfg or signals.QpskConfig(N=N)
        return cfg, signals.generate_qpsk_soi, signals.demod_qpsk
    if soi_kind == "ofdm_qpsk":
        cfg = soi_cfg or signals.OfdmConfig.for_length(N)
        return cfg, signals.generate_ofdm_soi, signals.demod_ofdm
    raise ValueError(f"unknown SOI kind {soi_kind!r}")


def sinr_sweep(
    separator,
    soi_kind: str = "qpsk",
    interference_source_name="awgn",
    sinr_list=DEFAULT_SINR_GRID,
    trials: int = 10,
    seed: int = 0,
    *,
    N: int = 40_960,
    soi_cfg=None,
    method: str | None = None,
    threads: int = 1,
    batch: int = 8,
) -> SweepResult:
    """BER and MSE of ``separator`` at each SINR point.

    Trial ``t`` at grid point ``i`` is synthesised from
    ``example_seed(seed, i, t)`` whatever the thread count, so every method
    swept with the same seed sees identical mixtures.  ``interference_source_name``
    is a source name or a ``draw(total_len, seed)`` callable.
    """
    sinr_list = list(sinr_list)
    if not sinr_list:
        raise ValueError("sinr_list must not be empty")
    sep = _as_callable(separator)
    cfg, generate, demod = _soi_chain(soi_kind, N, soi_cfg)
    N = cfg.N
    draw_b = (
        interference_source(interference_source_name)
        if isinstance(interference_source_name, str)
        else interference_source_name
    )
    label = method or getattr(separator, "label", None) or getattr(separator, "__name__", type(separator).__name__)

    def run_chunk(i: int, sinr_db: float, trial_ids: list[int]):
        # separators exposing at_sinr() are told the operating point
        fn = _as_callable(separator.at_sinr(sinr_db)) if hasattr(separator, "at_sinr") else sep
        ys, ss, bits = [], [], []
        for t in trial_ids:
            ex_seed = example_seed(seed, i, t)
            s, bt = generate(cfg, example_seed(ex_seed, 0))
            b_raw = draw_b(N, example_seed(ex_seed, 1))
            mix = make_mixture(s, b_raw, sinr_db, example_seed(ex_seed, 2))
            ys.append(mix.y)
            ss.append(s)
            bits.append(bt)
        y = np.stack(ys)
        s_hat = np.asarray(fn(y))
        se = np.abs(s_hat - np.stack(ss)) ** 2
        errs = np.count_nonzero(demod(s_hat, cfg) != np.stack(bits))
        return float(se.sum()), se.size, errs, sum(b.size for b in bits)

    def run_point(i, sinr_db):
        chunks = [list(range(a, min(a + batch, trials))) for a in range(0, trials, batch)]
        try:
            parts = [run_chunk(i, sinr_db, c) for c in chunks]
        except Exception as exc:  # a failing separator marks the row, the sweep goes on
            log.warning("separator %s failed at %.1f dB: %s", label, sinr_db, exc)
            return SweepRow(label, float(sinr_db), float("nan"), float("nan"), trials, seed, error=str(exc))
        se = sum(p[0] for p in parts) / sum(p[1] for p in parts)
        n_err = sum(p[2] for p in parts)
        n_bits = sum(p[3] for p in parts)
        mse = MSE_FLOOR_DB if se <= 10 ** (MSE_FLOOR_DB / 10) else 10 * np.log10(se)
        return SweepRow(label, float(sinr_db), float(mse), n_err / n_bits, trials, seed)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(lambda a: run_point(*a), enumerate(sinr_list)))
    else:
        rows = [run_point(i, x) for i, x in enumerate(sinr_list)]
    return SweepResult(rows).sorted()
