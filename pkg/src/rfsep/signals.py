"""Signal-of-interest generation and demodulation.

Two SOI families are supported:

* single-carrier QPSK, pulse shaped with a root-raised-cosine filter, and
* OFDM with QPSK on a subset of active subcarriers and a cyclic prefix.

Signals are plain complex128 numpy arrays, bit streams are uint8 arrays of
zeros and ones.  Most routines accept a leading batch axis so that Monte-Carlo
loops can run over many frames at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import oaconvolve

__all__ = [
    "PulseShape",
    "QpskConfig",
    "OfdmConfig",
    "QPSK_CONSTELLATION",
    "gen_bits",
    "map_bits_qpsk",
    "demap_qpsk",
    "rrc_pulse",
    "modulate_qpsk",
    "demod_qpsk",
    "qpsk_symbol_count",
    "default_active_subcarriers",
    "ofdm_grid_to_signal",
    "modulate_ofdm",
    "demod_ofdm",
    "generate_qpsk_soi",
    "generate_ofdm_soi",
]

# Gray labels (b0, b1) -> symbol.  b0 selects the sign of the imaginary part,
# b1 the sign of the real part.
QPSK_CONSTELLATION = {
    (0, 0): (1 + 1j) / np.sqrt(2),
    (0, 1): (-1 + 1j) / np.sqrt(2),
    (1, 1): (-1 - 1j) / np.sqrt(2),
    (1, 0): (1 - 1j) / np.sqrt(2),
}


@dataclass(frozen=True)
class PulseShape:
    """Real, symmetric, unit-energy transmit pulse centred on tap ``span // 2``."""

    taps: np.ndarray
    F: int
    rolloff: float
    span: int

    @property
    def center(self) -> int:
        return self.span // 2


def rrc_pulse(F: int, beta: float, span: int) -> PulseShape:
    """Root-raised-cosine pulse sampled at integer offsets ``-span/2 .. span/2``.

    The symbol period is ``F`` samples.  The removable singularities at
    ``t = 0`` and ``|t| = F / (4 beta)`` are filled with their analytic limits
    and the taps are normalised to unit energy afterwards.
    """
    if F < 1:
        raise ValueError(f"oversampling factor must be >= 1, got {F}")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"roll-off must lie in (0, 1], got {beta}")
    if span % 2 or span < 2 * F:
        raise ValueError(f"span must be even and >= 2*F={2 * F}, got {span}")

    taps = _rrc_unnormalized(F, beta, span)
    taps = taps / np.sqrt(np.sum(taps**2))
    return PulseShape(taps=taps, F=F, rolloff=beta, span=span)


def _rrc_unnormalized(F: int, beta: float, span: int) -> np.ndarray:
    t = np.arange(-span // 2, span // 2 + 1) / F
    h = np.empty_like(t)
    at_zero = t == 0
    at_edge = np.isclose(np.abs(t), 1 / (4 * beta), rtol=0, atol=1e-12)
    rest = ~(at_zero | at_edge)
    tr = t[rest]
    h[rest] = (
        np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    ) / (np.pi * tr * (1 - (4 * beta * tr) ** 2))
    h[at_zero] = 1 - beta + 4 * beta / np.pi
    h[at_edge] = (beta / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
        + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )
    return h / np.sqrt(F)


@dataclass(frozen=True)
class QpskConfig:
    """Single-carrier QPSK parameters (defaults follow the benchmark SOI)."""

    F: int = 16
    tau0: int = 8
    N: int = 40_960
    rolloff: float = 0.5
    span: int = 128
    pulse: PulseShape | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.F < 1:
            raise ValueError("F must be >= 1")
        if not 0 <= self.tau0 <= self.F - 1:
            raise ValueError(f"tau0 must lie in [0, F-1], got {self.tau0}")
        if self.N < self.F:
            raise ValueError(f"N={self.N} shorter than one symbol interval F={self.F}")
        if self.pulse is None:
            object.__setattr__(self, "pulse", rrc_pulse(self.F, self.rolloff, self.span))

    @property
    def num_symbols(self) -> int:
        return qpsk_symbol_count(self.N, self.F, self.tau0)

    @property
    def num_bits(self) -> int:
        return 2 * self.num_symbols


def qpsk_symbol_count(N: int, F: int, tau0: int) -> int:
    """Number of symbols whose centre ``l*F + tau0`` lies inside ``[0, N)``."""
    return max(0, -(-(N - tau0) // F))


def default_active_subcarriers(K: int = 64, num_active: int = 56) -> tuple[int, ...]:
    """DC plus the ``K - num_active - 1`` bins nearest Nyquist are left empty."""
    if not 0 < num_active <= K:
        raise ValueError(f"need 0 < num_active <= K, got {num_active}, {K}")
    if num_active == K:
        return tuple(range(K))
    n_guard = K - num_active - 1
    lo = K // 2 - n_guard // 2
    guard = set(range(lo, lo + n_guard)) | {0}
    return tuple(k for k in range(K) if k not in guard)


@dataclass(frozen=True)
class OfdmConfig:
    K: int = 64
    Tcp: int = 16
    P: int = 512
    active: tuple[int, ...] = field(default_factory=default_active_subcarriers)

    def __post_init__(self):
        active = tuple(sorted(set(int(k) for k in self.active)))
        object.__setattr__(self, "active", active)
        if not active or len(active) > self.K or active[0] < 0 or active[-1] >= self.K:
            raise ValueError(f"active subcarriers must be a non-empty subset of 0..{self.K - 1}")
        if not 0 <= self.Tcp < self.K:
            raise ValueError(f"Tcp must lie in [0, K), got {self.Tcp}")
        if self.P < 1:
            raise ValueError("P must be >= 1")

    @property
    def N(self) -> int:
        return self.P * (self.K + self.Tcp)

    @property
    def num_bits(self) -> int:
        return 2 * len(self.active) * self.P

    @classmethod
    def for_length(cls, N: int, K: int = 64, Tcp: int = 16, active=None) -> "OfdmConfig":
        if N % (K + Tcp):
            raise ValueError(f"N={N} is not a multiple of K+Tcp={K + Tcp}")
        if active is None:
            active = default_active_subcarriers(K, min(K, 56 * K // 64))
        return cls(K=K, Tcp=Tcp, P=N // (K + Tcp), active=tuple(active))


def gen_bits(count: int, seed) -> np.ndarray:
    """Fair-coin bits from a PCG64 generator seeded with ``seed``."""
    if count < 0:
        raise ValueError("bit count must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.integers(0, 2, size=count, dtype=np.uint8)


def map_bits_qpsk(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] % 2:
        raise ValueError("bit count not multiple of 2")
    pairs = bits.reshape(*bits.shape[:-1], -1, 2)
    re = 1.0 - 2.0 * pairs[..., 1]
    im = 1.0 - 2.0 * pairs[..., 0]
    return (re + 1j * im) / np.sqrt(2)


def demap_qpsk(symbols) -> np.ndarray:
    """Hard quadrant decision followed by the inverse Gray map."""
    symbols = np.asarray(symbols)
    out = np.empty(symbols.shape + (2,), dtype=np.uint8)
    out[..., 0] = symbols.imag < 0
    out[..., 1] = symbols.real < 0
    return out.reshape(*symbols.shape[:-1], -1)


def modulate_qpsk(symbols, cfg: QpskConfig) -> np.ndarray:
    """Pulse-shape ``symbols`` onto an ``N``-sample grid.

    ``s[n] = sqrt(F) * sum_l a_l g[n - l F - tau0]`` where ``g`` is the
    unit-energy pulse indexed from its centre.  The ``sqrt(F)`` factor gives
    unit average power.  Pulse tails falling outside ``[0, N)`` are dropped.
    """
    symbols = np.asarray(symbols, dtype=complex)
    L = symbols.shape[-1]
    if L == 0:
        raise ValueError("empty symbol sequence")
    if (L - 1) * cfg.F + cfg.tau0 >= cfg.N:
        raise ValueError(
            f"{L} symbols do not fit in N={cfg.N} samples (at most {cfg.num_symbols})"
        )
    impulses = np.zeros(symbols.shape[:-1] + (cfg.N,), dtype=complex)
    impulses[..., cfg.tau0 : cfg.tau0 + L * cfg.F : cfg.F] = symbols
    g = cfg.pulse.taps
    c = cfg.pulse.center
    full = _filter(impulses, g)
    return np.sqrt(cfg.F) * full[..., c : c + cfg.N]


def _filter(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    taps = taps.reshape((1,) * (x.ndim - 1) + (-1,))
    if x.shape[-1] < 64:
        # oaconvolve picks a poor block size for tiny inputs; direct form is exact enough
        out = np.zeros(x.shape[:-1] + (x.shape[-1] + taps.shape[-1] - 1,), dtype=complex)
        for k in range(taps.shape[-1]):
            out[..., k : k + x.shape[-1]] += taps[..., k] * x
        return out
    return oaconvolve(x, taps, axes=-1)


def demod_qpsk(signal, cfg: QpskConfig) -> np.ndarray:
    """Matched filter, sample at ``l*F + tau0``, hard-decide, inverse Gray map.

    The matched filter ``g*[-n]`` is applied around the pulse centre, which is
    the causal filter delayed by ``span/2`` samples.
    """
    y = np.asarray(signal, dtype=complex)
    g = cfg.pulse.taps
    if y.shape[-1] < g.size:
        raise ValueError(f"signal of {y.shape[-1]} samples shorter than pulse span {g.size}")
    c = cfg.pulse.center
    mf = _filter(y, np.conj(g[::-1]))[..., c : c + y.shape[-1]]
    L = qpsk_symbol_count(y.shape[-1], cfg.F, cfg.tau0)
    decisions = mf[..., cfg.tau0 : cfg.tau0 + L * cfg.F : cfg.F]
    return demap_qpsk(decisions)


def ofdm_grid_to_signal(grid, cfg: OfdmConfig) -> np.ndarray:
    """Map a ``(..., P, K)`` symbol grid to time samples with cyclic prefix.

    Each OFDM symbol body is ``(1/sqrt(|active|)) sum_k a_k exp(j 2 pi k t / K)``.
    """
    grid = np.asarray(grid, dtype=complex)
    if grid.shape[-2:] != (cfg.P, cfg.K):
        raise ValueError(f"grid shape {grid.shape[-2:]} != (P, K) = {(cfg.P, cfg.K)}")
    body = np.fft.ifft(grid, axis=-1) * (cfg.K / np.sqrt(len(cfg.active)))
    framed = np.concatenate([body[..., cfg.K - cfg.Tcp :], body], axis=-1)
    return framed.reshape(*grid.shape[:-2], cfg.N)


def modulate_ofdm(bits, cfg: OfdmConfig) -> tuple[np.ndarray, np.ndarray]:
    """QPSK-on-OFDM; returns ``(signal, grid)`` with zeros on inactive bins."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] != cfg.num_bits:
        raise ValueError(
            f"bit count {bits.shape[-1]} does not match expected {cfg.num_bits} "
            f"(2 * {len(cfg.active)} active * {cfg.P} symbols)"
        )
    symbols = map_bits_qpsk(bits).reshape(*bits.shape[:-1], cfg.P, len(cfg.active))
    grid = np.zeros(bits.shape[:-1] + (cfg.P, cfg.K), dtype=complex)
    grid[..., list(cfg.active)] = symbols
    return ofdm_grid_to_signal(grid, cfg), grid


def demod_ofdm(signal, cfg: OfdmConfig) -> np.ndarray:
    y = np.asarray(signal, dtype=complex)
    if y.shape[-1] != cfg.N:
        raise ValueError(f"signal length {y.shape[-1]} != P*(K+Tcp) = {cfg.N}")
    frames = y.reshape(*y.shape[:-1], cfg.P, cfg.K + cfg.Tcp)[..., cfg.Tcp :]
    bins = np.fft.fft(frames, axis=-1)[..., list(cfg.active)]
    return demap_qpsk(bins.reshape(*y.shape[:-1], -1))


def generate_qpsk_soi(cfg: QpskConfig, seed, batch: tuple[int, ...] = ()):
    """Random bits and the corresponding QPSK waveform, ``(signal, bits)``."""
    bits = gen_bits(int(np.prod(batch, dtype=int)) * cfg.num_bits, seed).reshape(
        *batch, cfg.num_bits
    )
    return modulate_qpsk(map_bits_qpsk(bits), cfg), bits


def generate_ofdm_soi(cfg: OfdmConfig, seed, batch: tuple[int, ...] = ()):
    bits = gen_bits(int(np.prod(batch, dtype=int)) * cfg.num_bits, seed).reshape(
        *batch, cfg.num_bits
    )
    signal, _ = modulate_ofdm(bits, cfg)
    return signal, bits
