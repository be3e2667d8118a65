"""Interference sources and mixture synthesis.

Mixtures follow ``y = s + b`` with ``b = (1/kappa) exp(j theta) b_raw`` and
``kappa = 10 ** (sinr_db / 20)``.  Interference may come from recorded frames
(see :mod:`rfsep.io` for the frame-file format) or from the synthetic
stand-ins defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from . import signals

__all__ = [
    "InterferenceFrame",
    "InterferenceDataset",
    "MixtureRecipe",
    "MixtureExample",
    "power",
    "empirical_sinr_db",
    "normalize_power",
    "split_dataset",
    "extract_window",
    "frequency_recenter",
    "make_mixture",
    "synth_interference_awgn",
    "synth_interference_framed",
    "synth_interference_emi",
    "interference_source",
    "synthesize_example",
    "example_seed",
]


def power(x) -> float:
    x = np.asarray(x)
    return float(np.mean(np.abs(x) ** 2))


def empirical_sinr_db(s, b) -> float:
    return 10 * np.log10(power(s) / power(b))


def normalize_power(x) -> np.ndarray:
    p = power(x)
    if p == 0:
        raise ValueError("zero-power frame")
    return np.asarray(x) / np.sqrt(p)


@dataclass(frozen=True)
class InterferenceFrame:
    samples: np.ndarray
    source_name: str = "unknown"
    frame_index: int = 0

    def __len__(self):
        return self.samples.shape[-1]


@dataclass(frozen=True)
class InterferenceDataset:
    frames: tuple[InterferenceFrame, ...]
    split: dict[int, str]

    def subset(self, which: Literal["train", "test"]) -> list[InterferenceFrame]:
        return [f for f in self.frames if self.split[f.frame_index] == which]

    @property
    def source_name(self) -> str:
        return self.frames[0].source_name if self.frames else "unknown"


def split_dataset(frames, train_fraction: float, seed) -> InterferenceDataset:
    """Deterministic train/test partition of whole frames."""
    frames = tuple(frames)
    if len(frames) < 2:
        raise ValueError(f"need at least 2 frames to split, got {len(frames)}")
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(round(train_fraction * len(frames)))
    n_train = min(max(n_train, 1), len(frames) - 1)
    order = np.random.default_rng(seed).permutation(len(frames))
    split = {}
    for rank, i in enumerate(order):
        split[frames[i].frame_index] = "train" if rank < n_train else "test"
    if len(split) != len(frames):
        raise ValueError("frame indices must be unique")
    return InterferenceDataset(frames=frames, split=split)


def extract_window(frame, N: int, seed) -> np.ndarray:
    """Contiguous ``N``-sample slice at a uniformly random offset."""
    x = frame.samples if isinstance(frame, InterferenceFrame) else np.asarray(frame)
    if x.shape[-1] < N:
        raise ValueError(f"frame of length {x.shape[-1]} is shorter than window N={N}")
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, x.shape[-1] - N + 1))
    return x[..., offset : offset + N]


def frequency_recenter(signal) -> tuple[np.ndarray, float]:
    """Shift the power-weighted spectral centroid to DC.

    Returns the shifted signal and the removed frequency in cycles/sample.
    """
    x = np.asarray(signal, dtype=complex)
    if x.size == 0:
        raise ValueError("empty signal")
    psd = np.abs(np.fft.fft(x)) ** 2
    total = psd.sum()
    if total == 0:
        raise ValueError("no spectral content")
    freqs = np.fft.fftfreq(x.size)
    shift = float(np.sum(freqs * psd) / total)
    n = np.arange(x.size)
    return x * np.exp(-2j * np.pi * shift * n), shift


def make_mixture(s, b_raw, sinr_db: float, seed, bits=None, recipe=None) -> "MixtureExample":
    """Scale ``b_raw`` to the target SINR, rotate it by a random phase, add."""
    s = np.asarray(s, dtype=complex)
    b_raw = np.asarray(b_raw, dtype=complex)
    if s.shape != b_raw.shape:
        raise ValueError(f"length mismatch: s {s.shape} vs b {b_raw.shape}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0, 2 * np.pi)
    kappa = 10 ** (sinr_db / 20)
    b = (np.exp(1j * theta) / kappa) * b_raw
    return MixtureExample(y=s + b, s=s, b=b, bits=bits, recipe=recipe)


@dataclass(frozen=True)
class MixtureRecipe:
    sinr_db: float
    N: int = 40_960
    soi_kind: Literal["qpsk", "ofdm_qpsk"] = "qpsk"
    interference_source: str = "awgn"
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.soi_kind not in ("qpsk", "ofdm_qpsk"):
            raise ValueError(f"unknown SOI kind {self.soi_kind!r}")


@dataclass(frozen=True)
class MixtureExample:
    y: np.ndarray
    s: np.ndarray
    b: np.ndarray
    bits: np.ndarray | None = None
    recipe: MixtureRecipe | None = field(default=None, compare=False)

    @property
    def sinr_db(self) -> float:
        return empirical_sinr_db(self.s, self.b)


def synth_interference_awgn(total_len: int, seed) -> np.ndarray:
    """Circular complex white Gaussian noise, unit power in expectation."""
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(total_len) + 1j * rng.standard_normal(total_len)) / np.sqrt(2)


def synth_interference_framed(frame_len: int, total_len: int, seed, frame_seed=None) -> np.ndarray:
    """A pseudo-random frame repeated to ``total_len``, randomly shifted and rotated.

    The frame content is drawn from ``frame_seed`` (defaults to ``seed``); the
    circular shift and global phase from ``seed``.  Sharing ``frame_seed``
    across examples gives a source with a fixed, learnable waveform.
    """
    if not 1 <= frame_len <= total_len:
        raise ValueError(f"need 1 <= frame_len <= total_len, got {frame_len}, {total_len}")
    frame_rng = np.random.default_rng(seed if frame_seed is None else frame_seed)
    frame = frame_rng.standard_normal(frame_len) + 1j * frame_rng.standard_normal(frame_len)
    reps = -(-total_len // frame_len)
    x = np.tile(frame, reps)[:total_len]
    rng = np.random.default_rng(seed)
    x = np.roll(x, int(rng.integers(0, total_len))) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return normalize_power(x)


def synth_interference_emi(burst_len: int, duty_cycle: float, total_len: int, seed) -> np.ndarray:
    """Bursty chirps: one burst of ``burst_len`` samples per ``burst_len/duty_cycle``."""
    if not 0 < duty_cycle <= 1:
        raise ValueError(f"duty_cycle must lie in (0, 1], got {duty_cycle}")
    rng = np.random.default_rng(seed)
    period = max(burst_len, int(round(burst_len / duty_cycle)))
    active = np.zeros(total_len, dtype=bool)
    n = np.arange(total_len)
    # random phase of the burst grid; active where (n + offset) mod period < burst_len
    offset = int(rng.integers(0, period))
    active[(n + offset) % period < burst_len] = True
    if duty_cycle == 1:
        active[:] = True
    f0 = rng.uniform(-0.25, 0.25)
    rate = rng.uniform(-0.5, 0.5) / max(burst_len, 1)
    t = (n + offset) % period
    phase = 2 * np.pi * (f0 * t + 0.5 * rate * t**2) + rng.uniform(0, 2 * np.pi)
    x = np.where(active, np.exp(1j * phase), 0)
    return normalize_power(x)


def interference_source(name: str, **params) -> Callable[[int, int], np.ndarray]:
    """Return ``draw(total_len, seed) -> unit-power interference`` for a named source.

    Names: ``awgn``, ``framed`` (``frame_len``, ``frame_seed``), ``emi``
    (``burst_len``, ``duty_cycle``).  An :class:`InterferenceDataset` may be
    passed through ``dataset=`` with name ``recorded``.
    """
    if name == "awgn":
        return lambda total_len, seed: synth_interference_awgn(total_len, seed)
    if name == "framed":
        frame_len = params.get("frame_len", 256)
        frame_seed = params.get("frame_seed", 0)
        return lambda total_len, seed: synth_interference_framed(
            frame_len, total_len, seed, frame_seed=frame_seed
        )
    if name == "emi":
        burst_len = params.get("burst_len", 512)
        duty = params.get("duty_cycle", 0.3)
        return lambda total_len, seed: synth_interference_emi(burst_len, duty, total_len, seed)
    if name == "recorded":
        dataset: InterferenceDataset = params["dataset"]
        frames = dataset.subset(params.get("split", "test"))

        def draw(total_len, seed):
            rng = np.random.default_rng(seed)
            frame = frames[int(rng.integers(0, len(frames)))]
            return extract_window(frame, total_len, rng.integers(0, 2**63))

        return draw
    raise ValueError(f"unknown interference source {name!r}")


def example_seed(seed: int, *keys: int) -> int:
    """Derive an independent 63-bit seed from a base seed and integer keys."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def synthesize_example(recipe: MixtureRecipe, source=None, soi_cfg=None) -> MixtureExample:
    """Draw one mixture example fully determined by ``recipe``.

    ``source`` is a draw function as returned by :func:`interference_source`;
    by default it is built from ``recipe.interference_source``.
    """
    if source is None:
        source = interference_source(recipe.interference_source)
    soi_seed, b_seed, mix_seed = (example_seed(recipe.seed, k) for k in range(3))
    if recipe.soi_kind == "qpsk":
        cfg = soi_cfg or signals.QpskConfig(N=recipe.N)
        s, bits = signals.generate_qpsk_soi(cfg, soi_seed)
    else:
        cfg = soi_cfg or signals.OfdmConfig.for_length(recipe.N)
        s, bits = signals.generate_ofdm_soi(cfg, soi_seed)
    b_raw = source(recipe.N, b_seed)
    return make_mixture(s, b_raw, recipe.sinr_db, mix_seed, bits=bits, recipe=recipe)
