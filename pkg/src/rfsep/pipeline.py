"""Glue that turns an :class:`ExperimentConfig` into sources, separators and datasets."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as rio
from . import signals
from .baselines import (
    BlockCovariance,
    LmmseSeparator,
    estimate_block_covariance,
    lmmse_separate,
    soi_covariance_analytic,
)
from .config import ExperimentConfig
from .mixtures import (
    InterferenceFrame,
    example_seed,
    frequency_recenter,
    interference_source,
    make_mixture,
    split_dataset,
)
from .neural.models import build_model
from .neural.training import TrainConfig, train

# seed-space tags keep the streams drawn from one base seed apart
TAG_DATASET, TAG_LMMSE, TAG_TRAIN = 11, 12, 13


def interference_from_config(cfg: ExperimentConfig, split: str = "test", data_dir=None):
    """``draw(total_len, seed)`` for the configured interference source."""
    ic = cfg.mixture.interference
    if ic.source == "framed":
        return interference_source("framed", frame_len=ic.frame_len, frame_seed=ic.frame_seed)
    if ic.source == "emi":
        return interference_source("emi", burst_len=ic.burst_len, duty_cycle=ic.duty_cycle)
    if ic.source == "recorded":
        if not ic.path:
            raise ValueError("mixture.interference.path is required for recorded interference")
        path = Path(ic.path)
        if not path.is_absolute():
            path = rio.data_root(data_dir) / path
        frames = rio.load_interference_frames(path)
        if ic.recenter:
            frames = [
                InterferenceFrame(frequency_recenter(f.samples)[0], f.source_name, f.frame_index) for f in frames
            ]
        dataset = split_dataset(frames, ic.train_fraction, ic.split_seed)
        return interference_source("recorded", dataset=dataset, split=split)
    return interference_source(ic.source)


def _soi_generate(cfg: ExperimentConfig, N: int):
    soi_cfg = cfg.soi_config(N)
    gen = signals.generate_qpsk_soi if cfg.soi.kind == "qpsk" else signals.generate_ofdm_soi
    return soi_cfg, gen


def synthesize(cfg: ExperimentConfig, seed: int, N: int | None = None, split: str = "test", draw_b=None):
    """One example ``(y, s, b, bits, sinr_db)`` determined by ``seed``."""
    N = N or cfg.mixture.N
    soi_cfg, gen = _soi_generate(cfg, N)
    draw_b = draw_b or interference_from_config(cfg, split)
    sinrs = cfg.sinr_list
    rng = np.random.default_rng(example_seed(seed, 3))
    sinr = float(sinrs[int(rng.integers(0, len(sinrs)))])
    s, bits = gen(soi_cfg, example_seed(seed, 0))
    b_raw = draw_b(N, example_seed(seed, 1))
    mix = make_mixture(s, b_raw, sinr, example_seed(seed, 2), bits=bits)
    return mix.y, mix.s, mix.b, bits, sinr


def batch_source(cfg: ExperimentConfig, N: int | None = None, split: str = "train", data_dir=None):
    """A training :data:`~rfsep.neural.training.BatchSource` of fresh synthetic mixtures."""
    draw_b = interference_from_config(cfg, split, data_dir)

    def draw(seed, count):
        parts = [synthesize(cfg, example_seed(seed, i), N, draw_b=draw_b) for i in range(count)]
        return tuple(np.stack([p[k] for p in parts]) for k in range(3))

    return draw


def dataset_source(y, s, b):
    """Batch source sampling stored examples with replacement."""

    def draw(seed, count):
        idx = np.random.default_rng(seed).integers(0, y.shape[0], count)
        return y[idx], s[idx], b[idx]

    return draw


class SinrAwareLmmse:
    """Block LMMSE whose interference covariance is rescaled to each SINR point.

    ``C_bb`` is stored for unit-power interference; at ``sinr_db`` it is
    divided by ``kappa**2``.
    """

    label = "lmmse"

    def __init__(self, cov: BlockCovariance, sinr_db: float = 0.0, eps_reg=None):
        self.cov = cov
        self.eps_reg = eps_reg
        self.sinr_db = sinr_db
        self._cache: dict[float, LmmseSeparator] = {}

    def at_sinr(self, sinr_db: float) -> LmmseSeparator:
        key = round(float(sinr_db), 9)
        if key not in self._cache:
            scale = 10 ** (-sinr_db / 10)
            cov = BlockCovariance(self.cov.block_len, self.cov.C_ss, self.cov.C_bb * scale, self.cov.sample_count)
            self._cache[key] = LmmseSeparator(cov, self.eps_reg)
        return self._cache[key]

    def separate(self, y):
        return lmmse_separate(y, self.at_sinr(self.sinr_db))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {
            "C_ss.real": self.cov.C_ss.real.copy(),
            "C_ss.imag": self.cov.C_ss.imag.copy(),
            "C_bb.real": self.cov.C_bb.real.copy(),
            "C_bb.imag": self.cov.C_bb.imag.copy(),
        }

    @classmethod
    def from_state(cls, tensors: dict, meta: dict) -> "SinrAwareLmmse":
        C_ss = tensors["C_ss.real"] + 1j * tensors["C_ss.imag"]
        C_bb = tensors["C_bb.real"] + 1j * tensors["C_bb.imag"]
        cov = BlockCovariance(C_ss.shape[0], C_ss, C_bb, int(meta.get("sample_count", 0)))
        return cls(cov, meta.get("sinr_db", 0.0), meta.get("eps_reg"))


def fit_lmmse(cfg: ExperimentConfig, N: int | None = None, data_dir=None) -> SinrAwareLmmse:
    """Unit-power block covariances from training-split examples.

    For a single-carrier SOI the exact covariance replaces the sample
    estimate when ``lmmse.analytic_soi`` is set.  The interference estimate
    gets a relative diagonal ridge.  Too few blocks leave directions of the
    interference subspace unseen, and the filter passes those untouched, so
    ``lmmse.train_examples`` should give more blocks than dimensions.
    """
    N = N or cfg.mixture.N
    lc = cfg.lmmse
    block = min(lc.block_len, N)
    soi_cfg, gen = _soi_generate(cfg, N)
    draw_b = interference_from_config(cfg, "train", data_dir)

    def pairs(chunk=64):
        # stacking examples turns rank-1 updates into one matrix product per chunk
        for lo in range(0, lc.train_examples, chunk):
            ss, bs = [], []
            for i in range(lo, min(lo + chunk, lc.train_examples)):
                seed = example_seed(cfg.seed, TAG_LMMSE, i)
                ss.append(gen(soi_cfg, example_seed(seed, 0))[0])
                bs.append(draw_b(N, example_seed(seed, 1)))
            yield np.stack(ss), np.stack(bs)

    cov = estimate_block_covariance(pairs(), block)
    C_ss, C_bb = cov.C_ss, cov.C_bb
    if lc.analytic_soi and cfg.soi.kind == "qpsk":
        C_ss = soi_covariance_analytic(soi_cfg, block)
    if lc.diag_loading:
        C_bb = C_bb + lc.diag_loading * float(np.real(np.trace(C_bb))) / block * np.eye(block)
    cov = BlockCovariance(block, C_ss, C_bb, cov.sample_count)
    return SinrAwareLmmse(cov, sinr_db=cfg.sinr_list[0], eps_reg=lc.eps_reg)


def train_config(cfg: ExperimentConfig) -> TrainConfig:
    t = cfg.train
    return TrainConfig(
        lr=t.lr,
        batch_size=t.batch_size,
        max_steps=t.max_steps,
        eval_every=t.eval_every,
        patience=t.patience,
        min_improvement=t.min_improvement,
        val_examples=t.val_examples,
        seed=example_seed(cfg.seed, TAG_TRAIN),
        augment=t.augment,
        dtype=t.dtype,
        time_budget_s=t.time_budget_s,
    )


def model_from_config(cfg: ExperimentConfig):
    m = cfg.model
    section = m.unet if m.kind == "unet" else m.wavenet
    dtype = np.dtype(cfg.train.dtype)
    return build_model(m.kind, section.model_dump(), seed=example_seed(cfg.seed, TAG_TRAIN, 1), dtype=dtype)


def train_from_config(cfg: ExperimentConfig, dataset=None, data_dir=None):
    """Train the configured model; ``dataset`` is an optional ``(y, s, b)`` triple.

    With a dataset, its last ``val_examples`` rows are held out for validation.
    """
    model = model_from_config(cfg)
    tc = train_config(cfg)
    if dataset is None:
        result = train(model, batch_source(cfg, cfg.train.N, data_dir=data_dir), tc)
    else:
        y, s, b = dataset
        n_val = min(cfg.train.val_examples, y.shape[0] - 1)
        if n_val < 1:
            raise ValueError("dataset needs at least 2 examples (train + validation)")
        source = dataset_source(y[:-n_val], s[:-n_val], b[:-n_val])
        result = train(model, source, tc, validation=(y[-n_val:], s[-n_val:]))
    return model, result


@dataclass(frozen=True)
class StoredDataset:
    y: np.ndarray
    s: np.ndarray
    b: np.ndarray
    bits: np.ndarray
    manifest: dict


def write_dataset(out_dir, cfg: ExperimentConfig, seed: int | None = None, data_dir=None) -> dict:
    """Synthesize ``dataset.num_examples`` mixtures into ``out_dir``.

    Files: ``y.rfch``, ``s.rfch``, ``b.rfch`` (frame files, one frame per
    example), ``bits.u8`` (one byte per bit, row-major) and ``manifest.json``.
    """
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    draw_b = interference_from_config(cfg, "test", data_dir)
    ys, ss, bs, bits, records = [], [], [], [], []
    for i in range(cfg.dataset.num_examples):
        ex_seed = example_seed(seed, TAG_DATASET, i)
        y, s, b, bt, sinr = synthesize(cfg, ex_seed, draw_b=draw_b)
        ys.append(y)
        ss.append(s)
        bs.append(b)
        bits.append(bt)
        records.append(
            {"index": i, "seed": ex_seed, "sinr_db": sinr, "empirical_sinr_db": float(10 * np.log10(np.mean(abs(s) ** 2) / np.mean(abs(b) ** 2)))}
        )
    rio.write_frames(out / "y.rfch", np.stack(ys))
    rio.write_frames(out / "s.rfch", np.stack(ss))
    rio.write_frames(out / "b.rfch", np.stack(bs))
    bit_arr = np.stack(bits).astype(np.uint8)
    bit_arr.tofile(out / "bits.u8")
    manifest = {
        "format": "rfsep-dataset",
        "version": 1,
        "seed": seed,
        "num_examples": len(records),
        "N": cfg.mixture.N,
        "bits_per_example": int(bit_arr.shape[1]),
        "soi_kind": cfg.soi.kind,
        "interference_source": cfg.mixture.interference.source,
        "files": {"y": "y.rfch", "s": "s.rfch", "b": "b.rfch", "bits": "bits.u8"},
        "examples": records,
        "config": cfg.model_dump(mode="json"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def read_dataset(path) -> StoredDataset:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    files = manifest["files"]
    y = rio.read_frames(path / files["y"]).astype(complex)
    s = rio.read_frames(path / files["s"]).astype(complex)
    b = rio.read_frames(path / files["b"]).astype(complex)
    bits = np.fromfile(path / files["bits"], dtype=np.uint8).reshape(manifest["num_examples"], -1)
    return StoredDataset(y, s, b, bits, manifest)
