"""
How far a linear filter gets
============================

QPSK buried 10 dB under an interferer that repeats a 256-sample frame.
The block LMMSE filter only knows second-order statistics; it is fitted
from simulated training examples and compared with doing nothing.

The interferer has just 256 distinct circular shifts, so its covariance
has rank 256.  A shift never seen while fitting leaves a direction the
filter knows nothing about, and that direction leaks straight through.
"""

import numpy as np

from rfsep import pipeline, signals
from rfsep.config import parse_config
from rfsep.eval import mse_db
from rfsep.mixtures import example_seed

BASE = """\
seed: 2
mixture:
  N: 2560
  sinr_db: -10.0
  interference: {source: framed, frame_len: 256, frame_seed: 1234}
lmmse: {block_len: 2560, train_examples: %d}
"""

cfg = parse_config(BASE % 64)
parts = [pipeline.synthesize(cfg, example_seed(7, i), split="test") for i in range(32)]
y, s, b, bits, _ = (np.stack([p[k] for p in parts]) for k in range(5))
soi = cfg.soi_config()


def score(name, est):
    ber = np.mean(signals.demod_qpsk(est, soi) != bits)
    print(f"{name:>22}: MSE {mse_db(est, s):6.2f} dB   BER {ber:.2e}")


score("matched filter only", y)

# %%
# Few examples, then enough to see every shift several times over
for n in (300, 3000):
    sep = pipeline.fit_lmmse(parse_config(BASE % n))
    rank = np.sum(np.linalg.eigvalsh(sep.cov.C_bb) > 1e-2 * np.trace(sep.cov.C_bb).real / 2560)
    score(f"LMMSE, {n} examples", sep.separate(y))
    print(f"{'':>22}  interference covariance: {rank} strong directions")

# %%
# What remains is the part of the SOI that shares those 256 directions.
