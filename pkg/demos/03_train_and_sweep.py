"""
Train, sweep, report
====================

The command-line workflow end to end, driven from Python: generate a
test set, fit the linear baseline, train a small WaveNet, sweep all
three over SINR and render a markdown table.  Everything lands in a
scratch directory.  The network is deliberately tiny so this finishes
in a few minutes; expect it to trail the linear filter at this size.
"""

import sys
import tempfile
from pathlib import Path

from rfsep.cli import main

CONFIG = """\
seed: 4
mixture:
  N: 2560
  sinr_db: [-12.0, -9.0, -6.0]
  interference: {source: framed, frame_len: 256, frame_seed: 99}
dataset: {num_examples: 6}
model:
  kind: wavenet
  wavenet: {R: 2, m: 8, C: 16}
train: {N: 2560, batch_size: 4, max_steps: 300, eval_every: 50, val_examples: 4}
lmmse: {block_len: 2560, train_examples: 3000}
sweep: {sinr_db: [-12.0, -9.0, -6.0], trials: 4}
"""

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="rfsep-"))
work.mkdir(parents=True, exist_ok=True)
cfg = work / "experiment.yaml"
cfg.write_text(CONFIG)
print("working in", work)


def rfsep(*args):
    argv = [str(a) for a in args]
    print("$ rfsep", " ".join(argv))
    code = main(argv)
    if code:
        sys.exit(code)


rfsep("generate", "--config", cfg, "--out", work / "test_set")
rfsep("train", "--config", cfg, "--method", "lmmse", "--out", work / "lmmse")
rfsep("train", "--config", cfg, "--out", work / "wavenet")

# %%
# the loss log has one row per evaluation round
print((work / "wavenet.loss.csv").read_text())

for method, weights in (("mf", None), ("lmmse", "lmmse.json"), ("wavenet", "wavenet.json")):
    extra = ["--weights", work / weights] if weights else []
    rfsep("sweep", "--config", cfg, "--method", method, *extra, "--out", work / f"{method}.csv")
    rfsep("eval", "--config", cfg, "--method", method, *extra, "--dataset", work / "test_set", "--out", work / f"{method}.json")

rfsep("report", *(work / f"{m}.csv" for m in ("mf", "lmmse", "wavenet")), "--out", work / "report.md")
print((work / "report.md").read_text())
