"""MSE training loop with interference augmentation and early stopping."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..mixtures import MixtureExample, example_seed
from .autograd import Tensor, mse
from .models import to_channels
from .optim import AdamHyper, adam_init, adam_step

log = logging.getLogger(__name__)

# draw(seed, count) -> (y, s, b), each complex (count, N)
BatchSource = Callable[[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]]


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 8
    max_steps: int = 2000
    eval_every: int = 100
    patience: int = 5
    min_improvement: float = 0.01
    val_examples: int = 16
    seed: int = 0
    augment: bool = True
    dtype: str = "float32"
    time_budget_s: float | None = None

    def __post_init__(self):
        for name in ("lr", "batch_size", "max_steps", "eval_every", "patience", "val_examples"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    best_val: float = float("inf")
    initial_val: float = float("nan")
    steps: int = 0
    stopped_early: bool = False


def augment(example: MixtureExample, seed) -> MixtureExample:
    """Random circular time shift and phase rotation of the interference."""
    rng = np.random.default_rng(seed)
    b = augment_interference(example.b[None], rng)[0]
    return replace(example, y=example.s + b, b=b)


def augment_interference(b: np.ndarray, rng: np.random.Generator, shifts=None, phases=None) -> np.ndarray:
    b = np.asarray(b)
    n = b.shape[0]
    if shifts is None:
        shifts = rng.integers(0, b.shape[-1], n)
    if phases is None:
        phases = rng.uniform(0, 2 * np.pi, n)
    out = np.empty_like(b)
    for i in range(n):
        out[i] = np.roll(b[i], int(shifts[i])) * np.exp(1j * phases[i])
    return out


def _pack(z: np.ndarray, dtype) -> np.ndarray:
    return to_channels(z).astype(dtype)


def evaluate_mse(model, y: np.ndarray, s: np.ndarray, batch_size: int = 8) -> float:
    """Mean squared error over all real entries (half the complex per-sample MSE)."""
    total = 0.0
    for i in range(0, y.shape[0], batch_size):
        pred = model.predict(_pack(y[i : i + batch_size], model.dtype))
        err = pred.astype(np.float64) - to_channels(s[i : i + batch_size])
        total += float(np.sum(err * err))
    return total / (2 * s.size)


def train(model, source: BatchSource, cfg: TrainConfig = TrainConfig(), validation=None) -> TrainResult:
    """Minimise MSE with Adam; keep the parameters with the best validation loss.

    Training batches use seeds ``example_seed(cfg.seed, 0, step)`` and the
    validation set ``example_seed(cfg.seed, 1)``, so the two streams never
    share a draw.  One epoch is ``cfg.eval_every`` steps.  ``validation``
    may supply a fixed ``(y, s)`` pair instead.
    """
    dtype = np.dtype(cfg.dtype)
    model.astype(dtype)
    params = model.params()
    state = adam_init([p.data for p in params])
    hyper = AdamHyper(lr=cfg.lr)
    if validation is None:
        y_val, s_val, _ = source(example_seed(cfg.seed, 1), cfg.val_examples)
    else:
        y_val, s_val = validation
    aug_rng = np.random.default_rng(example_seed(cfg.seed, 2))

    result = TrainResult()
    best_state = model.state_dict()
    result.best_val = result.initial_val = evaluate_mse(model, y_val, s_val)
    bad_epochs = 0
    running = []
    start = time.monotonic()
    step = 0
    while step < cfg.max_steps:
        y, s, b = source(example_seed(cfg.seed, 0, step), cfg.batch_size)
        if cfg.augment:
            y = s + augment_interference(b, aug_rng)
        model.zero_grad()
        loss = mse(model.forward(Tensor(_pack(y, dtype))), _pack(s, dtype))
        if not np.isfinite(loss.data):
            raise TrainingDiverged(f"loss became {float(loss.data)} at step {step}; lower the learning rate")
        loss.backward()
        adam_step([p.data for p in params], [p.grad for p in params], state, hyper)
        running.append(float(loss.data))
        step += 1

        out_of_time = cfg.time_budget_s is not None and time.monotonic() - start > cfg.time_budget_s
        if step % cfg.eval_every == 0 or step == cfg.max_steps or out_of_time:
            val = evaluate_mse(model, y_val, s_val)
            epoch = len(result.history) + 1
            result.history.append(
                {"epoch": epoch, "step": step, "train_loss": float(np.mean(running)), "val_loss": val}
            )
            log.info("epoch %d step %d train %.5g val %.5g", epoch, step, np.mean(running), val)
            running = []
            if not np.isfinite(val):
                raise TrainingDiverged(f"validation loss became {val} at step {step}")
            if val < result.best_val * (1 - cfg.min_improvement):
                result.best_val = val
                best_state = model.state_dict()
                bad_epochs = 0
            else:
                bad_epochs += 1
                if val < result.best_val:
                    result.best_val = val
                    best_state = model.state_dict()
                if bad_epochs >= cfg.patience:
                    result.stopped_early = True
                    break
            if out_of_time:
                break
    model.load_state_dict(best_state)
    result.steps = step
    return result
