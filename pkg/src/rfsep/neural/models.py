"""UNet and WaveNet separators on 2-channel (real, imag) waveforms."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .functional import receptive_field

__all__ = [
    "Conv1d",
    "UNetConfig",
    "WaveNetConfig",
    "UNet",
    "WaveNet",
    "dilation_schedule",
    "wavenet_receptive_field",
    "build_model",
    "to_channels",
    "from_channels",
]


class Conv1d:
    """Learnable 1-D convolution: weights ``(out, in, kernel)`` and a bias."""

    def __init__(self, in_channels, out_channels, kernel=1, dilation=1, padding="same", rng=None, dtype=np.float64):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.dilation = dilation
        self.padding = padding
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(in_channels * kernel)
        self.weight = Tensor(rng.uniform(-bound, bound, (out_channels, in_channels, kernel)).astype(dtype), True)
        self.bias = Tensor(rng.uniform(-bound, bound, out_channels).astype(dtype), True)

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.kernel, self.dilation)

    def __call__(self, x: Tensor) -> Tensor:
        return ag.conv1d(x, self.weight, self.bias, self.dilation, self.padding)


def to_channels(z) -> np.ndarray:
    """Complex ``(..., N)`` to real ``(..., 2, N)``."""
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-2)


def from_channels(x) -> np.ndarray:
    x = np.asarray(x)
    return x[..., 0, :] + 1j * x[..., 1, :]


class _Model:
    kind = ""

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        for name, layer in self._layers():
            out[f"{name}.weight"] = layer.weight
            out[f"{name}.bias"] = layer.bias
        return out

    def params(self) -> list[Tensor]:
        return list(self.named_params().values())

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()

    def astype(self, dtype):
        for p in self.params():
            p.data = p.data.astype(dtype)
        return self

    @property
    def dtype(self):
        return self.params()[0].dtype

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_params().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = self.named_params()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise KeyError(f"state mismatch; missing={sorted(missing)} unexpected={sorted(extra)}")
        for k, p in params.items():
            if state[k].shape != p.shape:
                raise ValueError(f"{k}: shape {state[k].shape} != {p.shape}")
            p.data = np.array(state[k], copy=True)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Inference on a real ``(B, 2, N)`` or ``(2, N)`` array."""
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 2
        with ag.no_grad():
            out = self.forward(Tensor(x[None] if squeeze else x)).data
        return out[0] if squeeze else out

    def separate(self, y) -> np.ndarray:
        """Complex mixture(s) in, complex SOI estimate(s) out."""
        y = np.asarray(y)
        return from_channels(self.predict(to_channels(y))).astype(complex)

    __call__ = separate


@dataclass(frozen=True)
class UNetConfig:
    depth: int = 4
    base_channels: int = 16
    first_kernel: int = 101
    inner_kernel: int = 3
    downsample: int = 2
    max_channels: int = 128
    in_channels: int = 2

    def channels(self, level: int) -> int:
        return min(self.base_channels * 2**level, self.max_channels)

    @property
    def length_multiple(self) -> int:
        return self.downsample**self.depth


class UNet(_Model):
    """Encoder/decoder with skip concatenation and a long first kernel.

    Encoder level ``i``: average-pool by ``downsample`` then conv + ReLU.
    Decoder level ``i``: nearest upsample, conv + ReLU, concat with the
    encoder features of the same scale, conv + ReLU.  The head is a linear
    1x1 conv back to two channels.
    """

    kind = "unet"

    def __init__(self, config: UNetConfig = UNetConfig(), seed: int = 0, dtype=np.float64):
        self.config = config
        c = config
        rng = np.random.default_rng(seed)
        self.first = Conv1d(c.in_channels, c.channels(0), c.first_kernel, rng=rng, dtype=dtype)
        self.enc = [
            Conv1d(c.channels(i), c.channels(i + 1), c.inner_kernel, rng=rng, dtype=dtype) for i in range(c.depth)
        ]
        self.up = [
            Conv1d(c.channels(i + 1), c.channels(i), c.inner_kernel, rng=rng, dtype=dtype) for i in range(c.depth)
        ]
        self.merge = [
            Conv1d(2 * c.channels(i), c.channels(i), c.inner_kernel, rng=rng, dtype=dtype) for i in range(c.depth)
        ]
        self.head = Conv1d(c.channels(0), c.in_channels, 1, rng=rng, dtype=dtype)

    def _layers(self):
        yield "first", self.first
        for i, layer in enumerate(self.enc):
            yield f"enc{i}", layer
        for i, layer in enumerate(self.up):
            yield f"up{i}", layer
        for i, layer in enumerate(self.merge):
            yield f"merge{i}", layer
        yield "head", self.head

    def forward(self, x: Tensor) -> Tensor:
        c = self.config
        N = x.shape[-1]
        if N % c.length_multiple:
            raise ValueError(f"input length {N} must be divisible by downsample**depth = {c.length_multiple}")
        h = ag.relu(self.first(x))
        skips = []
        for conv in self.enc:
            skips.append(h)
            h = ag.relu(conv(ag.avg_pool(h, c.downsample)))
        for i in reversed(range(c.depth)):
            h = ag.relu(self.up[i](ag.upsample(h, c.downsample)))
            h = ag.relu(self.merge[i](ag.concat([h, skips[i]])))
        return self.head(h)


def dilation_schedule(R: int, m: int) -> list[int]:
    return [2 ** (i % m) for i in range(R)]


def wavenet_receptive_field(R: int, m: int, kernel: int = 3) -> int:
    return 1 + (kernel - 1) * sum(dilation_schedule(R, m))


@dataclass(frozen=True)
class WaveNetConfig:
    R: int = 10
    m: int = 10
    C: int = 32
    kernel: int = 3
    in_channels: int = 2

    @property
    def dilations(self) -> list[int]:
        return dilation_schedule(self.R, self.m)

    @property
    def receptive_field(self) -> int:
        return wavenet_receptive_field(self.R, self.m, self.kernel)

    @property
    def length_multiple(self) -> int:
        return 1


class WaveNet(_Model):
    """Stack of gated dilated residual blocks at full temporal resolution.

    Each block: dilated conv to ``2C`` channels, gate, 1x1 conv; the result
    is added to the residual stream and to the skip sum.  Output head:
    ReLU, 1x1 conv, 1x1 conv to two channels.
    """

    kind = "wavenet"

    def __init__(self, config: WaveNetConfig = WaveNetConfig(), seed: int = 0, dtype=np.float64):
        self.config = config
        c = config
        rng = np.random.default_rng(seed)
        self.inp = Conv1d(c.in_channels, c.C, 1, rng=rng, dtype=dtype)
        self.dilated = [Conv1d(c.C, 2 * c.C, c.kernel, d, rng=rng, dtype=dtype) for d in c.dilations]
        self.res = [Conv1d(c.C, c.C, 1, rng=rng, dtype=dtype) for _ in range(c.R)]
        self.out1 = Conv1d(c.C, c.C, 1, rng=rng, dtype=dtype)
        self.out2 = Conv1d(c.C, c.in_channels, 1, rng=rng, dtype=dtype)

    def _layers(self):
        yield "input", self.inp
        for i, (d, r) in enumerate(zip(self.dilated, self.res)):
            yield f"block{i}.dilated", d
            yield f"block{i}.res", r
        yield "out1", self.out1
        yield "out2", self.out2

    def forward(self, x: Tensor) -> Tensor:
        h = self.inp(x)
        skip = None
        for dil, res in zip(self.dilated, self.res):
            o = res(ag.gated_halves(dil(h)))
            h = h + o
            skip = o if skip is None else skip + o
        return self.out2(self.out1(ag.relu(skip)))


def build_model(kind: str, config: dict | None = None, seed: int = 0, dtype=np.float64):
    config = dict(config or {})
    if kind == "unet":
        return UNet(UNetConfig(**config), seed=seed, dtype=dtype)
    if kind == "wavenet":
        return WaveNet(WaveNetConfig(**config), seed=seed, dtype=dtype)
    raise ValueError(f"unknown model kind {kind!r}; expected 'unet' or 'wavenet'")


def model_config_dict(model) -> dict:
    return asdict(model.config)
