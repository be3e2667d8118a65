"""Experiment configuration: a YAML (or JSON) document validated with pydantic.

Unknown keys are rejected.  Validation errors name the offending key path and
its line in the source file.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import signals
from .eval import DEFAULT_SINR_GRID


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class QpskSection(_Strict):
    F: int = Field(16, ge=1)
    tau0: int = Field(8, ge=0)
    rolloff: float = Field(0.5, gt=0, le=1)
    span: int = Field(128, ge=2)


class OfdmSection(_Strict):
    K: int = Field(64, ge=1)
    Tcp: int = Field(16, ge=0)
    num_active: int = Field(56, ge=1)


class SoiSection(_Strict):
    kind: Literal["qpsk", "ofdm_qpsk"] = "qpsk"
    qpsk: QpskSection = QpskSection()
    ofdm: OfdmSection = OfdmSection()


class InterferenceSection(_Strict):
    source: Literal["awgn", "framed", "emi", "recorded"] = "awgn"
    frame_len: int = Field(256, ge=1)
    frame_seed: int = 0
    burst_len: int = Field(512, ge=1)
    duty_cycle: float = Field(0.3, gt=0, le=1)
    path: Optional[str] = None
    train_fraction: float = Field(0.8, gt=0, lt=1)
    split_seed: int = 0
    recenter: bool = False


class MixtureSection(_Strict):
    N: int = Field(40_960, ge=1)
    sinr_db: Union[float, list[float]] = -10.0
    interference: InterferenceSection = InterferenceSection()


class DatasetSection(_Strict):
    num_examples: int = Field(10, ge=1)


class UNetSection(_Strict):
    depth: int = Field(4, ge=1)
    base_channels: int = Field(16, ge=1)
    first_kernel: int = Field(101, ge=1)
    inner_kernel: int = Field(3, ge=1)
    downsample: int = Field(2, ge=1)
    max_channels: int = Field(128, ge=1)


class WaveNetSection(_Strict):
    R: int = Field(10, ge=1)
    m: int = Field(10, ge=1)
    C: int = Field(32, ge=1)
    kernel: int = Field(3, ge=1)


class ModelSection(_Strict):
    kind: Literal["unet", "wavenet"] = "wavenet"
    unet: UNetSection = UNetSection()
    wavenet: WaveNetSection = WaveNetSection()


class TrainSection(_Strict):
    N: int = Field(2560, ge=1)
    lr: float = Field(1e-3, gt=0)
    batch_size: int = Field(8, ge=1)
    max_steps: int = Field(2000, ge=1)
    eval_every: int = Field(100, ge=1)
    patience: int = Field(5, ge=1)
    min_improvement: float = Field(0.01, ge=0)
    val_examples: int = Field(16, ge=1)
    augment: bool = True
    dtype: Literal["float32", "float64"] = "float32"
    time_budget_s: Optional[float] = Field(None, gt=0)


class LmmseSection(_Strict):
    block_len: int = Field(2560, ge=1)
    train_examples: int = Field(256, ge=1)
    eps_reg: Optional[float] = Field(None, ge=0)
    # ridge added to the estimated interference covariance, relative to its mean diagonal
    diag_loading: float = Field(1e-3, ge=0)
    analytic_soi: bool = True


class SweepSection(_Strict):
    sinr_db: list[float] = list(DEFAULT_SINR_GRID)
    trials: int = Field(10, ge=1)

    @field_validator("sinr_db")
    @classmethod
    def _non_empty(cls, v):
        if not v:
            raise ValueError("sweep grid must not be empty")
        return v


class ExperimentConfig(_Strict):
    seed: int = 0
    soi: SoiSection = SoiSection()
    mixture: MixtureSection = MixtureSection()
    dataset: DatasetSection = DatasetSection()
    model: ModelSection = ModelSection()
    train: TrainSection = TrainSection()
    lmmse: LmmseSection = LmmseSection()
    sweep: SweepSection = SweepSection()

    def soi_config(self, N: int | None = None):
        N = N or self.mixture.N
        if self.soi.kind == "qpsk":
            q = self.soi.qpsk
            return signals.QpskConfig(F=q.F, tau0=q.tau0, N=N, rolloff=q.rolloff, span=q.span)
        o = self.soi.ofdm
        return signals.OfdmConfig.for_length(
            N, K=o.K, Tcp=o.Tcp, active=signals.default_active_subcarriers(o.K, o.num_active)
        )

    @property
    def sinr_list(self) -> list[float]:
        v = self.mixture.sinr_db
        return list(v) if isinstance(v, list) else [float(v)]


def _line_of(node, loc) -> int | None:
    """Line (1-based) of the YAML node at key path ``loc``, or of its deepest existing parent."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == key:
                    line = k.start_mark.line + 1
                    node = v
                    break
            else:
                return line
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: invalid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = [p for p in err["loc"] if not (isinstance(p, str) and p.startswith("function-"))]
            line = _line_of(node, loc)
            path = ".".join(str(p) for p in loc) or "<root>"
            msgs.append(f"{source}:{line or '?'}: {path}: {err['msg']}")
        raise ConfigError("\n".join(msgs)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    return parse_config(text, str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
