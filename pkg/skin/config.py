"""
SkIn - Configuration Management
Layered YAML configuration, preset selection and validated run configs.
"""

import copy
import os
import yaml
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError

from .bench import BenchConfig
from .encoder import EncoderConfig, preset_config, with_overrides
from .errors import ConfigurationError
from .textio import SynthSpec
from .training import TrainConfig

PRESET_ENV = "SKIN_PRESET"
DEFAULT_PRESET = "desk"
RUN_CONFIG_FILE = "run_config.yaml"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataSection(_Section):
    """Corpus location and segment geometry."""
    dir: str = "data"
    n: int = 8
    l: int = 32
    num_classes: int = 3
    min_count: int = 1
    max_size: Optional[int] = None
    eval_fraction: float = 0.3


class SynthSection(_Section):
    num_docs: int = 2000
    vocab_size: int = 1000
    signal_count: int = 8
    signal_pool_size: int = 4
    noise_rate: float = 0.0


class EncoderSizes(_Section):
    layers: Optional[int] = None
    heads: Optional[int] = None
    dim: Optional[int] = None
    ff_dim: Optional[int] = None


class EncoderSection(_Section):
    """Encoder preset plus optional per-role size overrides."""
    preset: str = DEFAULT_PRESET
    max_len: Optional[int] = None
    lite: EncoderSizes = Field(default_factory=EncoderSizes)
    strong: EncoderSizes = Field(default_factory=EncoderSizes)


class TrainSection(_Section):
    r_l2: float = 1e-5
    dropout: float = 0.3
    smoothing: float = 0.2
    lr_stage1: float = 1e-4
    lr_stage3: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    batch_size: int = 32
    epochs_stage1: int = 20
    epochs_stage3: int = 10
    epochs_baseline: int = 10
    patience: int = 3
    min_delta: float = 1e-4
    normalize_smoothing: bool = False


class ModelSection(_Section):
    mask_padding: bool = False
    ablate_local: bool = False
    eval_batch_size: int = 64


class BaselineSection(_Section):
    truncate_cap: Optional[int] = None
    head_tail_len: Optional[int] = None


class BenchSection(_Section):
    methods: List[str] = ["bert", "slidewindow", "skin-invariable", "skin-variable"]
    lengths: List[int] = [128, 256, 512, 1024, 2048]
    trials: int = 5
    warmup: int = 1
    batch_size: int = 16
    micro_batch: int = 4
    segment_count: int = 8
    segment_length: int = 64
    encoder_length_limit: int = 512
    element_budget: Optional[int] = None
    lr: float = 1e-5


class RunConfig(_Section):
    """
    Fully merged configuration of one command.

    `seed` drives every random stream of the run (corpus, split,
    initialization, shuffling, dropout, bench inputs).
    """
    preset: str = DEFAULT_PRESET
    seed: int = 7
    out: str = "runs/latest"
    data: DataSection = Field(default_factory=DataSection)
    synth: SynthSection = Field(default_factory=SynthSection)
    encoder: EncoderSection = Field(default_factory=EncoderSection)
    train: TrainSection = Field(default_factory=TrainSection)
    model: ModelSection = Field(default_factory=ModelSection)
    baselines: BaselineSection = Field(default_factory=BaselineSection)
    bench: BenchSection = Field(default_factory=BenchSection)

    # -------------------------------------------------------------------------
    # Domain configs
    # -------------------------------------------------------------------------

    def synth_spec(self) -> SynthSpec:
        spec = SynthSpec(
            n=self.data.n, l=self.data.l, num_classes=self.data.num_classes,
            seed=self.seed, **self.synth.model_dump(),
        )
        spec.validate()
        return spec

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, **self.train.model_dump())

    def bench_config(self) -> BenchConfig:
        return BenchConfig(
            num_classes=self.data.num_classes,
            vocab_size=self.synth.vocab_size,
            seed=self.seed,
            **self.bench.model_dump(),
        )

    def truncate_cap(self) -> int:
        return self.baselines.truncate_cap or min(512, self.data.n * self.data.l)

    def head_tail_len(self) -> int:
        return self.baselines.head_tail_len or min(128, self.data.n * self.data.l // 2)

    def required_max_len(self) -> int:
        """Longest wrapped input any model of this run feeds an encoder."""
        l = self.data.l
        return max(
            l + l // 2 + 2,
            self.truncate_cap() + 2,
            2 * self.head_tail_len() + 3,
        )

    def encoder_configs(self, vocab_size: int) -> Tuple[EncoderConfig, EncoderConfig]:
        """(lite, strong) encoder configs for a corpus vocabulary."""
        max_len = self.encoder.max_len or self.required_max_len()
        configs = []
        for role, sizes in (("lite", self.encoder.lite), ("strong", self.encoder.strong)):
            config = preset_config(
                self.encoder.preset, role, vocab_size, max_len, self.train.dropout
            )
            changes = {k: v for k, v in sizes.model_dump().items() if v is not None}
            if changes:
                config = with_overrides(config, **changes)
            configs.append(config)
        return configs[0], configs[1]

    def bench_encoder_configs(self) -> Tuple[EncoderConfig, EncoderConfig]:
        """Bench encoders: dropout as in training, max_len just above the length limit."""
        base = self.model_copy(deep=True)
        base.encoder.max_len = self.bench.encoder_length_limit + 2
        return base.encoder_configs(self.synth.vocab_size)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(), sort_keys=True)


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge `override` into a copy of `base`."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _format_pydantic_error(error: PydanticValidationError) -> str:
    problems = []
    for item in error.errors():
        where = ".".join(str(part) for part in item.get("loc", ()))
        if item.get("type") == "extra_forbidden":
            problems.append(f"unknown key '{where}'")
        else:
            problems.append(f"{where}: {item.get('msg')}")
    return "; ".join(problems)


class ConfigManager:
    """
    Loads and merges run configuration.

    Merge order: config/default.yaml <- config/presets/<preset>.yaml <-
    user --config file <- command-line overrides.

    Priority for the preset:
    1. Command-line argument (--preset)
    2. `preset` key of the user config file
    3. Environment variable (SKIN_PRESET, also read from .env)
    4. desk
    """

    def __init__(self, base_path: Optional[Path] = None):
        self.base_path = Path(base_path) if base_path else Path(__file__).resolve().parent.parent
        self.config_dir = self.base_path / "config"

    def load_yaml(self, filepath: Path) -> Dict[str, Any]:
        """Load a YAML configuration file (empty files load as {})."""
        filepath = Path(filepath)
        if not filepath.exists():
            raise ConfigurationError(f"Configuration file not found: {filepath}")
        with open(filepath, 'r', encoding='utf-8') as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigurationError(f"{filepath}: invalid YAML ({e})")
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"{filepath}: top level must be a mapping")
        return data

    def available_presets(self) -> List[str]:
        return sorted(p.stem for p in (self.config_dir / "presets").glob("*.yaml"))

    def detect_preset(self, flag: Optional[str] = None, user: Optional[Dict[str, Any]] = None) -> str:
        if flag:
            return flag
        if user and user.get("preset"):
            return str(user["preset"])
        load_dotenv()
        env_preset = os.environ.get(PRESET_ENV, "").strip().lower()
        return env_preset or DEFAULT_PRESET

    def load(
        self,
        preset: Optional[str] = None,
        user_file: Optional[Path] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> RunConfig:
        """
        Build the RunConfig of one command.

        Args:
            preset: Preset name from the command line.
            user_file: Optional YAML file (for example an earlier run_config.yaml).
            overrides: Nested mapping built from command-line flags.

        Returns:
            Validated RunConfig.
        """
        user = self.load_yaml(user_file) if user_file else {}
        chosen = self.detect_preset(preset, user)
        preset_file = self.config_dir / "presets" / f"{chosen}.yaml"
        if not preset_file.exists():
            raise ConfigurationError(
                f"unknown preset '{chosen}' (available: {', '.join(self.available_presets())})"
            )

        merged = self.load_yaml(self.config_dir / "default.yaml")
        merged = deep_merge(merged, self.load_yaml(preset_file))
        merged = deep_merge(merged, user)
        merged = deep_merge(merged, overrides or {})
        merged["preset"] = chosen
        try:
            return RunConfig.model_validate(merged)
        except PydanticValidationError as e:
            raise ConfigurationError(f"invalid configuration: {_format_pydantic_error(e)}")


def write_run_config(config: RunConfig, out_dir: Path, filename: str = RUN_CONFIG_FILE) -> Path:
    """Serialize the resolved configuration next to the command's outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / filename
    with open(path, "w", encoding="utf-8") as f:
        f.write(config.to_yaml())
    return path
