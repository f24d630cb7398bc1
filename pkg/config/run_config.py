"""
Declarative run configuration.

A config file is a flat `key=value` text file (dotenv syntax). Keys are
RunConfig field names; blank lines and `#` comments are ignored:

    scheme=sega
    preset=toy
    total_steps=2000
    vocab_path=data/vocab.txt

Command-line flags override file values.
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Set, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from segalm.errors import ConfigError
from segalm.model.embeddings import PositionScheme
from segalm.model.encoder import PRESETS, EncoderConfig
from segalm.model.modeling import ModelConfig
from segalm.text.segmenter import SegmentCaps
from segalm.training.masking import MaskingPolicy

TASKS = ("classification", "regression", "span")


class RunConfig(BaseModel):
    """Every parameter of a segment / pretrain / finetune / gradcheck / probe run."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Model
    scheme: PositionScheme = PositionScheme.SEGA
    preset: str = "toy"
    layers: Optional[int] = Field(default=None, ge=1)
    hidden: Optional[int] = Field(default=None, ge=1)
    heads: Optional[int] = Field(default=None, ge=1)
    ffn_width: Optional[int] = Field(default=None, ge=1)
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)

    # Index tables and packing
    max_paragraphs: int = Field(default=50, ge=1)
    max_sentences: int = Field(default=100, ge=1)
    max_tokens_per_sentence: int = Field(default=256, ge=1)
    max_len: int = Field(default=128, ge=3, le=512)

    # Paths
    vocab_path: Optional[str] = None
    examples_path: Optional[str] = None
    out_dir: str = "runs/default"

    # Reproducibility
    seed: int = Field(default=0, ge=0)
    deterministic: bool = False

    # Pretraining
    total_steps: int = Field(default=1000, ge=0)
    batch_size: int = Field(default=32, ge=1)
    peak_lr: float = Field(default=1e-4, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    clip_norm: float = Field(default=1.0, ge=0.0)
    warmup_fraction: float = Field(default=0.01, ge=0.0, le=1.0)
    checkpoint_every: int = Field(default=500, ge=1)
    log_every: int = Field(default=50, ge=1)
    eval_fraction: float = Field(default=0.05, ge=0.0, lt=1.0)

    # Masking
    select_prob: float = Field(default=0.15, ge=0.0, le=1.0)
    mask_prob: float = Field(default=0.8, ge=0.0, le=1.0)
    random_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    keep_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    force_one: bool = True

    # Fine-tuning
    task: str = "classification"
    train_path: Optional[str] = None
    dev_path: Optional[str] = None
    checkpoint_path: Optional[str] = None
    ft_lr: Optional[float] = Field(default=None, gt=0.0)
    ft_batch_size: Optional[int] = Field(default=None, ge=1)
    ft_epochs: Optional[int] = Field(default=None, ge=1)
    ft_warmup_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    max_answer_len: int = Field(default=30, ge=0)
    max_query_len: int = Field(default=64, ge=1)

    # Probe
    probe_layer: int = -1
    probe_max_tokens: int = Field(default=20000, ge=10)

    @model_validator(mode="after")
    def _cross_field(self) -> "RunConfig":
        problems = cross_field_problems(dict(self))
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig.preset(
            self.preset,
            layers=self.layers,
            hidden=self.hidden,
            heads=self.heads,
            ffn_width=self.ffn_width,
            dropout=self.dropout,
        )

    def caps(self) -> SegmentCaps:
        return SegmentCaps(self.max_paragraphs, self.max_sentences, self.max_tokens_per_sentence)

    def model_config_for(self, vocab_size: int) -> ModelConfig:
        """Architecture for a vocab of the given size."""
        return ModelConfig(
            vocab_size=vocab_size,
            encoder=self.encoder_config(),
            scheme=self.scheme,
            caps=self.caps(),
        )

    def masking_policy(self) -> MaskingPolicy:
        return MaskingPolicy(self.select_prob, self.mask_prob, self.random_prob, self.keep_prob, self.force_one)

    def snapshot(self) -> Dict[str, Any]:
        """JSON-serializable dump of every field."""
        return json.loads(self.model_dump_json())

    def write_snapshot(self, directory: Union[str, Path]) -> Path:
        """Write config.json into a run directory."""
        path = Path(directory) / "config.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.snapshot(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def cross_field_problems(values: Mapping[str, Any]) -> List[str]:
    """
    Checks that involve more than one field.

    A check is skipped when one of its fields is missing from values, so it
    can run on a partially valid set.
    """
    problems: List[str] = []
    preset = values.get("preset")
    if preset is not None:
        if preset.lower() not in PRESETS:
            problems.append(f"preset: unknown preset {preset!r}, choose from {sorted(PRESETS)}")
        elif "hidden" in values and "heads" in values:
            base = PRESETS[preset.lower()]
            hidden = values["hidden"] or base["hidden"]
            heads = values["heads"] or base["heads"]
            if hidden % heads:
                problems.append(f"heads: hidden ({hidden}) must be divisible by heads ({heads})")
    split = [values.get(name) for name in ("mask_prob", "random_prob", "keep_prob")]
    if None not in split and abs(sum(split) - 1.0) > 1e-9:
        problems.append(f"mask_prob: mask_prob + random_prob + keep_prob must be 1, got {sum(split)}")
    task = values.get("task")
    if task is not None and task not in TASKS:
        problems.append(f"task: must be one of {list(TASKS)}, got {task!r}")
    if task == "span" and "max_len" in values and "max_query_len" in values:
        # [CLS] question [SEP] context [SEP] needs at least one context slot
        if values["max_query_len"] > values["max_len"] - 4:
            problems.append(
                f"max_query_len: must be at most max_len - 4 ({values['max_len'] - 4}) for span tasks, "
                f"got {values['max_query_len']}"
            )
    return problems


def _valid_fields(values: Mapping[str, Any], failed: Set[str]) -> Dict[str, Any]:
    """Typed values of every field that did not fail, defaults filled in."""
    typed: Dict[str, Any] = {}
    for name, info in RunConfig.model_fields.items():
        if name in failed:
            continue
        if name not in values:
            typed[name] = info.default
            continue
        try:
            typed[name] = TypeAdapter(info.annotation).validate_python(values[name])
        except ValidationError:
            continue
    return typed


def _describe(error: Dict[str, Any]) -> str:
    location = ".".join(str(part) for part in error.get("loc", ()))
    message = error.get("msg", "invalid value")
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]
    return f"{location}: {message}" if location else message


def validate_run_config(values: Mapping[str, Any]) -> RunConfig:
    """
    Validate raw values into a RunConfig.

    Raises:
        ConfigError: Listing every violation found
    """
    values = dict(values)
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        violations: List[str] = []
        failed: Set[str] = set()
        for error in e.errors():
            if error.get("loc"):
                failed.add(str(error["loc"][0]))
            violations.extend(part.strip() for part in _describe(error).split("; "))
        # Pydantic skips the model validator once a field fails
        if failed:
            violations.extend(cross_field_problems(_valid_fields(values, failed)))
        raise ConfigError(violations) from e


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Load a config file and apply overrides.

    Args:
        path: key=value config file; defaults only when None
        overrides: Field values that win over the file (None values are ignored)

    Returns:
        Validated RunConfig

    Raises:
        FileNotFoundError: If path does not exist
        ConfigError: Listing every violation found
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file not found: {path}")
        values.update({k.strip().lower(): v for k, v in dotenv_values(path).items() if v is not None})
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return validate_run_config(values)


def load_snapshot(path: Union[str, Path]) -> RunConfig:
    """Re-create the RunConfig stored in a run directory's config.json."""
    path = Path(path)
    if path.is_dir():
        path = path / "config.json"
    return validate_run_config(json.loads(path.read_text(encoding="utf-8")))
