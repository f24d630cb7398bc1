"""
Checkpoint directories.

Layout:
    params.pt        header (format, scheme, model config, task head, vocab hash),
                     shape manifest and named tensors
    train_state.pt   step counters, optimizer moments, RNG states, recent metrics
    config.json      snapshot of the run configuration
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import torch
from torch import nn

from core.logging_config import get_logger
from segalm.errors import SchemeMismatch
from segalm.model.embeddings import PositionScheme
from segalm.model.modeling import ModelConfig

logger = get_logger(__name__)

PARAMS_FILE = "params.pt"
TRAIN_STATE_FILE = "train_state.pt"
CONFIG_FILE = "config.json"
FORMAT = "segalm-params"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """A loaded checkpoint directory."""

    path: Path
    header: Dict[str, Any]
    manifest: Dict[str, List[int]]
    tensors: Dict[str, torch.Tensor]
    train_state: Optional[Dict[str, Any]] = None
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def scheme(self) -> PositionScheme:
        return PositionScheme(self.header["scheme"])

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.header["model_config"])

    @property
    def head(self) -> str:
        return self.header.get("head", "mlm")

    def encoder_tensors(self) -> Dict[str, torch.Tensor]:
        """Tensors under the `model.` prefix, keyed without it."""
        prefix = "model."
        return {k[len(prefix):]: v for k, v in self.tensors.items() if k.startswith(prefix)}


def parameter_manifest(model: nn.Module) -> Dict[str, List[int]]:
    """Name -> shape of every tensor in the model's state dict."""
    return {name: list(tensor.shape) for name, tensor in model.state_dict().items()}


def save_checkpoint(
    directory: Union[str, Path],
    model: nn.Module,
    model_config: ModelConfig,
    head: str = "mlm",
    vocab_hash: Optional[str] = None,
    train_state: Optional[Dict[str, Any]] = None,
    config_snapshot: Optional[Dict[str, Any]] = None,
    extra_header: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write a checkpoint directory.

    Args:
        directory: Target directory (created if missing)
        model: Model whose state dict is saved
        model_config: Architecture, stored in the header
        head: Which head the tensors include (mlm, classification, regression, span)
        vocab_hash: Fingerprint of the vocab used in training
        train_state: Optional trainer state (optimizer moments, RNG states, step)
        config_snapshot: Run configuration written as config.json
        extra_header: Additional header fields

    Returns:
        The checkpoint directory
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "scheme": model_config.scheme.value,
        "model_config": model_config.to_dict(),
        "head": head,
        "vocab_hash": vocab_hash,
    }
    if extra_header:
        header.update(extra_header)

    state = {k: v.detach().cpu() for k, v in model.state_dict().items()}
    torch.save(
        {"header": header, "manifest": parameter_manifest(model), "tensors": state},
        directory / PARAMS_FILE,
    )
    if train_state is not None:
        torch.save(train_state, directory / TRAIN_STATE_FILE)
    if config_snapshot is not None:
        (directory / CONFIG_FILE).write_text(json.dumps(config_snapshot, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"💾 Checkpoint saved to {directory} (scheme={header['scheme']}, head={head})")
    return directory


def load_checkpoint(
    directory: Union[str, Path],
    expected_scheme: Optional[Union[str, PositionScheme]] = None,
    with_train_state: bool = True,
) -> Checkpoint:
    """
    Load a checkpoint directory.

    Args:
        directory: Checkpoint directory
        expected_scheme: Scheme the caller intends to use; checked against the header
        with_train_state: Also load train_state.pt when present

    Returns:
        Checkpoint

    Raises:
        FileNotFoundError: If params.pt is missing
        SchemeMismatch: If expected_scheme differs from the stored scheme
        ValueError: If the manifest disagrees with the stored tensors
    """
    directory = Path(directory)
    payload = torch.load(directory / PARAMS_FILE, map_location="cpu", weights_only=False)
    header = payload["header"]
    if header.get("format") != FORMAT:
        raise ValueError(f"{directory / PARAMS_FILE} is not a {FORMAT} file")

    if expected_scheme is not None and PositionScheme(expected_scheme) != PositionScheme(header["scheme"]):
        raise SchemeMismatch(header["scheme"], PositionScheme(expected_scheme).value)

    manifest = payload["manifest"]
    tensors = payload["tensors"]
    for name, shape in manifest.items():
        if name not in tensors or list(tensors[name].shape) != list(shape):
            raise ValueError(f"Checkpoint tensor {name} does not match its manifest shape {shape}")

    train_state = None
    state_path = directory / TRAIN_STATE_FILE
    if with_train_state and state_path.exists():
        train_state = torch.load(state_path, map_location="cpu", weights_only=False)

    config: Dict[str, Any] = {}
    config_path = directory / CONFIG_FILE
    if config_path.exists():
        config = json.loads(config_path.read_text(encoding="utf-8"))

    return Checkpoint(directory, header, manifest, tensors, train_state, config)
