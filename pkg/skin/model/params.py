"""
SkIn - Model Parameters
Both encoders plus the SaA, previous-classification and output heads.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from ..encoder import EncoderConfig, EncoderParams, load_checkpoint, save_checkpoint
from ..errors import CheckpointError, ContractError, DimensionError
from ..ndtensor import Tensor

HEAD_INIT_STD = 0.02

# Parameter groups by training stage.
STAGE1_HEADS = ("w_a.weight", "w_op.weight", "w_op.bias")
STAGE3_HEADS = ("w_a.weight", "w_o.weight", "w_o.bias")


@dataclass
class SkinParams:
    """All trainable tensors of the SkIn pipeline."""
    lite: EncoderParams
    strong: EncoderParams
    w_a: Tensor       # [1×d_g]
    w_op: Tensor      # [U×d_g]
    b_op: Tensor      # [U]
    w_o: Tensor       # [U×(d_l+d_g)]
    b_o: Tensor       # [U]
    mask_padding: bool = False

    @property
    def num_classes(self) -> int:
        return self.b_o.shape[0]

    @property
    def d_g(self) -> int:
        return self.lite.config.dim

    @property
    def d_l(self) -> int:
        return self.strong.config.dim

    @classmethod
    def initialize(
        cls,
        lite: EncoderConfig,
        strong: EncoderConfig,
        num_classes: int,
        rng: np.random.Generator,
        mask_padding: bool = False,
    ) -> "SkinParams":
        lite_params = EncoderParams.initialize(lite, rng)
        strong_params = EncoderParams.initialize(strong, rng)
        d_g, d_l = lite.dim, strong.dim
        return cls(
            lite=lite_params,
            strong=strong_params,
            # zero scores: skimming starts as a plain average over segments
            w_a=Tensor(np.zeros((1, d_g)), name="w_a.weight"),
            w_op=Tensor(rng.normal(0.0, HEAD_INIT_STD, (num_classes, d_g)), name="w_op.weight"),
            b_op=Tensor(np.zeros(num_classes), name="w_op.bias"),
            w_o=Tensor(rng.normal(0.0, HEAD_INIT_STD, (num_classes, d_l + d_g)), name="w_o.weight"),
            b_o=Tensor(np.zeros(num_classes), name="w_o.bias"),
            mask_padding=mask_padding,
        )

    def heads(self) -> Dict[str, Tensor]:
        return {
            "w_a.weight": self.w_a,
            "w_op.weight": self.w_op,
            "w_op.bias": self.b_op,
            "w_o.weight": self.w_o,
            "w_o.bias": self.b_o,
        }

    def named(self) -> Dict[str, Tensor]:
        named = self.lite.named("lite.")
        named.update(self.strong.named("strong."))
        named.update(self.heads())
        return named

    def stage1_params(self) -> Dict[str, Tensor]:
        """Lite encoder, W_a, W_op, b_op."""
        group = self.lite.named("lite.")
        group.update({k: v for k, v in self.heads().items() if k in STAGE1_HEADS})
        return group

    def stage3_params(self) -> Dict[str, Tensor]:
        """Lite encoder, W_a, strong encoder, W_o, b_o."""
        group = self.lite.named("lite.")
        group.update(self.strong.named("strong."))
        group.update({k: v for k, v in self.heads().items() if k in STAGE3_HEADS})
        return group

    def zero_grad(self) -> None:
        for tensor in self.named().values():
            tensor.zero_grad()

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data for name, t in self.named().items()}

    def manifest(self) -> Dict[str, Any]:
        return {
            "lite": self.lite.config.to_dict(),
            "strong": self.strong.config.to_dict(),
            "num_classes": self.num_classes,
            "mask_padding": self.mask_padding,
        }

    @classmethod
    def from_arrays(cls, manifest: Dict[str, Any], arrays: Dict[str, np.ndarray]) -> "SkinParams":
        try:
            lite_cfg = EncoderConfig.from_dict(manifest["lite"])
            strong_cfg = EncoderConfig.from_dict(manifest["strong"])
        except (KeyError, TypeError) as e:
            raise CheckpointError(f"checkpoint manifest lacks encoder configs ({e})")

        def take(prefix: str) -> Dict[str, Tensor]:
            return {
                name[len(prefix):]: Tensor(arr, name=name[len(prefix):])
                for name, arr in arrays.items() if name.startswith(prefix)
            }

        heads = {n: Tensor(arrays[n], name=n) for n in
                 ("w_a.weight", "w_op.weight", "w_op.bias", "w_o.weight", "w_o.bias")
                 if n in arrays}
        if len(heads) != 5:
            raise CheckpointError("checkpoint lacks head parameters")
        try:
            return cls(
                lite=EncoderParams(lite_cfg, take("lite.")),
                strong=EncoderParams(strong_cfg, take("strong.")),
                w_a=heads["w_a.weight"],
                w_op=heads["w_op.weight"],
                b_op=heads["w_op.bias"],
                w_o=heads["w_o.weight"],
                b_o=heads["w_o.bias"],
                mask_padding=bool(manifest.get("mask_padding", False)),
            )
        except (ContractError, DimensionError) as e:
            raise CheckpointError(str(e))


def save_skin(
    stem: Path,
    params: SkinParams,
    kind: str,
    extra_arrays: Optional[Dict[str, np.ndarray]] = None,
    extra_manifest: Optional[Dict[str, Any]] = None,
) -> None:
    """Save a SkIn (or PrC-SaA) checkpoint with optional training state."""
    arrays = dict(params.arrays())
    arrays.update(extra_arrays or {})
    manifest = {"model": params.manifest()}
    manifest.update(extra_manifest or {})
    save_checkpoint(stem, kind, arrays, manifest)


def load_skin(stem: Path, kind: Optional[str] = None):
    """
    Load a checkpoint written by `save_skin`.

    Returns:
        (params, manifest, leftover arrays such as optimizer state).
    """
    manifest, arrays = load_checkpoint(stem, expected_kind=kind)
    if "model" not in manifest:
        raise CheckpointError(f"{stem}: not a SkIn checkpoint")
    model_arrays = {k: v for k, v in arrays.items() if not k.startswith("adam.")}
    rest = {k: v for k, v in arrays.items() if k.startswith("adam.")}
    return SkinParams.from_arrays(manifest["model"], model_arrays), manifest, rest
