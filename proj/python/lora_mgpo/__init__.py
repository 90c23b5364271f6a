"""LoRA adapters with momentum-guided perturbation training."""

from ._mgpo import (
    LoraLinear,
    LossKind,
    Matrix,
    MlpModel,
    Rng,
    config_hash_text,
    forward_loss,
    gradients,
    lora_init,
    make_model,
    preset_names,
    preset_text,
    rebound_metric,
    smooth,
    train,
)

__all__ = [
    "LoraLinear",
    "LossKind",
    "Matrix",
    "MlpModel",
    "Rng",
    "config_hash_text",
    "forward_loss",
    "gradients",
    "lora_init",
    "make_model",
    "preset_names",
    "preset_text",
    "rebound_metric",
    "smooth",
    "train",
]
