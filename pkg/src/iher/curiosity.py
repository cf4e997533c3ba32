"""Ensemble-disagreement intrinsic rewards."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import EnsembleModel, predict_all


@dataclass(frozen=True)
class CuriosityConfig:
    scale: float = 0.5
    clip: float = 0.8
    # "normalized" measures disagreement on normalized deltas, "raw" on next states
    space: str = "normalized"

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("intrinsic reward scale must be non-negative")
        if self.clip <= 0:
            raise ValueError("intrinsic reward clip must be positive")
        if self.space not in ("normalized", "raw"):
            raise ValueError("space must be 'normalized' or 'raw'")


def ensemble_variance(ensemble: EnsembleModel, state, action, space="normalized"):
    """Per-dimension population variance across members, averaged over dimensions.

    Returns one value per row of ``state``.
    """
    ensemble._check_trained()
    if space == "raw":
        preds = predict_all(ensemble, state, action)
    else:
        preds = ensemble.member_outputs(state, action)
    return preds.var(axis=0).mean(axis=-1)


def intrinsic_reward(sigma, config: CuriosityConfig):
    return np.clip(config.scale * np.asarray(sigma, dtype=np.float64), 0.0, config.clip)


def augment_batch_rewards(batch, ensemble, config: CuriosityConfig):
    """Return ``(batch_with_total_rewards, intrinsic_rewards)``.

    The input batch (and any buffer it was sampled from) is left untouched.
    """
    if config.scale == 0:
        return replace(batch), np.zeros(len(batch))
    r_i = intrinsic_reward(ensemble_variance(ensemble, batch.obs, batch.actions, config.space), config)
    return replace(batch, rewards=batch.rewards + r_i), r_i
