"""Non-learning sampling policies and the greedy Q-network policy.

All policies share one protocol: `reset(rng)` at episode start, then
`act(obs, epoch, mask, num_actions)` returning one action per sensor
(None where the mask forbids deciding). The non-learning baselines only
make sense in binary action mode.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .env import OBS_SLOPE, OBS_TIME, SAMPLE, SKIP
from .errors import ConfigError


class FixedPolicy:
    """Sample every `period` epochs (epoch 0, period, 2*period, ...)."""

    def __init__(self, period: int):
        if period < 1:
            raise ConfigError("fixed policy period must be >= 1")
        self.period = period
        self.name = f"fixed({period})"

    def reset(self, rng) -> None:
        pass

    def act(self, obs, epoch, mask, num_actions):
        want = SAMPLE if epoch % self.period == 0 else SKIP
        return [want if m else None for m in mask]


class RandomPolicy:
    """Sample each sensor independently with probability q."""

    def __init__(self, q: float):
        if not 0.0 <= q <= 1.0:
            raise ConfigError("random policy rate must lie in [0, 1]")
        self.q = q
        self.name = f"random({q:g})"
        self._rng = np.random.default_rng(0)

    def reset(self, rng) -> None:
        self._rng = rng

    def act(self, obs, epoch, mask, num_actions):
        draws = self._rng.random(len(mask))
        return [
            (SAMPLE if d < self.q else SKIP) if m else None for m, d in zip(mask, draws)
        ]


class ThresholdPolicy:
    """Prediction-drift trigger on agent-visible features.

    Samples when |EWMA slope| x epochs-since-last-sample exceeds the
    threshold. The slope feature is zero until two samples exist, so the
    trigger alone can never start; a probe cap (sample at least every
    `probe_cap` epochs) keeps the policy live.
    """

    def __init__(self, threshold: float, probe_cap: int = 12, horizon: int = 200):
        if threshold < 0 or probe_cap < 1:
            raise ConfigError("threshold policy needs threshold >= 0 and probe_cap >= 1")
        self.threshold = threshold
        self.probe_cap = probe_cap
        self.horizon = horizon
        self.name = f"threshold({threshold:g})"

    def reset(self, rng) -> None:
        pass

    def act(self, obs, epoch, mask, num_actions):
        actions = []
        for i, m in enumerate(mask):
            if not m:
                actions.append(None)
                continue
            gap = obs[i, OBS_TIME] * self.horizon
            drift = abs(obs[i, OBS_SLOPE]) * gap
            actions.append(SAMPLE if drift > self.threshold or gap >= self.probe_cap else SKIP)
        return actions


class GreedyQPolicy:
    """Argmax over a frozen Q-network (evaluation-time policy)."""

    def __init__(self, params: nn.NetworkParams, name: str = "dqn"):
        self.params = params
        self.name = name

    def reset(self, rng) -> None:
        pass

    def act(self, obs, epoch, mask, num_actions):
        q = nn.forward_batch(self.params, obs)
        return [int(np.argmax(q[i])) if m else None for i, m in enumerate(mask)]


def baseline_policy(kind: str, params: dict):
    """Factory for the comparison-table baselines."""
    if kind == "fixed":
        return FixedPolicy(int(params.get("period", 1)))
    if kind == "random":
        return RandomPolicy(float(params.get("q", 0.25)))
    if kind == "threshold":
        return ThresholdPolicy(
            float(params.get("threshold", 0.15)),
            int(params.get("probe_cap", 12)),
            int(params.get("horizon", 200)),
        )
    raise ConfigError(f"unknown baseline kind {kind!r}")
