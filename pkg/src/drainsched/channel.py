"""Per-review-period channel gains and link rates.

Gains are redrawn once per review period (slow fading within a period).
The default model draws a Rayleigh amplitude with scale c / d^2 for a link
of length d and squares it to get the power gain; a fixed-gain mode exists
for deterministic-rate experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import ConfigError, Link, NetworkSpec

CHANNEL_STREAM = 0  # seed-sequence domain tag for channel draws


@dataclass(frozen=True)
class ChannelState:
    """Power gains per link, constant within one review period."""

    gains: dict[Link, float]
    drawn_at: int


@dataclass(frozen=True)
class RateTable:
    """Link rates in bits/slot derived from one ChannelState."""

    rates: dict[Link, float]
    tx_power: float
    noise: float


def draw_gains(
    spec: NetworkSpec, period: int, seed: int, scale_constant: float = 1.0
) -> ChannelState:
    """Draw i.i.d. Rayleigh-amplitude power gains for every link.

    The amplitude scale of link (i, j) is scale_constant / d_ij^2. Draws are
    a pure function of (seed, period, declared link order): the same call
    always returns the same gains, and different periods use independent
    substreams regardless of how many periods were drawn before.
    """
    if scale_constant <= 0:
        raise ConfigError(f"channel scale constant must be > 0, got {scale_constant}")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(CHANNEL_STREAM, period))
    )
    scales = np.array([scale_constant / spec.distance(l) ** 2 for l in spec.links])
    amps = rng.rayleigh(scale=scales) if len(spec.links) else np.zeros(0)
    gains = {link: float(a * a) for link, a in zip(spec.links, amps)}
    return ChannelState(gains=gains, drawn_at=period)


def fixed_gains(spec: NetworkSpec, period: int, gain: float) -> ChannelState:
    """Constant-gain channel, for controlled experiments."""
    if gain < 0:
        raise ConfigError(f"fixed gain must be >= 0, got {gain}")
    return ChannelState(gains={link: float(gain) for link in spec.links}, drawn_at=period)


def compute_rate(gain: float, power: float = 1.0, noise: float = 1.0, base: str = "e") -> float:
    """Shannon-style rate log(1 + gain * power / noise), natural log by default."""
    if gain < 0:
        raise ValueError(f"gain must be >= 0, got {gain}")
    if power <= 0:
        raise ValueError(f"power must be > 0, got {power}")
    if noise <= 0:
        raise ValueError(f"noise must be > 0, got {noise}")
    rate = math.log1p(gain * power / noise)
    if base == "2":
        rate /= math.log(2.0)
    elif base != "e":
        raise ValueError(f"log base must be 'e' or '2', got {base!r}")
    return rate


def rate_table(
    state: ChannelState, power: float = 1.0, noise: float = 1.0, base: str = "e"
) -> RateTable:
    rates = {link: compute_rate(g, power, noise, base) for link, g in state.gains.items()}
    return RateTable(rates=rates, tx_power=power, noise=noise)
