"""Discrete-review control: review clock, QoS priority weights, slot-level
schedule realization, and safety-stock gating.

Everything here is a pure function of its inputs so control decisions replay
identically across runs with the same state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .network import ConfigError, ConstraintSet

QOS_KINDS = ("mean_delay", "hard_deadline")


@dataclass(frozen=True)
class QosSpec:
    """Per-flow QoS requirement.

    mean_delay: keep the empirical end-to-end mean delay at or below
        target_slots.
    hard_deadline: keep the fraction of packets delivered later than
        deadline_slots at or below drop_ratio_target (late packets are
        dropped at the destination).
    theta_hat is the priority weight applied while the requirement is
    violated; satisfied (or not yet measurable) flows weigh 1.
    """

    kind: str
    target_slots: float | None = None
    deadline_slots: int | None = None
    drop_ratio_target: float | None = None
    theta_hat: float = 2.0

    def __post_init__(self):
        if self.kind not in QOS_KINDS:
            raise ConfigError(f"qos.kind must be one of {QOS_KINDS}, got {self.kind!r}")
        if self.theta_hat <= 1.0:
            raise ConfigError(f"qos.theta_hat must be > 1, got {self.theta_hat}")
        if self.kind == "mean_delay":
            if self.target_slots is None or self.target_slots <= 0:
                raise ConfigError("qos: mean_delay requires target_slots > 0")
            if self.deadline_slots is not None or self.drop_ratio_target is not None:
                raise ConfigError("qos: mean_delay takes only target_slots")
        else:
            if self.deadline_slots is None or self.deadline_slots <= 0:
                raise ConfigError("qos: hard_deadline requires deadline_slots > 0")
            if self.drop_ratio_target is None or not 0 < self.drop_ratio_target < 1:
                raise ConfigError("qos: hard_deadline requires drop_ratio_target in (0, 1)")
            if self.target_slots is not None:
                raise ConfigError("qos: hard_deadline takes no target_slots")


@dataclass
class QosCounters:
    """Cumulative destination-side statistics of one flow."""

    delivered: int = 0
    delay_sum: int = 0
    late: int = 0

    def mean_delay(self) -> float | None:
        return self.delay_sum / self.delivered if self.delivered else None

    def late_fraction(self) -> float | None:
        return self.late / self.delivered if self.delivered else None


@dataclass(frozen=True)
class ReviewClock:
    """Review window [t_prev, t_rev) and the clock growth constants."""

    t_prev: int = 0
    t_rev: int = 0
    a1: float = 1.0
    a2: float = 1.0

    def advance(self, t: int, total_backlog: float) -> "ReviewClock":
        return ReviewClock(
            t_prev=t,
            t_rev=next_review_time(t, total_backlog, self.a1, self.a2),
            a1=self.a1,
            a2=self.a2,
        )


def next_review_time(t: int, total_backlog: float, a1: float = 1.0, a2: float = 1.0) -> int:
    """Next review slot: t + max(1, round(a1 * ln(1 + a2 * total backlog))).

    The period length grows logarithmically with the backlog; the floor of
    one slot keeps the clock moving when the network is empty.
    """
    if total_backlog < 0:
        raise ValueError(f"total backlog must be >= 0, got {total_backlog}")
    if a1 <= 0 or a2 <= 0:
        raise ValueError("review constants a1 and a2 must be > 0")
    length = int(math.floor(a1 * math.log1p(a2 * total_backlog) + 0.5))
    return t + max(1, length)


def update_qos_weights(
    specs: Mapping[int, QosSpec | None], counters: Mapping[int, QosCounters]
) -> dict[int, float]:
    """Priority weight per flow from destination statistics only.

    A flow weighs theta_hat while its requirement is strictly violated
    (empirical mean delay above target, or late fraction above the drop
    target). Flows without a requirement, or without any delivery yet,
    weigh 1.
    """
    out: dict[int, float] = {}
    for fid in sorted(specs):
        spec = specs[fid]
        c = counters.get(fid)
        if spec is None or c is None or c.delivered == 0:
            out[fid] = 1.0
        elif spec.kind == "mean_delay":
            out[fid] = spec.theta_hat if c.delay_sum / c.delivered > spec.target_slots else 1.0
        else:
            out[fid] = spec.theta_hat if c.late / c.delivered > spec.drop_ratio_target else 1.0
    return out


def safety_stock_gate(queue_len: int, safety_stock: int) -> bool:
    """A queue is eligible for service only strictly above its safety stock."""
    if queue_len < 0:
        raise ValueError(f"queue length must be >= 0, got {queue_len}")
    return queue_len > safety_stock


@dataclass(frozen=True)
class SlotSchedule:
    """Realized 0/1 activations for one review window.

    active_by_offset[t - t_start] lists the active coordinates of slot t in
    ascending order. assigned and quota are per coordinate.
    """

    t_start: int
    window: int
    active_by_offset: tuple[tuple[int, ...], ...]
    assigned: tuple[int, ...]
    quota: tuple[int, ...]

    def is_active(self, k: int, t: int) -> bool:
        off = t - self.t_start
        return 0 <= off < self.window and k in self.active_by_offset[off]

    def count_violations(self, constraints: ConstraintSet) -> int:
        """Exhaustive exclusivity check; 0 for any schedule built here."""
        bad = 0
        for active in self.active_by_offset:
            seen: set[int] = set()
            for k in active:
                ids = set(constraints.memberships[k])
                if seen & ids:
                    bad += 1
                seen |= ids
        return bad


def build_slot_schedule(
    s, t_start: int, window: int, constraints: ConstraintSet
) -> SlotSchedule:
    """Greedily realize the time fractions as conflict-free slot activations.

    Coordinates are visited in index order (node, then link, then flow); each
    claims the earliest slots that conflict with nothing already assigned,
    up to its quota. The quota is floor(s_k * window), plus one slot when the
    fractional remainder exceeds one half.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1 slot, got {window}")
    s = np.asarray(s, dtype=float)
    n = constraints.n_coords
    if len(s) != n:
        raise ValueError(f"schedule vector has {len(s)} coordinates, constraints {n}")

    quota = []
    for k in range(n):
        target = float(s[k]) * window
        q = int(math.floor(target))
        if target - q > 0.5:
            q += 1
        quota.append(q)

    masks = []
    for k in range(n):
        m = 0
        for hid in constraints.memberships[k]:
            m |= 1 << hid
        masks.append(m)

    busy = [0] * window
    active: list[list[int]] = [[] for _ in range(window)]
    assigned = [0] * n
    for k in range(n):
        need = quota[k]
        if need <= 0:
            continue
        mk = masks[k]
        got = 0
        for off in range(window):
            if busy[off] & mk:
                continue
            busy[off] |= mk
            active[off].append(k)
            got += 1
            if got == need:
                break
        assigned[k] = got

    return SlotSchedule(
        t_start=t_start,
        window=window,
        active_by_offset=tuple(tuple(a) for a in active),
        assigned=tuple(assigned),
        quota=tuple(quota),
    )
