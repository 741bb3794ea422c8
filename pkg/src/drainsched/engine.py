"""Slotted packet-level simulation.

Each slot runs three phases in a fixed order: review (only on review slots:
redraw the channel, recompute priority weights, solve the schedule
optimization, build the slot schedule for the next window), exogenous
arrivals, then service. Packets are one bit; a scheduled link moves up to
floor(rate) head-of-line packets per slot, never taking a queue below its
safety stock. Queue entries store only the packet's creation slot; the flow
and current node are the queue's key.

With invariant checking enabled the engine verifies, every slot, the exact
queue bookkeeping identity (arrivals + receptions - transmissions), the
global packet-count identity, and interference exclusivity of the links that
actually transmitted.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from itertools import repeat

import numpy as np

from . import channel as chan
from .config import SimConfig
from .control import QosCounters, build_slot_schedule, next_review_time, update_qos_weights
from .network import build_constraints, build_link_flow_index
from .optim import WeightVector, objective, solve_review_optimization
from .oracle import oracle_solve

ARRIVAL_STREAM = 1  # seed-sequence domain tag, disjoint from the channel tag
ORACLE_DIAG_MAX_COORDS = 8  # per-review oracle gaps only for small coordinate spaces


@dataclass
class FlowMetrics:
    created: int = 0
    delivered: int = 0
    on_time: int = 0
    late: int = 0
    delay_sum: int = 0
    mean_delay: float | None = None
    drop_ratio: float | None = None
    histogram: dict[int, int] = field(default_factory=dict)


@dataclass
class PeriodRecord:
    start: int
    window: int
    objective: float
    objective_trace: tuple[float, ...]
    c2: float
    c3: float
    handoff_messages: int
    excess_broadcasts: int
    theta: dict[int, float]
    oracle_gap: float | None = None


@dataclass
class MetricsReport:
    seed: int
    horizon: int
    flows: dict[int, FlowMetrics]
    queue_avg: dict[tuple[int, int], float]
    periods: list[PeriodRecord]
    conservation_violations: int = 0
    interference_violations: int = 0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "flows": {
                str(fid): {
                    "created": fm.created,
                    "delivered": fm.delivered,
                    "on_time": fm.on_time,
                    "late": fm.late,
                    "delay_sum": fm.delay_sum,
                    "mean_delay": fm.mean_delay,
                    "drop_ratio": fm.drop_ratio,
                    "histogram": {str(d): c for d, c in sorted(fm.histogram.items())},
                }
                for fid, fm in sorted(self.flows.items())
            },
            "queue_avg": {f"{i}:{f}": v for (i, f), v in sorted(self.queue_avg.items())},
            "periods": [
                {
                    "start": p.start,
                    "window": p.window,
                    "objective": p.objective,
                    "objective_trace": list(p.objective_trace),
                    "c2": p.c2,
                    "c3": p.c3,
                    "handoff_messages": p.handoff_messages,
                    "excess_broadcasts": p.excess_broadcasts,
                    "theta": {str(fid): th for fid, th in sorted(p.theta.items())},
                    "oracle_gap": p.oracle_gap,
                }
                for p in self.periods
            ],
            "conservation_violations": self.conservation_violations,
            "interference_violations": self.interference_violations,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        flows = {}
        for fid, fm in data["flows"].items():
            flows[int(fid)] = FlowMetrics(
                created=fm["created"],
                delivered=fm["delivered"],
                on_time=fm["on_time"],
                late=fm["late"],
                delay_sum=fm["delay_sum"],
                mean_delay=fm["mean_delay"],
                drop_ratio=fm["drop_ratio"],
                histogram={int(d): c for d, c in fm["histogram"].items()},
            )
        queue_avg = {}
        for key, v in data["queue_avg"].items():
            i, f = key.split(":")
            queue_avg[(int(i), int(f))] = v
        periods = [
            PeriodRecord(
                start=p["start"],
                window=p["window"],
                objective=p["objective"],
                objective_trace=tuple(p["objective_trace"]),
                c2=p["c2"],
                c3=p["c3"],
                handoff_messages=p["handoff_messages"],
                excess_broadcasts=p["excess_broadcasts"],
                theta={int(fid): th for fid, th in p["theta"].items()},
                oracle_gap=p["oracle_gap"],
            )
            for p in data["periods"]
        ]
        return cls(
            seed=data["seed"],
            horizon=data["horizon"],
            flows=flows,
            queue_avg=queue_avg,
            periods=periods,
            conservation_violations=data["conservation_violations"],
            interference_violations=data["interference_violations"],
        )


def flow_statistics(report: MetricsReport, flow_id: int) -> tuple[float | None, float | None]:
    """(mean delay, drop ratio) of one flow; None marks zero deliveries."""
    if flow_id not in report.flows:
        raise KeyError(f"unknown flow {flow_id}")
    fm = report.flows[flow_id]
    return fm.mean_delay, fm.drop_ratio


class Simulation:
    """One simulation run; construct per (config, seed, horizon) and run once."""

    def __init__(
        self,
        config: SimConfig,
        seed: int,
        horizon: int | None = None,
        check_invariants: bool = False,
        collect_periods: bool = True,
        oracle_diagnostics: bool = False,
        trace_file=None,
    ):
        self.config = config
        self.seed = int(seed)
        self.horizon = config.run.horizon_slots if horizon is None else int(horizon)
        self._check = check_invariants
        self._collect = collect_periods
        self._oracle_diag = oracle_diagnostics
        self._trace_file = trace_file

        net = config.network
        self.net = net
        self.idx = build_link_flow_index(net)
        self.constraints = build_constraints(self.idx, net)
        nk = self.idx.n_coords

        self._qkeys = sorted({(i, f) for (i, j, f) in self.idx.entries})
        qpos = {key: qi for qi, key in enumerate(self._qkeys)}
        self._qidx_of = [qpos[(i, f)] for (i, j, f) in self.idx.entries]
        self._f_of = [f for (_, _, f) in self.idx.entries]
        self._link_of = [(i, j) for (i, j, _) in self.idx.entries]
        self._deliver = [j == f for (_, j, f) in self.idx.entries]
        self._rxq_of = [
            -1 if j == f else qpos[(j, f)] for (i, j, f) in self.idx.entries
        ]
        self._coord_mask = []
        for k in range(nk):
            m = 0
            for hid in self.constraints.memberships[k]:
                m |= 1 << hid
            self._coord_mask.append(m)

        nq = len(self._qkeys)
        self._queues: list[deque[int]] = [deque() for _ in range(nq)]
        self._qlen = [0] * nq
        self._qsum = [0] * nq
        self._arr_cum = [0] * nq
        self._rx_cum = [0] * nq
        self._tx_cum = [0] * nq

        self._flow_ids = net.flow_ids
        self._counters = {fid: QosCounters() for fid in self._flow_ids}
        self._hist: dict[int, dict[int, int]] = {fid: {} for fid in self._flow_ids}
        self._created = {fid: 0 for fid in self._flow_ids}
        self._qspecs = {fid: net.qos_of(fid) for fid in self._flow_ids}
        self._deadline = {
            fid: (spec.deadline_slots if spec and spec.kind == "hard_deadline" else None)
            for fid, spec in self._qspecs.items()
        }
        self._theta_hat_max = max(
            [spec.theta_hat for spec in self._qspecs.values() if spec is not None],
            default=1.0,
        )

        # Pregenerated Poisson arrivals, one independent substream per
        # (source, destination) arrival stream in sorted order.
        self._streams: list[tuple[int, int, np.ndarray]] = []
        for si, fl in enumerate(sorted(net.flows, key=lambda fl: (fl.source, fl.destination))):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self.seed, spawn_key=(ARRIVAL_STREAM, si))
            )
            counts = (
                rng.poisson(fl.arrival_rate, self.horizon)
                if self.horizon and fl.arrival_rate > 0
                else np.zeros(self.horizon, dtype=np.int64)
            )
            self._streams.append((qpos[(fl.source, fl.destination)], fl.destination, counts))

        self._qbar = config.control.safety_stock_pkts
        self._mu = [0.0] * nk
        self._fmu = [0] * nk
        self.t = 0
        self.t_prev = 0
        self.t_rev = 0
        self._period_count = 0
        self._slots: tuple[tuple[int, ...], ...] = ((),)
        self.periods: list[PeriodRecord] = []
        self.conservation_violations = 0
        self.interference_violations = 0

    def inject(self, node: int, flow_id: int, created_slots) -> None:
        """Place packets directly into queue (node, flow); debugging helper.

        Injected packets count as exogenous arrivals for the conservation
        bookkeeping.
        """
        qi = self._qkeys.index((node, flow_id))
        created = [int(c) for c in created_slots]
        self._queues[qi].extend(created)
        self._qlen[qi] += len(created)
        self._arr_cum[qi] += len(created)
        self._created[flow_id] += len(created)

    # -- per-slot dynamics --------------------------------------------------

    def _review(self, t: int) -> None:
        cfg = self.config
        period = self._period_count
        self._period_count += 1
        if cfg.channel.gain_model == "fixed":
            state = chan.fixed_gains(self.net, period, cfg.channel.fixed_gain)
        else:
            state = chan.draw_gains(
                self.net, period, self.seed, cfg.channel.rayleigh_scale_constant
            )
        rates = chan.rate_table(
            state, cfg.channel.tx_power, cfg.channel.noise_power, cfg.channel.log_base
        ).rates
        nk = self.idx.n_coords
        for k in range(nk):
            r = rates[self._link_of[k]]
            self._mu[k] = r
            self._fmu[k] = int(r)

        theta = update_qos_weights(self._qspecs, self._counters)
        qlen = self._qlen
        w = [theta[self._f_of[k]] * qlen[self._qidx_of[k]] for k in range(nk)]
        wv = WeightVector(w=np.array(w, dtype=float), mu=np.array(self._mu), theta_hat=self._theta_hat_max)
        s, diag = solve_review_optimization(wv, self.constraints, cfg.optimizer)

        total_backlog = sum(qlen)
        self.t_prev = t
        self.t_rev = next_review_time(t, total_backlog, cfg.control.a1, cfg.control.a2)
        schedule = build_slot_schedule(s, t, self.t_rev - t, self.constraints)
        if self._check:
            self.interference_violations += schedule.count_violations(self.constraints)
        self._slots = schedule.active_by_offset

        if self._collect:
            gap = None
            if self._oracle_diag and nk <= ORACLE_DIAG_MAX_COORDS:
                _, lp_best = oracle_solve(wv, self.constraints)
                gap = lp_best - objective(s, wv)
            self.periods.append(
                PeriodRecord(
                    start=t,
                    window=schedule.window,
                    objective=diag.final_objective,
                    objective_trace=diag.objective_trace,
                    c2=diag.c2,
                    c3=diag.c3,
                    handoff_messages=diag.handoff_messages,
                    excess_broadcasts=diag.excess_broadcasts,
                    theta=theta,
                    oracle_gap=gap,
                )
            )
        if self._trace_file is not None:
            self._trace_file.write(
                json.dumps(
                    {
                        "t": t,
                        "window": schedule.window,
                        "objective": diag.final_objective,
                        "queues": {f"{i}:{f}": qlen[qi] for qi, (i, f) in enumerate(self._qkeys)},
                        "assigned": list(schedule.assigned),
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    def step(self) -> None:
        """Advance one slot: review if due, arrivals, service, accounting."""
        t = self.t
        if t == self.t_rev:
            self._review(t)

        queues = self._queues
        qlen = self._qlen
        for qi, fid, counts in self._streams:
            n_new = int(counts[t])
            if n_new:
                queues[qi].extend(repeat(t, n_new))
                qlen[qi] += n_new
                self._created[fid] += n_new
                self._arr_cum[qi] += n_new

        active = self._slots[t - self.t_prev]
        if active:
            qbar = self._qbar
            fmu = self._fmu
            stage: list[tuple[int, int]] = []
            txmask = 0
            for k in active:
                qi = self._qidx_of[k]
                avail = qlen[qi] - qbar
                if avail <= 0:
                    continue
                n_mv = fmu[k]
                if n_mv > avail:
                    n_mv = avail
                if n_mv <= 0:
                    continue
                dq = queues[qi]
                if self._deliver[k]:
                    fid = self._f_of[k]
                    c = self._counters[fid]
                    hist = self._hist[fid]
                    deadline = self._deadline[fid]
                    for _ in range(n_mv):
                        d = t - dq.popleft()
                        c.delivered += 1
                        c.delay_sum += d
                        if deadline is not None and d > deadline:
                            c.late += 1
                        hist[d] = hist.get(d, 0) + 1
                else:
                    rq = self._rxq_of[k]
                    for _ in range(n_mv):
                        stage.append((rq, dq.popleft()))
                qlen[qi] -= n_mv
                self._tx_cum[qi] += n_mv
                if self._check:
                    m = self._coord_mask[k]
                    if txmask & m:
                        self.interference_violations += 1
                    txmask |= m
            for rq, created_at in stage:
                queues[rq].append(created_at)
                qlen[rq] += 1
                self._rx_cum[rq] += 1

        qsum = self._qsum
        for qi in range(len(qlen)):
            qsum[qi] += qlen[qi]

        if self._check:
            for qi in range(len(qlen)):
                if qlen[qi] != self._arr_cum[qi] + self._rx_cum[qi] - self._tx_cum[qi]:
                    self.conservation_violations += 1
            total_created = sum(self._created.values())
            total_done = sum(c.delivered for c in self._counters.values())
            if total_created != total_done + sum(qlen):
                self.conservation_violations += 1

        self.t = t + 1

    # -- reporting ------------------------------------------------------------

    def report(self) -> MetricsReport:
        flows: dict[int, FlowMetrics] = {}
        for fid in self._flow_ids:
            c = self._counters[fid]
            flows[fid] = FlowMetrics(
                created=self._created[fid],
                delivered=c.delivered,
                on_time=c.delivered - c.late,
                late=c.late,
                delay_sum=c.delay_sum,
                mean_delay=c.delay_sum / c.delivered if c.delivered else None,
                drop_ratio=c.late / c.delivered if c.delivered else None,
                histogram=dict(sorted(self._hist[fid].items())),
            )
        queue_avg = (
            {key: self._qsum[qi] / self.horizon for qi, key in enumerate(self._qkeys)}
            if self.horizon
            else {}
        )
        return MetricsReport(
            seed=self.seed,
            horizon=self.horizon,
            flows=flows,
            queue_avg=queue_avg,
            periods=self.periods,
            conservation_violations=self.conservation_violations,
            interference_violations=self.interference_violations,
        )

    def run(self) -> MetricsReport:
        for _ in range(self.horizon):
            self.step()
        return self.report()


def run_simulation(
    config: SimConfig,
    horizon: int | None = None,
    seed: int | None = None,
    check_invariants: bool = False,
    collect_periods: bool = True,
    oracle_diagnostics: bool = False,
    trace_file=None,
) -> MetricsReport:
    """Run one seeded simulation; a pure function of (config, seed, horizon).

    oracle_diagnostics adds an exact LP gap to each period record; it is only
    computed for coordinate spaces of at most ORACLE_DIAG_MAX_COORDS since
    the reference solver enumerates vertices.
    """
    if seed is None:
        seed = config.run.seeds[0]
    sim = Simulation(
        config,
        seed=seed,
        horizon=horizon,
        check_invariants=check_invariants,
        collect_periods=collect_periods,
        oracle_diagnostics=oracle_diagnostics,
        trace_file=trace_file,
    )
    return sim.run()
