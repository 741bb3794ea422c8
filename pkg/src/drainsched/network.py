"""Network model: graph, flows, schedule coordinates, interference constraints.

The optimizer and the slot scheduler both work on a fixed coordinate space:
the ordered list of (directed link, flow) pairs that may carry traffic, built
from the declared routes. This module constructs that space, derives the
node-based interference sets (any two links touching a common node are
mutually exclusive), and assembles the feasibility polytope as one
"sum of member coordinates <= 1" halfspace per interference set.
"""

from __future__ import annotations

import graphlib
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .control import QosSpec

Link = tuple[int, int]


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class Flow:
    """One exogenous arrival stream.

    Traffic identity follows the destination: every stream addressed to the
    same node belongs to the same flow and shares that flow's per-node queues
    and QoS accounting. Routes are fixed node paths from source to
    destination; the scheduler may split traffic across them.
    """

    source: int
    destination: int
    routes: tuple[tuple[int, ...], ...]
    arrival_rate: float
    qos: "QosSpec | None" = None

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(tuple(int(n) for n in r) for r in self.routes))
        object.__setattr__(self, "arrival_rate", float(self.arrival_rate))
        if not self.routes:
            raise ConfigError(f"flow {self.source}->{self.destination}: needs at least one route")
        if not math.isfinite(self.arrival_rate) or self.arrival_rate < 0:
            raise ConfigError(
                f"flow {self.source}->{self.destination}: arrival rate must be >= 0, "
                f"got {self.arrival_rate}"
            )

    @property
    def id(self) -> int:
        """Flow identifier: the destination node."""
        return self.destination


@dataclass(frozen=True)
class NetworkSpec:
    """Static description of the network.

    positions: one (x, y) per node, node ids are 0..N-1.
    links: directed (i, j) pairs, no self-links.
    flows: arrival streams with fixed routes.
    interference_sets: sets of link indices of which at most one link may be
        active per slot. Usually produced by derive_interference_sets.
    """

    positions: tuple[tuple[float, float], ...]
    links: tuple[Link, ...]
    flows: tuple[Flow, ...]
    interference_sets: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "positions", tuple((float(x), float(y)) for x, y in self.positions)
        )
        object.__setattr__(self, "links", tuple((int(i), int(j)) for i, j in self.links))
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(
            self,
            "interference_sets",
            tuple(tuple(sorted(set(int(m) for m in s))) for s in self.interference_sets),
        )
        self._validate()

    # -- validation -------------------------------------------------------

    def _validate(self) -> None:
        n = len(self.positions)
        if n == 0:
            raise ConfigError("network.nodes: at least one node is required")
        for v, (x, y) in enumerate(self.positions):
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ConfigError(f"network.nodes[{v}]: position must be finite, got ({x}, {y})")
        seen: set[Link] = set()
        for li, (i, j) in enumerate(self.links):
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigError(f"network.links[{li}]: endpoint out of range in ({i}, {j})")
            if i == j:
                raise ConfigError(f"network.links[{li}]: self-link ({i}, {j}) not allowed")
            if (i, j) in seen:
                raise ConfigError(f"network.links[{li}]: duplicate link ({i}, {j})")
            seen.add((i, j))
            if self.distance((i, j)) <= 0.0:
                raise ConfigError(
                    f"network.links[{li}]: nodes {i} and {j} have coincident positions"
                )
        for si, members in enumerate(self.interference_sets):
            if not members:
                raise ConfigError(f"network.interference_sets[{si}]: empty set")
            for m in members:
                if not 0 <= m < len(self.links):
                    raise ConfigError(
                        f"network.interference_sets[{si}]: link index {m} out of range"
                    )
        by_dest: dict[int, list[Flow]] = {}
        for fi, fl in enumerate(self.flows):
            if not (0 <= fl.source < n and 0 <= fl.destination < n):
                raise ConfigError(f"network.flows[{fi}]: source/destination out of range")
            for ri, route in enumerate(fl.routes):
                if len(route) < 2:
                    raise ConfigError(
                        f"network.flows[{fi}].routes[{ri}]: route needs at least two nodes"
                    )
                if route[0] != fl.source:
                    raise ConfigError(
                        f"network.flows[{fi}].routes[{ri}]: route starts at {route[0]}, "
                        f"flow source is {fl.source}"
                    )
                if route[-1] != fl.destination:
                    raise ConfigError(
                        f"network.flows[{fi}].routes[{ri}]: route ends at {route[-1]}, "
                        f"flow destination is {fl.destination}"
                    )
                for hi in range(len(route) - 1):
                    hop = (route[hi], route[hi + 1])
                    if hop not in seen:
                        raise ConfigError(
                            f"network.flows[{fi}].routes[{ri}] hop {hi}: "
                            f"link ({hop[0]}, {hop[1]}) is not defined"
                        )
            by_dest.setdefault(fl.destination, []).append(fl)
        for dest, group in sorted(by_dest.items()):
            specs = {id(fl.qos): fl.qos for fl in group if fl.qos is not None}
            distinct = {fl.qos for fl in group if fl.qos is not None}
            del specs
            if len(distinct) > 1:
                raise ConfigError(
                    f"flows with destination {dest} carry conflicting QoS specifications"
                )
            self._check_acyclic(dest, group)

    def _check_acyclic(self, dest: int, group: list[Flow]) -> None:
        # Packets of a flow may hop between routes, so the union of the
        # flow's route links must not contain a directed cycle.
        adj: dict[int, set[int]] = {}
        for fl in group:
            for route in fl.routes:
                for a, b in zip(route, route[1:]):
                    adj.setdefault(a, set()).add(b)
        try:
            graphlib.TopologicalSorter(adj).prepare()
        except graphlib.CycleError as exc:
            raise ConfigError(
                f"flow {dest}: union of route links contains a directed cycle"
            ) from exc

    # -- derived views ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @cached_property
    def link_index(self) -> dict[Link, int]:
        return {link: li for li, link in enumerate(self.links)}

    @cached_property
    def flow_ids(self) -> tuple[int, ...]:
        """Distinct flow identifiers (destinations), ascending."""
        return tuple(sorted({fl.destination for fl in self.flows}))

    def streams(self, flow_id: int) -> tuple[Flow, ...]:
        return tuple(fl for fl in self.flows if fl.destination == flow_id)

    def route_links(self, flow_id: int) -> tuple[Link, ...]:
        """Distinct directed links used by any route of the flow, sorted."""
        out: set[Link] = set()
        for fl in self.streams(flow_id):
            for route in fl.routes:
                out.update(zip(route, route[1:]))
        return tuple(sorted(out))

    def qos_of(self, flow_id: int) -> "QosSpec | None":
        for fl in self.streams(flow_id):
            if fl.qos is not None:
                return fl.qos
        return None

    def distance(self, link: Link) -> float:
        (x1, y1), (x2, y2) = self.positions[link[0]], self.positions[link[1]]
        return math.hypot(x1 - x2, y1 - y2)

    def incident_links(self, node: int) -> tuple[int, ...]:
        return tuple(li for li, (i, j) in enumerate(self.links) if node in (i, j))


def derive_interference_sets(spec: NetworkSpec) -> NetworkSpec:
    """Return a spec whose interference sets cover the node-sharing rule.

    For each node, the set of all links incident on it (in or out) becomes an
    interference set. User-declared sets are preserved. Duplicates and sets
    wholly contained in another set are dropped; the result is ordered by the
    sorted member tuples so identical inputs give identical outputs.
    """
    candidates = {frozenset(s) for s in spec.interference_sets}
    for v in range(spec.n_nodes):
        inc = frozenset(spec.incident_links(v))
        if inc:
            candidates.add(inc)
    keep = [s for s in candidates if not any(s < t for t in candidates)]
    keep.sort(key=lambda s: tuple(sorted(s)))
    return replace(spec, interference_sets=tuple(tuple(sorted(s)) for s in keep))


@dataclass(frozen=True)
class LinkFlowIndex:
    """Deterministic ordering of the allowed (link, flow) pairs.

    Coordinate k corresponds to entries[k] = (i, j, flow_id); entries are
    sorted lexicographically, which pins the cyclic update order of the
    optimizer and every other per-coordinate iteration in the system.
    """

    entries: tuple[tuple[int, int, int], ...]

    @property
    def n_coords(self) -> int:
        return len(self.entries)

    @cached_property
    def index_of(self) -> dict[tuple[int, int, int], int]:
        return {e: k for k, e in enumerate(self.entries)}

    def coordinate(self, i: int, j: int, flow_id: int) -> int:
        return self.index_of[(i, j, flow_id)]

    def link(self, k: int) -> Link:
        i, j, _ = self.entries[k]
        return (i, j)

    def flow(self, k: int) -> int:
        return self.entries[k][2]


def build_link_flow_index(spec: NetworkSpec) -> LinkFlowIndex:
    """Enumerate exactly the (link, flow) pairs allowed by the routes."""
    entries = sorted(
        (i, j, fid) for fid in spec.flow_ids for (i, j) in spec.route_links(fid)
    )
    return LinkFlowIndex(tuple(entries))


@dataclass(frozen=True)
class Halfspace:
    """A constraint <s, normal> <= bound with a unit, nonnegative normal.

    ``uniform`` marks the equal-coefficient case produced by interference
    sets, where the constraint is exactly "sum of member coordinates <= 1"
    (each nonzero normal component and the bound both equal 1/sqrt(n)).
    ``link_count`` records how many distinct links the source interference
    set contains; it only matters for the alternative projection divisor.
    """

    members: tuple[int, ...]
    normal: tuple[float, ...]
    bound: float
    uniform: bool
    link_count: int | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("halfspace needs at least one member coordinate")
        if list(self.members) != sorted(set(self.members)):
            raise ValueError("halfspace members must be sorted and unique")
        if len(self.normal) != len(self.members):
            raise ValueError("normal length must match member count")
        if any(c < 0 for c in self.normal):
            raise ValueError("halfspace normal must be componentwise nonnegative")
        norm = math.sqrt(sum(c * c for c in self.normal))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"halfspace normal must have unit length, got {norm}")

    @staticmethod
    def sum_cap(members, link_count: int | None = None) -> "Halfspace":
        """The halfspace 'sum of the member coordinates <= 1'."""
        members = tuple(sorted(set(int(m) for m in members)))
        c = 1.0 / math.sqrt(len(members))
        return Halfspace(members, (c,) * len(members), c, True, link_count)

    def value(self, s) -> float:
        return float(sum(s[m] * c for m, c in zip(self.members, self.normal)))

    def violation(self, s) -> float:
        """Signed excess <s, normal> - bound; positive means violated."""
        if self.uniform:
            total = float(sum(s[m] for m in self.members))
            return (total - 1.0) * self.normal[0]
        return self.value(s) - self.bound


@dataclass(frozen=True)
class ConstraintSet:
    """The feasibility polytope over the coordinate space.

    halfspaces: one sum-cap halfspace per nonempty interference set, in the
        interference-set order of the source NetworkSpec.
    endpoints: per coordinate k, the ids of the halfspaces covering the tail
        node i(k) and the head node j(k); these are the only constraints a
        single-coordinate increase can break.
    memberships: per coordinate, the ascending ids of all halfspaces whose
        member set contains it.
    """

    halfspaces: tuple[Halfspace, ...]
    endpoints: tuple[tuple[int, int], ...]
    memberships: tuple[tuple[int, ...], ...]
    n_coords: int

    def feasible(self, s, tol: float = 1e-9) -> bool:
        if any(x < -tol or x > 1.0 + tol for x in s):
            return False
        for h in self.halfspaces:
            if sum(s[m] for m in h.members) > 1.0 + tol:
                return False
        return True

    def max_member_sum_excess(self, s) -> float:
        """Largest (member sum - 1) over all halfspaces; <= 0 when feasible."""
        return max(sum(s[m] for m in h.members) - 1.0 for h in self.halfspaces)


def build_constraints(idx: LinkFlowIndex, spec: NetworkSpec) -> ConstraintSet:
    """Build the polytope and the per-coordinate endpoint lookup.

    Requires derived interference sets: each node's incident links must be
    contained in a single set, otherwise the endpoint lookup is undefined.
    Links that carry no flow contribute no coordinates; interference sets
    with no coordinates at all are omitted.
    """
    if not spec.interference_sets:
        raise ConfigError("interference sets missing; call derive_interference_sets first")

    set_links = [set(members) for members in spec.interference_sets]
    home_set: dict[int, int] = {}
    for v in range(spec.n_nodes):
        inc = set(spec.incident_links(v))
        if not inc:
            continue
        for si, links in enumerate(set_links):
            if inc <= links:
                home_set[v] = si
                break
        else:
            raise ConfigError(
                f"interference sets do not jointly cover node {v}; "
                "call derive_interference_sets first"
            )

    coord_links = [spec.link_index[idx.link(k)] for k in range(idx.n_coords)]
    halfspaces: list[Halfspace] = []
    h_of_set: dict[int, int] = {}
    for si, links in enumerate(set_links):
        members = tuple(k for k in range(idx.n_coords) if coord_links[k] in links)
        if not members:
            continue
        h_of_set[si] = len(halfspaces)
        halfspaces.append(Halfspace.sum_cap(members, link_count=len(links)))

    endpoints = []
    for k in range(idx.n_coords):
        i, j, _ = idx.entries[k]
        endpoints.append((h_of_set[home_set[i]], h_of_set[home_set[j]]))

    member_lists: list[list[int]] = [[] for _ in range(idx.n_coords)]
    for hi, h in enumerate(halfspaces):
        for m in h.members:
            member_lists[m].append(hi)

    return ConstraintSet(
        halfspaces=tuple(halfspaces),
        endpoints=tuple(endpoints),
        memberships=tuple(tuple(ms) for ms in member_lists),
        n_coords=idx.n_coords,
    )
