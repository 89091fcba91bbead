"""Sensor-field simulation: active/sleep states, greedy routing to the sink,
an energy ledger, and the adaptive re-selection loop."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

from .errors import ContractError
from .ingest import DataMatrix, SensorPosition, take_window

ACTIVE, SLEEP, SINK = "active", "sleep", "sink"
DEFAULT_RANGE = 10.0


def ltef(total_sensors: int, participating: int) -> Fraction:
    """Lifetime extension factor: total sensors over participating sensors."""
    if participating < 1 or participating > total_sensors:
        raise ContractError(f"need 1 <= participating ({participating}) <= total ({total_sensors})")
    return Fraction(total_sensors, participating)


@dataclass
class Node:
    mote_id: int
    position: tuple[float, float]
    state: str = SLEEP
    energy_used: float = 0.0


@dataclass(frozen=True)
class RoutingPlan:
    sink_id: int
    active_ids: tuple[int, ...]
    paths: dict[int, tuple[int, ...]]
    node_ids: tuple[int, ...] = ()
    long_hops: frozenset[int] = frozenset()
    epoch_window: tuple[int, int] | None = None
    comm_range: float = DEFAULT_RANGE

    def state_of(self, mote_id: int) -> str:
        if mote_id == self.sink_id:
            return SINK
        return ACTIVE if mote_id in self.paths else SLEEP

    def next_hop(self, mote_id: int) -> int | None:
        path = self.paths.get(mote_id)
        return path[1] if path else None


def _distances(positions: Sequence[SensorPosition]):
    return {p.mote_id: (p.x, p.y) for p in positions}


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def build_routing(positions: Sequence[SensorPosition], active_ids: Iterable[int], sink_id: int,
                  comm_range: float = DEFAULT_RANGE,
                  epoch_window: tuple[int, int] | None = None) -> RoutingPlan:
    """Greedy geographic forwarding over active nodes.

    Each hop goes to the active node or sink within `comm_range` that is
    strictly closer to the sink, choosing the smallest remaining distance
    (ties to the lower id). A node with no such neighbour hops straight to
    the sink and is recorded in ``long_hops``.
    """
    where = _distances(positions)
    active = sorted(set(int(a) for a in active_ids) - {sink_id})
    for mid in [sink_id, *active]:
        if mid not in where:
            raise ContractError(f"no position for mote {mid}")
    sink_xy = where[sink_id]
    d_sink = {m: _dist(where[m], sink_xy) for m in active}
    d_sink[sink_id] = 0.0
    relays = active + [sink_id]

    paths: dict[int, tuple[int, ...]] = {}
    long_hops = set()
    for src in active:
        path = [src]
        cur = src
        while cur != sink_id:
            here = where[cur]
            options = [(d_sink[m], m) for m in relays
                       if d_sink[m] < d_sink[cur] and _dist(here, where[m]) <= comm_range]
            if options:
                cur = min(options)[1]
            else:
                long_hops.add(cur)
                cur = sink_id
            path.append(cur)
        paths[src] = tuple(path)
    return RoutingPlan(sink_id=sink_id, active_ids=tuple(active), paths=paths,
                       node_ids=tuple(sorted(where)), long_hops=frozenset(long_hops),
                       epoch_window=epoch_window, comm_range=comm_range)


def validate_plan(plan: RoutingPlan) -> None:
    """Raise ContractError unless every path is a valid active route to the sink."""
    allowed = set(plan.active_ids) | {plan.sink_id}
    if plan.sink_id in plan.active_ids:
        raise ContractError("sink listed among active nodes")
    if set(plan.paths) != set(plan.active_ids):
        raise ContractError("every active node needs exactly one path")
    for src, path in plan.paths.items():
        if path[0] != src or path[-1] != plan.sink_id:
            raise ContractError(f"path of {src} must start at it and end at the sink")
        if len(set(path)) != len(path):
            raise ContractError(f"path of {src} revisits a node")
        if not set(path) <= allowed:
            raise ContractError(f"path of {src} crosses a sleeping node")


@dataclass
class EnergyLedger:
    tx: dict[int, int]
    rx: dict[int, int]
    energy: dict[int, float]
    per_epoch: list[float]
    tx_cost: float = 1.0
    rx_cost: float = 0.5

    @property
    def total(self) -> float:
        return sum(self.energy.values())


def simulate_epochs(plan: RoutingPlan, n_epochs: int, tx_cost: float = 1.0,
                    rx_cost: float = 0.5) -> EnergyLedger:
    """Every active node originates one message per epoch along its path.

    Each hop charges `tx_cost` to the sender and `rx_cost` to the receiver.
    """
    if n_epochs < 1:
        raise ContractError("n_epochs must be >= 1")
    nodes = plan.node_ids or tuple(sorted(set(plan.active_ids) | {plan.sink_id}))
    tx = {m: 0 for m in nodes}
    rx = {m: 0 for m in nodes}
    hops_tx: dict[int, int] = {}
    hops_rx: dict[int, int] = {}
    for path in plan.paths.values():
        for a, b in zip(path, path[1:]):
            hops_tx[a] = hops_tx.get(a, 0) + 1
            hops_rx[b] = hops_rx.get(b, 0) + 1
    per_epoch_cost = sum(hops_tx.values()) * tx_cost + sum(hops_rx.values()) * rx_cost
    for _ in range(n_epochs):
        for m, c in hops_tx.items():
            tx[m] += c
        for m, c in hops_rx.items():
            rx[m] += c
    energy = {m: tx[m] * tx_cost + rx[m] * rx_cost for m in nodes}
    return EnergyLedger(tx=tx, rx=rx, energy=energy, per_epoch=[per_epoch_cost] * n_epochs,
                        tx_cost=tx_cost, rx_cost=rx_cost)


def field_nodes(plan: RoutingPlan, positions: Sequence[SensorPosition],
                ledger: EnergyLedger | None = None) -> list[Node]:
    where = _distances(positions)
    return [Node(m, where[m], plan.state_of(m), ledger.energy.get(m, 0.0) if ledger else 0.0)
            for m in plan.node_ids]


@dataclass
class AdaptiveStage:
    window: tuple[int, int]
    report: object
    plan: RoutingPlan
    adopted: bool
    candidate_ids: tuple[int, ...] = ()


def adaptive_loop(full_matrix: DataMatrix, positions: Sequence[SensorPosition], sink_id: int,
                  schedule: Sequence[int], rmse_threshold: float = 5.0, *, start_row: int = 0,
                  comm_range: float = DEFAULT_RANGE, **scenario_kw) -> list[AdaptiveStage]:
    """Re-select active sensors on growing windows, gated by prediction error.

    A stage's selection is adopted when its cross-validated RMSE percent is at
    most `rmse_threshold`; otherwise the previous plan is kept. The first
    stage is always adopted.
    """
    from .evaluation import run_scenario

    schedule = list(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ContractError("window schedule must be strictly increasing")
    matrix = full_matrix if full_matrix.target_id == sink_id else full_matrix.with_target(sink_id)
    scenario_kw.setdefault("baseline", False)
    stages: list[AdaptiveStage] = []
    plan = None
    for length in schedule:
        window = take_window(matrix, start_row, length)
        report = run_scenario(window, with_selection=True, name=f"window_{length}", **scenario_kw)
        pct = report.rmse_selected.percent
        ok = pct is not None and pct <= rmse_threshold
        adopt = plan is None or ok
        if adopt:
            plan = build_routing(positions, report.selected_ids, sink_id, comm_range,
                                 epoch_window=(start_row, length))
        stages.append(AdaptiveStage(window=(start_row, length), report=report, plan=plan,
                                    adopted=adopt, candidate_ids=report.selected_ids))
    return stages


def write_plan(plan: RoutingPlan, stream: TextIO) -> None:
    window = f"{plan.epoch_window[0]}:{plan.epoch_window[1]}" if plan.epoch_window else "none"
    stream.write(f"# sink={plan.sink_id} window={window}\n")
    stream.write("mote_id,state,next_hop,long_hop\n")
    for m in plan.node_ids:
        nh = plan.next_hop(m)
        stream.write(f"{m},{plan.state_of(m)},{'' if nh is None else nh},"
                     f"{int(m in plan.long_hops)}\n")


def write_ledger(ledger: EnergyLedger, plan: RoutingPlan, stream: TextIO) -> None:
    stream.write("mote_id,state,tx,rx,energy\n")
    for m in sorted(ledger.energy):
        stream.write(f"{m},{plan.state_of(m)},{ledger.tx[m]},{ledger.rx[m]},{ledger.energy[m]:.6f}\n")
    stream.write(f"total,,{sum(ledger.tx.values())},{sum(ledger.rx.values())},{ledger.total:.6f}\n")


def write_epoch_totals(ledger: EnergyLedger, stream: TextIO) -> None:
    stream.write("epoch,energy\n")
    for i, e in enumerate(ledger.per_epoch):
        stream.write(f"{i},{e:.6f}\n")
