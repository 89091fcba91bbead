import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsnsel.errors import ContractError
from wsnsel.ingest import SensorPosition, align_epochs, parse_sensor_log
from wsnsel.minidata import DATA_DIR
from wsnsel.sim import (adaptive_loop, build_routing, field_nodes, ltef, simulate_epochs,
                        validate_plan)

from oracles import greedy_route_oracle


def pos(*triples):
    return [SensorPosition(m, x, y) for m, x, y in triples]


def random_field(seed, max_nodes=20, side=40.0):
    g = np.random.default_rng(seed)
    n = int(g.integers(2, max_nodes + 1))
    ps = [SensorPosition(i + 1, *map(float, g.uniform(0, side, 2))) for i in range(n)]
    sink = int(g.integers(1, n + 1))
    active = [p.mote_id for p in ps if p.mote_id != sink and g.random() < 0.6]
    return ps, active, sink, float(g.uniform(5, 25))


def test_ltef_values():
    assert ltef(54, 2) == 27
    assert ltef(53, 5) == pytest.approx(10.6, abs=0) and float(ltef(53, 5)) == 10.6
    assert ltef(53, 8) == 6.625
    assert ltef(9, 9) == 1
    with pytest.raises(ContractError):
        ltef(10, 0)


def test_sink_only_has_no_paths():
    plan = build_routing(pos((1, 0, 0), (2, 5, 5)), [1], 1)
    assert plan.paths == {}


def test_collinear_relay():
    # A=1 at 16 m, B=2 at 8 m, sink=3 at origin; range 10 m
    ps = pos((1, 16, 0), (2, 8, 0), (3, 0, 0))
    plan = build_routing(ps, [1, 2], 3, comm_range=10)
    assert plan.paths[1] == (1, 2, 3)
    assert plan.paths[2] == (2, 3)
    assert not plan.long_hops
    coords = {p.mote_id: (p.x, p.y) for p in ps}
    assert greedy_route_oracle(coords, [1, 2], 3, 10) == plan.paths


def test_dead_end_gets_flagged_long_hop():
    plan = build_routing(pos((1, 30, 0), (2, 0, 0)), [1], 2, comm_range=10)
    assert plan.paths[1] == (1, 2) and plan.long_hops == {1}


def test_unknown_id():
    with pytest.raises(ContractError):
        build_routing(pos((1, 0, 0)), [2], 1)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31))
def test_paths_valid_and_bounded(seed):
    ps, active, sink, rng_range = random_field(seed)
    plan = build_routing(ps, active, sink, rng_range)
    validate_plan(plan)
    for path in plan.paths.values():
        assert len(path) - 1 <= len(plan.active_ids)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31))
def test_small_fields_match_exhaustive(seed):
    ps, active, sink, rng_range = random_field(seed, max_nodes=6)
    plan = build_routing(ps, active, sink, rng_range)
    coords = {p.mote_id: (p.x, p.y) for p in ps}
    assert greedy_route_oracle(coords, active, sink, rng_range) == plan.paths


def test_single_hop_energy():
    plan = build_routing(pos((1, 3, 0), (2, 0, 0), (3, 50, 50)), [1], 2)
    ledger = simulate_epochs(plan, 1, tx_cost=1, rx_cost=1)
    assert ledger.energy[1] == 1 and ledger.energy[2] == 1 and ledger.energy[3] == 0
    assert ledger.total == sum(ledger.energy.values()) == sum(ledger.per_epoch)


def test_energy_ratio_single_hop():
    ps = [SensorPosition(i, float(i), 0.0) for i in range(1, 12)]
    sink = 1
    everyone = build_routing(ps, range(2, 12), sink, comm_range=1e9)
    two = build_routing(ps, [5, 9], sink, comm_range=1e9)
    e_all = simulate_epochs(everyone, 50).total
    e_two = simulate_epochs(two, 50).total
    # single hop: epochs * active * (tx + rx)
    assert e_all == 50 * 10 * 1.5 and e_two == 50 * 2 * 1.5
    assert e_all / e_two >= 10 / 2


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 30))
def test_sleeping_nodes_spend_nothing(seed, epochs):
    ps, active, sink, rng_range = random_field(seed)
    plan = build_routing(ps, active, sink, rng_range)
    ledger = simulate_epochs(plan, epochs)
    for node in field_nodes(plan, ps, ledger):
        if node.state == "sleep":
            assert node.energy_used == 0 and ledger.tx[node.mote_id] == 0 == ledger.rx[node.mote_id]
    hops = sum(len(p) - 1 for p in plan.paths.values())
    assert ledger.total == pytest.approx(epochs * hops * 1.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_energy_monotone_when_single_hop(seed):
    ps, active, sink, _ = random_field(seed)
    sleeping = [p.mote_id for p in ps if p.mote_id not in active and p.mote_id != sink]
    if not sleeping:
        return
    a = simulate_epochs(build_routing(ps, active, sink, 1e9), 5).total
    b = simulate_epochs(build_routing(ps, active + sleeping[:1], sink, 1e9), 5).total
    assert b > a


def _mini_matrix():
    with open(DATA_DIR / "mini_log.txt") as fh:
        m, _ = align_epochs(parse_sensor_log(fh).readings, target_id=50)
    with open(DATA_DIR / "mini_positions.txt") as fh:
        from wsnsel.ingest import load_positions
        ps = load_positions(fh)
    return m, ps


def test_adaptive_loop_paths():
    m, ps = _mini_matrix()
    stages = adaptive_loop(m, ps, 50, [35, 100, 200], math.inf, timing=False)
    assert len(stages) == 3 and all(s.adopted for s in stages)
    for s in stages:
        validate_plan(s.plan)
        assert s.plan.active_ids == s.candidate_ids
    frozen = adaptive_loop(m, ps, 50, [35, 100, 200], 0.0, timing=False)
    assert [s.adopted for s in frozen] == [True, False, False]
    assert all(s.plan is frozen[0].plan for s in frozen)
    with pytest.raises(ContractError):
        adaptive_loop(m, ps, 50, [100, 35], 5.0)
