import json
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from mpbap.model import (BerthType, CostWeights, Instance, InstanceError, Port, PortCall, Ship,
                         SpeedGrid, dumps_instance, fuel_per_distance, fuel_rate, generate_instance,
                         instance_from_dict, instance_to_dict, read_instance, travel_hours,
                         write_instance)


def two_port_instance(**ship_kw):
    p1 = Port("P1", (BerthType("K0", 1, 0, 20),), {"P2": 100.0})
    p2 = Port("P2", (BerthType("K0", 1, 0, 40), BerthType("K1", 2, 5, 40)), {})
    calls = ship_kw.pop("calls", (PortCall("P1", 0, 6, (4,)), PortCall("P2", 10, 18, (5, 6))))
    ship = Ship("S1", 16.0, 3.0, calls, **ship_kw)
    return Instance((p1, p2), (ship,), SpeedGrid.evenly(14.0, 19.0, 11))


def test_fuel_at_design_speed():
    ship = Ship("S", 16.0, 2.5, (PortCall("P", 0, 1, (1,)),))
    assert fuel_rate(ship, 16.0) == pytest.approx(2.5)
    assert fuel_per_distance(ship, 16.0) == pytest.approx(2.5 / 16.0)
    with pytest.raises(ValueError):
        fuel_rate(ship, 0.0)


@given(st.floats(5.0, 25.0), st.floats(1.0, 5.0), st.floats(1.1, 3.0))
def test_fuel_rate_is_cubic(speed, consumption, factor):
    ship = Ship("S", 16.0, consumption, (PortCall("P", 0, 1, (1,)),))
    assert fuel_rate(ship, speed * factor) == pytest.approx(fuel_rate(ship, speed) * factor ** 3)
    # per mile fuel grows quadratically, so slower is always cheaper per leg
    assert fuel_per_distance(ship, speed) < fuel_per_distance(ship, speed * factor)


@given(st.integers(1, 2000), st.sampled_from(SpeedGrid.evenly(14.0, 19.0, 11).levels))
def test_travel_hours_round_up(distance, speed):
    h = travel_hours(distance, speed)
    assert h >= distance / speed - 1e-9
    assert h - 1 < distance / speed


def test_travel_hours_exact_multiple():
    assert travel_hours(112.0, 14.0) == 8
    assert travel_hours(112.0 + 1e-12, 14.0) == 8


def test_speed_grid_validation():
    assert len(SpeedGrid.evenly(14.0, 19.0, 11)) == 11
    assert SpeedGrid.evenly(14.0, 19.0, 11).levels[1] == pytest.approx(14.5)
    for bad in ((), (0.0, 1.0), (15.0, 14.0)):
        with pytest.raises(InstanceError):
            SpeedGrid(bad)


def test_negative_cost_weight():
    with pytest.raises(InstanceError) as exc:
        CostWeights(fuel=-1.0)
    assert exc.value.path == "costs.fuel"


@pytest.mark.parametrize("mutate, path", [
    (lambda i: replace(i, ports=i.ports + (i.ports[0],)), "ports[2]"),
    (lambda i: replace(i, ships=(replace(i.ships[0], calls=(
        PortCall("P1", 7, 6, (4,)),)),)), "ships[0].calls[0]"),
    (lambda i: replace(i, ships=(replace(i.ships[0], calls=(
        PortCall("P1", 0, 6, (4, 2)),)),)), "ships[0].calls[0].handling"),
    (lambda i: replace(i, ships=(replace(i.ships[0], calls=(
        PortCall("P9", 0, 6, (4,)),)),)), "ships[0].calls[0].port"),
    (lambda i: replace(i, ships=(replace(i.ships[0], calls=(
        PortCall("P2", 10, 18, (5, 6)), PortCall("P1", 12, 16, (4,)))),)), "ports[1].distances"),
    (lambda i: replace(i, ships=(replace(i.ships[0], calls=(
        PortCall("P1", 18, 19, (4,)),)),)), "ships[0].calls[0]"),
])
def test_validation_points_at_field(mutate, path):
    with pytest.raises(InstanceError) as exc:
        mutate(two_port_instance())
    assert exc.value.path == path


def test_roundtrip(tmp_path):
    inst = two_port_instance(carrier="B")
    path = tmp_path / "inst.json"
    write_instance(inst, path)
    assert read_instance(path) == inst


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.integers(1, 4), st.sampled_from(["tight", "loose"]),
       st.integers(0, 10 ** 6))
def test_generator_roundtrip_and_determinism(ships, berths, ports, tw, seed):
    a = generate_instance(ships, berths, ports, tw, seed=seed)
    b = generate_instance(ships, berths, ports, tw, seed=seed)
    assert dumps_instance(a) == dumps_instance(b)
    assert instance_from_dict(json.loads(dumps_instance(a))) == a
    assert a.descriptor == f"{ships}-{berths}-{ports}-{'L' if tw == 'loose' else 'T'}"
    assert all(p.n_berths == berths for p in a.ports)
    assert all(s.route == tuple(p.id for p in a.ports) for s in a.ships)


def test_loose_windows_triple_tight():
    t = generate_instance(5, 2, 3, "tight", seed=4)
    loose = generate_instance(5, 2, 3, "loose", seed=4)
    for pt, pl in zip(t.ports, loose.ports):
        kt, kl = pt.berth_types[0], pl.berth_types[0]
        assert kl.open == kt.open
        assert kl.close - kl.open == 3 * (kt.close - kt.open)


def test_generator_rejects_bad_arguments():
    with pytest.raises(ValueError):
        generate_instance(0, 1, 1)
    with pytest.raises(ValueError):
        generate_instance(2, 1, 1, tw="medium")


@pytest.mark.parametrize("doc, path", [
    ({"format": "other"}, "format"),
    ({"format": "mpbap-instance", "version": 9}, "version"),
    ({"format": "mpbap-instance", "version": 1}, "costs"),
])
def test_reader_errors(doc, path):
    with pytest.raises(InstanceError) as exc:
        instance_from_dict(doc)
    assert exc.value.path == path


def test_reader_type_errors(tmp_path):
    doc = instance_to_dict(two_port_instance())
    doc["ships"][0]["calls"][0]["start"] = "0"
    with pytest.raises(InstanceError) as exc:
        instance_from_dict(doc)
    assert exc.value.path == "ships[0].calls[0].start"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InstanceError):
        read_instance(bad)


def test_split_berth_types():
    inst = two_port_instance()
    split = inst.split_berth_types()
    p2 = split.ports[1]
    assert [k.id for k in p2.berth_types] == ["K0.0", "K1.0", "K1.1"]
    assert all(k.count == 1 for p in split.ports for k in p.berth_types)
    assert split.ships[0].calls[1].handling == (5, 6, 6)
    assert split.ports[1].n_berths == inst.ports[1].n_berths


def test_windows_scaled():
    inst = two_port_instance()
    wide = inst.with_windows_scaled(1.2)
    assert [(k.open, k.close) for k in wide.ports[1].berth_types] == [(0, 48), (5, 47)]
    assert inst.with_windows_scaled(1.0) == inst


def test_subset_keeps_order():
    inst = generate_instance(5, 1, 2, "loose", seed=1)
    sub = inst.subset(["S4", "S2"])
    assert [s.id for s in sub.ships] == ["S2", "S4"]
