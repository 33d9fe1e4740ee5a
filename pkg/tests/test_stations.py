import json

import pytest

from gridhaul.fleet import Charging, Hdev, HdevParams, Idle
from gridhaul.stations import (
    ChargingStation,
    PortStrategy,
    StationError,
    StationRegistry,
    aggregate_power,
    assign_ports,
    load_stations,
    stations_to_dict,
)


def hdev(vid, soc=450.0):
    return Hdev(vid, HdevParams(), soc, Idle("S"), "S", "T")


def test_admit_into_free_port():
    st = ChargingStation("S", 1, n_ports=2)
    st.admit("v1")
    assert st.charging_set == ["v1"] and st.wait_queue == []


def test_admit_into_full_station_queues():
    st = ChargingStation("S", 1, n_ports=1)
    st.admit("v1")
    st.admit("v2")
    assert st.charging_set == ["v1"] and st.wait_queue == ["v2"]


def test_admit_twice_rejected():
    st = ChargingStation("S", 1, n_ports=2)
    st.admit("v1")
    with pytest.raises(StationError, match="already"):
        st.admit("v1")


def test_release_promotes_queue_head():
    st = ChargingStation("S", 1, n_ports=1)
    st.admit("v1")
    st.admit("v2")
    st.release("v1")
    assert st.charging_set == ["v2"] and st.wait_queue == []


def test_release_queued_vehicle_leaves_ports_alone():
    st = ChargingStation("S", 1, n_ports=1)
    st.admit("v1")
    st.admit("v2")
    st.release("v2")
    assert st.charging_set == ["v1"] and st.wait_queue == []


def test_release_unknown_rejected():
    with pytest.raises(StationError, match="v9"):
        ChargingStation("S", 1).release("v9")


def test_zero_ports_rejected():
    with pytest.raises(StationError):
        ChargingStation("S", 1, n_ports=0)


def test_aggregate_power():
    st = ChargingStation("S", 1)
    fleet = {i: hdev(i) for i in range(10)}
    for i in range(10):
        st.admit(i)
    assert aggregate_power(st, fleet) == 1500.0
    assert aggregate_power(ChargingStation("E", 1), {}) == 0.0


def test_queued_vehicles_draw_nothing():
    st = ChargingStation("S", 1, n_ports=3)
    fleet = {i: hdev(i) for i in range(8)}
    for i in range(8):
        st.admit(i)
    assert aggregate_power(st, fleet) == 450.0
    assert len(st.wait_queue) == 5


def test_fifo_assignment_by_arrival():
    st = ChargingStation("S", 1, n_ports=1)
    st.enqueue("v1")
    st.enqueue("v2")
    assign_ports(PortStrategy.FIFO, st)
    assert st.charging_set == ["v1"] and st.wait_queue == ["v2"]


def test_shortest_remaining_charge_picks_smallest_need():
    st = ChargingStation("S", 1, n_ports=1)
    fleet = {"v1": hdev("v1", 500.0), "v2": hdev("v2", 850.0)}  # need 400 and 50
    st.enqueue("v1")
    st.enqueue("v2")
    assign_ports(PortStrategy.SHORTEST_REMAINING_CHARGE, st, fleet)
    assert st.charging_set == ["v2"]


def test_shortest_remaining_charge_tie_goes_to_earlier_arrival():
    st = ChargingStation("S", 1, n_ports=1)
    fleet = {"v1": hdev("v1", 600.0), "v2": hdev("v2", 600.0)}
    st.enqueue("v2")
    st.enqueue("v1")
    assign_ports("shortest_remaining_charge", st, fleet)
    assert st.charging_set == ["v2"]


def test_fifo_promotes_in_admission_order():
    st = ChargingStation("S", 1, n_ports=1)
    for v in ["a", "b", "c", "d"]:
        st.admit(v)
    served = []
    while st.charging_set:
        v = st.charging_set[0]
        served.append(v)
        st.release(v)
    assert served == ["a", "b", "c", "d"]


def test_strategy_parse():
    assert PortStrategy.parse("FIFO") is PortStrategy.FIFO
    assert PortStrategy.parse("shortest-remaining-charge") is PortStrategy.SHORTEST_REMAINING_CHARGE
    with pytest.raises(ValueError):
        PortStrategy.parse("random")


def test_registry_one_station_per_vehicle():
    reg = StationRegistry([ChargingStation("S", 1), ChargingStation("T", 2)])
    reg.admit("S", "v1")
    with pytest.raises(StationError):
        reg.admit("T", "v1")
    reg.release("v1")
    reg.admit("T", "v1")


def test_registry_load_by_bus_sums_shared_buses():
    reg = StationRegistry([ChargingStation("S", 7), ChargingStation("T", 7), ChargingStation("U", 8)])
    fleet = {i: hdev(i) for i in range(3)}
    reg.admit("S", 0)
    reg.admit("T", 1)
    reg.admit("U", 2)
    assert reg.load_by_bus(fleet) == {7: 300.0, 8: 150.0}


def test_duplicate_station_ids_rejected():
    with pytest.raises(StationError):
        StationRegistry([ChargingStation("S", 1), ChargingStation("S", 2)])


def test_station_file_round_trip(tmp_path, data_dir):
    stations = load_stations(data_dir / "stations10.json")
    assert len(stations) == 10
    p = tmp_path / "st.json"
    p.write_text(json.dumps(stations_to_dict(stations)))
    again = load_stations(p)
    assert [(s.id, s.bus_id, s.n_ports, s.lat, s.lon) for s in again] == [
        (s.id, s.bus_id, s.n_ports, s.lat, s.lon) for s in stations
    ]


def test_station_object_unaffected_by_vehicle_state():
    # the station only tracks ids; vehicle state is the engine's business
    st = ChargingStation("S", 1, n_ports=1)
    st.admit(1)
    fleet = {1: Hdev(1, HdevParams(), 100.0, Charging("S"), "S", "T")}
    assert aggregate_power(st, fleet) == 150.0
