import pytest

from pspin_sim.engine import SimulationError, Simulator


def test_fifo_tie_break():
    sim = Simulator()
    fired = []
    sim.schedule(0, fired.append, "a")
    sim.schedule(0, fired.append, "b")
    sim.run()
    assert fired == ["a", "b"]


def test_schedule_future():
    sim = Simulator()
    fired = []
    sim.schedule(3, lambda: sim.schedule(5, lambda: fired.append(sim.now)))
    sim.run()
    assert fired == [5]


def test_schedule_in_past_aborts():
    sim = Simulator()
    sim.schedule(3, lambda: None)
    sim.run()
    with pytest.raises(SimulationError):
        sim.schedule(2, lambda: None)


def test_empty_run_returns_time_zero():
    snap = Simulator().run()
    assert snap.now == 0
    assert snap.counters == ()


def test_run_until_stops_clock():
    sim = Simulator()
    fired = []
    sim.schedule(10, fired.append, 1)
    sim.schedule(20, fired.append, 2)
    sim.run(until=15)
    assert fired == [1]
    assert sim.now == 15


def test_quiescence_time_is_last_event():
    sim = Simulator()
    sim.schedule(10, lambda: None)
    snap = sim.run()
    assert snap.now == 10


def test_clock_monotone_across_actions():
    sim = Simulator()
    seen = []
    for t in (5, 1, 9, 5, 0):
        sim.schedule(t, lambda: seen.append(sim.now))
    sim.run()
    assert seen == sorted(seen)
