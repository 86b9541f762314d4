from pspin_sim import PsPINConfig, Simulation, make_trace
from pspin_sim.cluster import RoundRobinArbiter
from pspin_sim.engine import Simulator

from helpers import empty_ctx, quick_run


class TestRoundRobinArbiter:
    def test_single_requester_granted_same_cycle(self):
        sim = Simulator()
        grants = []
        arb = RoundRobinArbiter(sim, 8, lambda rid, t: grants.append((rid, t)))
        sim.schedule(5, arb.request, 3)
        sim.run()
        assert grants == [(3, 5)]

    def test_simultaneous_requests_spread_over_cycles(self):
        sim = Simulator()
        grants = []
        arb = RoundRobinArbiter(sim, 8, lambda rid, t: grants.append((rid, t)))
        for rid in range(8):
            sim.schedule(10, arb.request, rid)
        sim.run()
        assert [t for _, t in grants] == list(range(10, 18))
        assert sorted(r for r, _ in grants) == list(range(8))

    def test_rr_fairness_pattern(self):
        # requests {0, 0, 1}: grants must go 0, 1, 0
        sim = Simulator()
        grants = []
        arb = RoundRobinArbiter(sim, 2, lambda rid, t: grants.append(rid))
        sim.schedule(0, arb.request, 0)

        def regrant_and_contend():
            arb.request(0)
            arb.request(1)

        sim.schedule(1, regrant_and_contend)
        sim.run()
        assert grants == [0, 1, 0]


def test_feedback_fairness_window():
    # all requesters continuously requesting: grant counts differ by <= 1
    sim = Simulator()
    counts = {i: 0 for i in range(8)}

    def regrant(rid, _t):
        counts[rid] += 1
        if sum(counts.values()) < 200:
            arb.request(rid)

    arb = RoundRobinArbiter(sim, 8, regrant)
    for rid in range(8):
        sim.schedule(0, arb.request, rid)
    sim.run()
    assert max(counts.values()) - min(counts.values()) <= 1


def test_resources_drain_to_zero_and_busy_bounded():
    trace = make_trace(8, 64 * 40, 64, flows=4, interleave="rr")
    sim = Simulation(PsPINConfig(), [empty_ctx()], trace)
    res = sim.run()
    assert res.finished
    for cluster in sim.clusters:
        assert cluster.l1_ring.live_bytes == 0
        assert cluster.fifo_used == 0
        assert cluster.outstanding == 0
    total_busy = sum(res.stats.hpu_busy.values())
    assert total_busy <= res.snapshot.now * 32


def test_l1_region_holds_exactly_512_small_tasks():
    # 32 KiB packet region / 64 B = 512 concurrent reservations
    from pspin_sim.inbound import RingAllocator

    ring = RingAllocator(32 * 1024)
    count = 0
    while ring.would_fit(64):
        ring.alloc(64)
        count += 1
    assert count == 512


def test_empty_handler_busy_exactly_8():
    trace = make_trace(1, 64, 64)
    res = quick_run(trace)
    r = res.packet_records[0]
    assert r.t_doorbell - r.t_assign == 8


def test_compute_charge_additivity():
    def h100(api):
        api.charge(100)

    ctx = empty_ctx(header_handler=h100, payload_handler=h100, completion_handler=h100)
    res = quick_run(make_trace(1, 64, 64), ctx=ctx)
    r = res.packet_records[0]
    assert r.t_doorbell - r.t_assign == 108


def test_pingpong_busy_35_cycles():
    from pspin_sim.workloads import build

    wl = build("pingpong", {"packet_size": 64, "n_packets": 1})
    res = wl.run()
    r = res.packet_records[0]
    assert r.t_doorbell - r.t_assign == 35
    assert res.extra["oracle_problems"] == []


def test_bytes_to_l1_zero_skips_dma():
    ctx = empty_ctx(bytes_to_l1=0)
    res = quick_run(make_trace(1, 64, 64), ctx=ctx)
    r = res.packet_records[0]
    assert r.t_dma_end == r.t_dma_start == r.t_cched
    assert r.latency < 26


def test_word_reads_from_handler_memory_charge_l2_latency():
    # 64 B read word-by-word = 16 accesses, each at the L2 word latency
    cfg = PsPINConfig()

    def reader(api):
        api.hmem_read_words(0, 16)

    ctx = empty_ctx(header_handler=reader, payload_handler=None, completion_handler=None,
                    handler_mem_bytes=256)
    res = quick_run(make_trace(1, 64, 64), ctx=ctx, cfg=cfg)
    r = res.packet_records[0]
    assert r.t_doorbell - r.t_assign == 8 + 16 * cfg.l2_word_latency


def test_out_of_bounds_access_faults_and_message_continues():
    def bad(api):
        api.pkt_read_u32(api.staged_len + 64)

    ctx = empty_ctx(payload_handler=bad)
    trace = make_trace(1, 64 * 4, 64)
    res = quick_run(trace, ctx=ctx)
    assert res.finished  # resources freed, message ran to completion
    faults = [r for r in res.packet_records if r.outcome == "protection_fault"]
    assert len(faults) == 3  # payload packets fault, header (noop) does not
    assert res.stats.counters["handler_protection_fault"] == 3
    assert ctx.error_flag == "protection_fault"


def test_scratch_isolation_between_contexts():
    # ctx 0 scribbles everywhere it can reach; ctx 1's scratchpad canary
    # survives because cross-region access is impossible, only faults.
    def scribble(api):
        for off in (0, 60, 256, 1 << 20):
            try:
                api.scratch_write_u32(off, 0xDEAD)
            except Exception:
                pass

    def keeper(api):
        api.scratch_write_u32(0, 0xBEEF)

    a = empty_ctx(ctx_id=0, flow_prefix=b"\x00\x00\x00\x00",
                  header_handler=scribble, payload_handler=None, completion_handler=None,
                  scratchpad_bytes=64)
    b = empty_ctx(ctx_id=1, flow_prefix=b"\x00\x00\x00\x01",
                  header_handler=keeper, payload_handler=None, completion_handler=None,
                  handler_mem_base=256, scratchpad_bytes=64)

    trace = make_trace(2, 64, 64, flows=2)
    sim = Simulation(PsPINConfig(), [a, b], trace)
    res = sim.run()
    assert res.finished
    import struct
    for c in range(4):
        buf = sim.env.scratch[(1, c)]
        val = struct.unpack_from("<I", buf, 0)[0]
        assert val in (0, 0xBEEF)  # never ctx 0's 0xDEAD


def test_watchdog_kills_at_threshold():
    def spin(api):
        while True:
            api.charge(1)

    ctx = empty_ctx(header_handler=spin, payload_handler=None, completion_handler=None,
                    watchdog_threshold_cycles=1000)
    res = quick_run(make_trace(1, 64, 64), ctx=ctx)
    r = res.packet_records[0]
    assert r.outcome == "watchdog_kill"
    busy = r.t_handler_end - r.t_invoke_end
    assert abs(busy - 1000) <= 1
    assert res.finished  # allocation freed, run terminates


def test_handler_just_under_threshold_survives():
    def almost(api):
        api.charge(999)

    ctx = empty_ctx(header_handler=almost, payload_handler=None, completion_handler=None,
                    watchdog_threshold_cycles=1000)
    res = quick_run(make_trace(1, 64, 64), ctx=ctx)
    assert res.packet_records[0].outcome in ("", "ok")


def test_completion_gated_on_command_responses():
    def sender(api):
        api.dma_to_host("pkt_l1", 0, api.pkt_size, 0)

    ctx = empty_ctx(bytes_to_l1=1024, header_handler=sender, payload_handler=None,
                    completion_handler=None)
    res = quick_run(make_trace(1, 1024, 1024), ctx=ctx)
    r = res.packet_records[0]
    # notification waits for the command response (read completes after
    # the doorbell for a 1 KiB transfer through the L1 adapter)
    assert r.t_notif_sent > r.t_doorbell + 1


def test_host_direct_caps_at_32_bytes():
    outcomes = []

    def sender(api):
        try:
            api.host_direct(0, bytes(33))
        except Exception as exc:
            outcomes.append(type(exc).__name__)
            raise

    ctx = empty_ctx(header_handler=sender, payload_handler=None, completion_handler=None)
    res = quick_run(make_trace(1, 64, 64), ctx=ctx)
    assert outcomes == ["MemoryFault"]
    assert res.packet_records[0].outcome == "protection_fault"
