"""Workload library: application handlers, trace generators, and oracles.

Each workload bundles an execution context (handler triple plus memory
regions), a packet trace, per-operation cost constants, and an oracle
that recomputes the expected host-visible result directly from the trace
(never through the simulator).  Cost constants count operations in the
handler inner loops and are committed in `configs/<name>.cfg`; they are
the calibration surface for the throughput figures.

Shared-state workloads (reduce, aggregate, histogram) accumulate into
per-cluster scratchpad partials with single-cycle atomic adds and merge
the partials once, in the completion handler of the last message, so
their results are independent of packet-to-cluster placement.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExecutionContext, PsPINConfig
from .sim import RunResult, Simulation
from .trace import PacketTrace, make_trace

WORKLOAD_NAMES = (
    "reduce",
    "aggregate",
    "filtering",
    "kvstore",
    "strided_ddt",
    "histogram",
    "synthetic",
    "pingpong",
)

_SPEC_DIR = Path(__file__).resolve().parents[2] / "configs"

# Host address map for workload result buffers.
HOST_RESULT_BASE = 0x1000_0000


def load_workload_spec(name: str) -> dict[str, int]:
    """Read the committed framing and cost constants for a workload."""
    path = _SPEC_DIR / f"{name}.cfg"
    parser = configparser.ConfigParser()
    if not parser.read(path):
        return {}
    out: dict[str, int] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            out[key] = int(raw)
    return out


@dataclass
class Workload:
    name: str
    contexts: list[ExecutionContext]
    trace: PacketTrace
    oracle: object  # callable(RunResult) -> list[str] of mismatches
    params: dict = field(default_factory=dict)
    rate_gbps: float | None = None  # None = unlimited injection
    host_regions: list[tuple[str, int, int]] = field(default_factory=list)

    def run(self, cfg: PsPINConfig | None = None, until: int | None = None) -> RunResult:
        sim = Simulation(cfg or PsPINConfig(), self.contexts, self.trace, self.rate_gbps)
        for region in self.host_regions:
            sim.host.register(*region)
        result = sim.run(until)
        result.extra["workload"] = self.name
        result.extra["params"] = dict(self.params)
        result.extra["oracle_problems"] = self.oracle(result)
        return result


def _u32s(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype=np.uint32)


def _msg_rng(seed: int, msg_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64((seed << 20) ^ msg_id))


# --- reduce: elementwise sum across messages ---------------------------------


def build_reduce(params: dict) -> Workload:
    spec = load_workload_spec("reduce") | params
    n_msgs = spec.get("n_msgs", 512)
    items = spec.get("items_per_msg", 512)
    mtu = spec.get("packet_size", 512)
    flows = spec.get("flows", 16)
    seed = spec.get("seed", 1)
    per_word = spec.get("per_word_cycles", 1)  # loop overhead beyond ld + amo
    prologue = spec.get("per_packet_cycles", 10)
    msg_bytes = items * 4

    arrays = [
        _msg_rng(seed, m).integers(0, 2**32, size=items, dtype=np.uint32)
        for m in range(n_msgs)
    ]

    def payload_fn(msg_id, _idx, off, chunk):
        return arrays[msg_id][off // 4 : (off + chunk) // 4].tobytes()

    trace = make_trace(n_msgs, msg_bytes, mtu, flows=flows, interleave="rr", payload_fn=payload_fn)

    result_bytes = items * 4
    combine_off = result_bytes  # second half of each scratch slice

    def payload(api):
        nwords = api.staged_len // 4
        api.charge(prologue)
        words = api.pkt_read_words(0, nwords)
        api.charge(per_word * nwords)
        api.scratch_add_words(api.msg_offset, words)

    def completion(api):
        api.charge(prologue)
        done = api.hmem_amo_add(0, 1)
        if done == n_msgs - 1:
            total = np.zeros(items, dtype=np.uint64)
            for c in range(api.num_clusters):
                total += api.scratch_read_words(0, items, cluster=c).astype(np.uint64)
            api.scratch_write_words(combine_off, (total & 0xFFFFFFFF).astype(np.uint32))
            api.dma_to_host("scratch", combine_off, result_bytes, HOST_RESULT_BASE)
            api.host_direct(HOST_RESULT_BASE + result_bytes, b"done")

    ctx = ExecutionContext(
        ctx_id=0,
        flow_prefix=b"",
        payload_handler=payload,
        completion_handler=completion,
        handler_mem_bytes=64,
        scratchpad_bytes=2 * result_bytes,
        bytes_to_l1=mtu,
    )

    def oracle(result: RunResult) -> list[str]:
        expected = np.zeros(items, dtype=np.uint64)
        for arr in arrays:
            expected += arr
        expected = (expected & 0xFFFFFFFF).astype(np.uint32)
        got = _u32s(bytes(result.host.region("result")[:result_bytes]))
        if not np.array_equal(expected, got):
            return [f"reduce mismatch: {int((expected != got).sum())} of {items} entries"]
        return []

    wl = Workload("reduce", [ctx], trace, oracle, spec)
    wl.host_regions = [("result", HOST_RESULT_BASE, result_bytes + 64)]
    return wl


# --- aggregate: scalar sum of one large message ------------------------------


def build_aggregate(params: dict) -> Workload:
    spec = load_workload_spec("aggregate") | params
    msg_bytes = spec.get("msg_bytes", 1024 * 1024)
    mtu = spec.get("packet_size", 512)
    seed = spec.get("seed", 2)
    per_word = spec.get("per_word_cycles", 1)  # add per word beyond the load
    prologue = spec.get("per_packet_cycles", 12)

    data = _msg_rng(seed, 0).integers(0, 2**32, size=msg_bytes // 4, dtype=np.uint32)

    def payload_fn(_msg, _idx, off, chunk):
        return data[off // 4 : (off + chunk) // 4].tobytes()

    trace = make_trace(1, msg_bytes, mtu, payload_fn=payload_fn)

    def payload(api):
        nwords = api.staged_len // 4
        api.charge(prologue)
        words = api.pkt_read_words(0, nwords)
        api.charge(per_word * nwords)
        s = int(words.astype(np.uint64).sum() & 0xFFFFFFFF)
        api.scratch_amo_add(0, s)

    def completion(api):
        api.charge(prologue)
        total = 0
        for c in range(api.num_clusters):
            total += api.scratch_read_u32(0, cluster=c)
        api.host_direct(HOST_RESULT_BASE, (total & 0xFFFFFFFF).to_bytes(4, "little"))

    ctx = ExecutionContext(
        ctx_id=0,
        flow_prefix=b"",
        payload_handler=payload,
        completion_handler=completion,
        handler_mem_bytes=64,
        scratchpad_bytes=64,
        bytes_to_l1=mtu,
    )

    def oracle(result: RunResult) -> list[str]:
        expected = int(data.astype(np.uint64).sum() & 0xFFFFFFFF)
        got = int.from_bytes(bytes(result.host.region("aggregate")[:4]), "little")
        return [] if got == expected else [f"aggregate: got {got}, expected {expected}"]

    wl = Workload("aggregate", [ctx], trace, oracle, spec)
    wl.host_regions = [("aggregate", HOST_RESULT_BASE, 64)]
    return wl


# --- histogram: value counts across messages ---------------------------------


def build_histogram(params: dict) -> Workload:
    spec = load_workload_spec("histogram") | params
    n_msgs = spec.get("n_msgs", 512)
    items = spec.get("items_per_msg", 512)
    mtu = spec.get("packet_size", 512)
    flows = spec.get("flows", 16)
    seed = spec.get("seed", 3)
    nbins = spec.get("nbins", 1025)  # values drawn from [0, 1024]
    per_word = spec.get("per_word_cycles", 2)  # index math + loop per element
    prologue = spec.get("per_packet_cycles", 10)
    msg_bytes = items * 4

    arrays = [
        _msg_rng(seed, m).integers(0, nbins, size=items, dtype=np.uint32)
        for m in range(n_msgs)
    ]

    def payload_fn(msg_id, _idx, off, chunk):
        return arrays[msg_id][off // 4 : (off + chunk) // 4].tobytes()

    trace = make_trace(n_msgs, msg_bytes, mtu, flows=flows, interleave="rr", payload_fn=payload_fn)

    hist_bytes = nbins * 4
    combine_off = (hist_bytes + 63) & ~63

    def payload(api):
        nwords = api.staged_len // 4
        api.charge(prologue)
        values = api.pkt_read_words(0, nwords)
        api.charge(per_word * nwords)
        api.scratch_add_at(0, values.astype(np.int64), nbins)

    def completion(api):
        api.charge(prologue)
        done = api.hmem_amo_add(0, 1)
        if done == n_msgs - 1:
            total = np.zeros(nbins, dtype=np.uint64)
            for c in range(api.num_clusters):
                total += api.scratch_read_words(0, nbins, cluster=c).astype(np.uint64)
            api.scratch_write_words(combine_off, (total & 0xFFFFFFFF).astype(np.uint32))
            api.dma_to_host("scratch", combine_off, hist_bytes, HOST_RESULT_BASE)

    ctx = ExecutionContext(
        ctx_id=0,
        flow_prefix=b"",
        payload_handler=payload,
        completion_handler=completion,
        handler_mem_bytes=64,
        scratchpad_bytes=combine_off + hist_bytes,
        bytes_to_l1=mtu,
    )

    def oracle(result: RunResult) -> list[str]:
        expected = np.zeros(nbins, dtype=np.uint64)
        for arr in arrays:
            expected += np.bincount(arr, minlength=nbins).astype(np.uint64)
        expected = (expected & 0xFFFFFFFF).astype(np.uint32)
        got = _u32s(bytes(result.host.region("histogram")[:hist_bytes]))
        if not np.array_equal(expected, got):
            return [f"histogram mismatch: {int((expected != got).sum())} bins"]
        return []

    wl = Workload("histogram", [ctx], trace, oracle, spec)
    wl.host_regions = [("histogram", HOST_RESULT_BASE, hist_bytes)]
    return wl


# --- filtering: hash-table match, port rewrite, copy to host -----------------

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def build_filtering(params: dict) -> Workload:
    spec = load_workload_spec("filtering") | params
    n_msgs = spec.get("n_msgs", 512)
    pkts_per_msg = spec.get("pkts_per_msg", 8)
    mtu = spec.get("packet_size", 512)
    flows = spec.get("flows", 16)
    seed = spec.get("seed", 4)
    table_entries = spec.get("table_entries", 65536)
    n_keys = spec.get("key_universe", 4096)
    hash_cycles = spec.get("hash_cycles", 24)  # 8 FNV rounds, 3 ops each
    prologue = spec.get("per_packet_cycles", 6)

    rng = np.random.Generator(np.random.PCG64(seed))
    universe = rng.integers(1, 2**63, size=n_keys, dtype=np.uint64)
    installed = universe[rng.random(n_keys) < 0.5]

    # Table image: 8 B per entry, [fingerprint u32][port u16][valid u16].
    table = bytearray(table_entries * 8)
    table_map: dict[int, int] = {}
    for key in installed:
        kb = int(key).to_bytes(8, "little")
        h = fnv1a64(kb)
        idx = h & (table_entries - 1)
        fp = (h >> 32) & 0xFFFFFFFF
        port = int(h & 0xFFFF) | 1
        table[idx * 8 : idx * 8 + 8] = (
            fp.to_bytes(4, "little") + port.to_bytes(2, "little") + b"\x01\x00"
        )
        table_map.setdefault(idx, port)

    msg_bytes = pkts_per_msg * mtu

    def payload_fn(msg_id, idx, _off, chunk):
        prng = _msg_rng(seed + 7, (msg_id << 10) | idx)
        key = int(universe[prng.integers(0, n_keys)])
        body = prng.bytes(max(0, chunk - 10))
        return key.to_bytes(8, "little") + (0).to_bytes(2, "little") + body

    trace = make_trace(n_msgs, msg_bytes, mtu, flows=flows, interleave="rr", payload_fn=payload_fn)

    out_bytes = len(trace.packets) * mtu

    def handler(api):
        api.charge(prologue)
        key = bytes(api.pkt_read_bytes(0, 8))
        api.charge(hash_cycles)
        h = fnv1a64(key)
        idx = h & (table_entries - 1)
        entry = api.hmem_read_words(idx * 8, 2)
        fp = int(entry[0])
        port_valid = int(entry[1])
        if (port_valid >> 16) == 1 and fp == ((h >> 32) & 0xFFFFFFFF):
            api.pkt_write_u16(8, port_valid & 0xFFFF)
            slot = (api.msg_id * pkts_per_msg + api.msg_offset // mtu) * mtu
            api.dma_to_host("pkt_l1", 0, min(64, api.pkt_size), HOST_RESULT_BASE + slot)
            if api.pkt_size > 64:
                api.dma_to_host(
                    "pkt_l2", 64, api.pkt_size - 64, HOST_RESULT_BASE + slot + 64
                )

    ctx = ExecutionContext(
        ctx_id=0,
        flow_prefix=b"",
        header_handler=handler,
        payload_handler=handler,
        handler_mem_bytes=table_entries * 8,
        scratchpad_bytes=64,
        bytes_to_l1=64,
        hmem_image=bytes(table),
    )

    def oracle(result: RunResult) -> list[str]:
        got = bytes(result.host.region("filtered")[:out_bytes])
        expected = bytearray(out_bytes)
        for i, p in enumerate(trace.packets):
            key = p.payload_view()[:8]
            h = fnv1a64(bytes(key))
            idx = h & (table_entries - 1)
            entry = table[idx * 8 : idx * 8 + 8]
            fp = int.from_bytes(entry[0:4], "little")
            valid = entry[6]
            if valid == 1 and fp == ((h >> 32) & 0xFFFFFFFF):
                rewritten = bytearray(p.payload_view())
                rewritten[8:10] = entry[4:6]
                slot = (p.msg_id * pkts_per_msg + p.msg_offset // mtu) * mtu
                expected[slot : slot + p.size_bytes] = rewritten
        if bytes(expected) != got:
            bad = sum(a != b for a, b in zip(bytes(expected), got))
            return [f"filtering image mismatch in {bad} bytes"]
        return []

    wl = Workload("filtering", [ctx], trace, oracle, spec)
    wl.host_regions = [("filtered", HOST_RESULT_BASE, out_bytes)]
    return wl


# --- kvstore: set-associative cache with a YCSB-style request stream ---------


def zipfian_keys(n: int, universe: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    ranks = np.arange(1, universe + 1, dtype=np.float64)
    weights = 1.0 / np.power(ranks, theta)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    draws = rng.random(n)
    return np.searchsorted(cdf, draws).astype(np.uint32) + 1


class SetAssocCache:
    """Reference 4-way set-associative cache with per-set LRU eviction."""

    def __init__(self, entries: int, ways: int) -> None:
        self.ways = ways
        self.sets = entries // ways
        self.keys = [[0] * ways for _ in range(self.sets)]
        self.valid = [[False] * ways for _ in range(self.sets)]
        self.age = [[0] * ways for _ in range(self.sets)]

    def _touch(self, s: int, w: int) -> None:
        for i in range(self.ways):
            if self.valid[s][i]:
                self.age[s][i] += 1
        self.age[s][w] = 0

    def access(self, key: int, is_write: bool) -> bool:
        s = key % self.sets
        for w in range(self.ways):
            if self.valid[s][w] and self.keys[s][w] == key:
                self._touch(s, w)
                return True
        # miss: allocate the LRU victim within the set (lowest way wins ties)
        victim = 0
        worst = -1
        for w in range(self.ways):
            if not self.valid[s][w]:
                victim = w
                break
            if self.age[s][w] > worst:
                worst = self.age[s][w]
                victim = w
        self.keys[s][victim] = key
        self.valid[s][victim] = True
        self._touch(s, victim)
        return False


def build_kvstore(params: dict) -> Workload:
    spec = load_workload_spec("kvstore") | params
    n_requests = spec.get("n_requests", 1000)
    mtu = spec.get("packet_size", 512)
    seed = spec.get("seed", 5)
    entries = spec.get("cache_entries", 500)
    ways = spec.get("associativity", 4)
    universe = spec.get("key_universe", 2000)
    theta_milli = spec.get("theta_milli", 1100)  # YCSB zipfian theta = 1.1
    probe_extra = spec.get("probe_cycles", 10)
    prologue = spec.get("per_packet_cycles", 8)

    rng = np.random.Generator(np.random.PCG64(seed))
    keys = zipfian_keys(n_requests, universe, theta_milli / 1000.0, rng)
    is_write = rng.random(n_requests) < 0.5
    sets = entries // ways

    def payload_fn(_msg, idx, _off, chunk):
        op = 1 if is_write[idx] else 0
        key = int(keys[idx])
        value = (key * 2654435761) & 0xFFFFFFFFFFFFFFFF
        rec = op.to_bytes(4, "little") + key.to_bytes(4, "little") + value.to_bytes(8, "little")
        return rec + bytes(max(0, chunk - len(rec)))

    trace = make_trace(1, n_requests * mtu, mtu, payload_fn=payload_fn)

    # Handler-memory layout: cache sets, then the outcome log.
    way_bytes = 16  # [key u32][valid u32][value u32 x2]
    cache_bytes = sets * ways * way_bytes
    log_off = (cache_bytes + 63) & ~63

    def payload(api):
        api.charge(prologue)
        op = api.pkt_read_u32(0)
        key = api.pkt_read_u32(4)
        api.charge(probe_extra)  # set index math and way select
        s = key % sets
        base = s * ways * way_bytes
        hit_way = -1
        empty_way = -1
        worst_age = -1
        victim = 0
        for w in range(ways):
            tag = api.hmem_read_u32(base + w * way_bytes)
            meta = api.hmem_read_u32(base + w * way_bytes + 4)
            valid = meta & 1
            age = meta >> 1
            if valid and tag == key:
                hit_way = w
                break
            if not valid and empty_way < 0:
                empty_way = w
            if valid and age > worst_age:
                worst_age = age
                victim = w
        seq = api.msg_offset // mtu
        if hit_way >= 0:
            w = hit_way
            if op == 1:
                api.hmem_write_u32(base + w * way_bytes + 8, api.pkt_read_u32(8))
                api.hmem_write_u32(base + w * way_bytes + 12, api.pkt_read_u32(12))
            else:
                value = api.hmem_read_u32(base + w * way_bytes + 8)
                api.scratch_write_u32((seq % 16) * 4, value)
                api.put_scratch((seq % 16) * 4, 4)
            outcome = 1
        else:
            w = empty_way if empty_way >= 0 else victim
            api.hmem_write_u32(base + w * way_bytes, key)
            api.hmem_write_u32(base + w * way_bytes + 8, api.pkt_read_u32(8))
            api.hmem_write_u32(base + w * way_bytes + 12, api.pkt_read_u32(12))
            outcome = 0
        # refresh ages across the set (single metadata word per way)
        for w2 in range(ways):
            meta = api.hmem_read_u32(base + w2 * way_bytes + 4)
            if w2 == w:
                api.hmem_write_u32(base + w2 * way_bytes + 4, 1)
            elif meta & 1:
                api.hmem_write_u32(base + w2 * way_bytes + 4, ((meta >> 1) + 1) << 1 | 1)
        api.hmem_write_u32(log_off + seq * 4, outcome)

    def completion(api):
        api.charge(prologue)
        api.dma_to_host("hmem", log_off, n_requests * 4, HOST_RESULT_BASE)

    ctx = ExecutionContext(
        ctx_id=0,
        flow_prefix=b"",
        payload_handler=payload,
        completion_handler=completion,
        handler_mem_bytes=log_off + ((n_requests * 4 + 63) & ~63),
        scratchpad_bytes=128,
        bytes_to_l1=64,
    )

    def oracle(result: RunResult) -> list[str]:
        ref = SetAssocCache(sets * ways, ways)
        expected = [1 if ref.access(int(keys[i]), bool(is_write[i])) else 0 for i in range(n_requests)]
        got = _u32s(bytes(result.host.region("kv_log")[: n_requests * 4])).tolist()
        if expected != got:
            diff = sum(1 for a, b in zip(expected, got) if a != b)
            return [f"kvstore hit/miss sequence differs at {diff} of {n_requests} requests"]
        return []

    wl = Workload("kvstore", [ctx], trace, oracle, spec)
    wl.host_regions = [("kv_log", HOST_RESULT_BASE, n_requests * 4)]
    return wl


# --- strided_ddt: blocked/strided scatter to host memory ---------------------


def build_strided_ddt(params: dict) -> Workload:
    spec = load_workload_spec("strided_ddt") | params
    msg_bytes = spec.get("msg_bytes", 1024 * 1024)
    mtu = spec.get("packet_size", 512)
    block = spec.get("block_bytes", 256)
    stride = spec.get("stride_bytes", 512)
    seed = spec.get("seed", 6)
    per_block = spec.get("per_block_cycles", 4)
    prologue = spec.get("per_packet_cycles", 6)

    rng = np.random.Generator(np.random.PCG64(seed))
    data = rng.bytes(msg_bytes)

    def payload_fn(_msg, _idx, off, chunk):
        return data[off : off + chunk]

    trace = make_trace(1, msg_bytes, mtu, payload_fn=payload_fn)
    out_bytes = (msg_bytes // block) * stride

    def host_addr(msg_off: int) -> int:
        return HOST_RESULT_BASE + (msg_off // block) * stride + (msg_off % block)

    def payload(api):
        api.charge(prologue)
        blk = api.hmem_read_u32(0)
        api.hmem_read_u32(4)  # stride, part of the layout descriptor
        off = api.msg_offset
        end = off + api.pkt_size
        while off < end:
            seg = min(end, (off // blk + 1) * blk) - off
            api.charge(per_block)
            api.dma_to_host("pkt_l2", off - api.msg_offset, seg, host_addr(off))
            off += seg

    ctx = ExecutionContext(
        ctx_id=0,
        flow_prefix=b"",
        payload_handler=payload,
        handler_mem_bytes=64,
        scratchpad_bytes=64,
        bytes_to_l1=0,
        hmem_image=block.to_bytes(4, "little") + stride.to_bytes(4, "little"),
    )

    def oracle(result: RunResult) -> list[str]:
        expected = bytearray(out_bytes)
        for off in range(0, msg_bytes, block):
            expected[(off // block) * stride : (off // block) * stride + block] = data[
                off : off + block
            ]
        got = bytes(result.host.region("ddt_out")[:out_bytes])
        if bytes(expected) != got:
            bad = sum(a != b for a, b in zip(bytes(expected), got))
            return [f"strided image mismatch in {bad} bytes"]
        return []

    wl = Workload("strided_ddt", [ctx], trace, oracle, spec)
    wl.host_regions = [("ddt_out", HOST_RESULT_BASE, out_bytes)]
    return wl


# --- microbenchmarks ----------------------------------------------------------


def build_synthetic(params: dict) -> Workload:
    spec = load_workload_spec("synthetic") | params
    x = spec.get("instructions", 0)
    mtu = spec.get("packet_size", 64)
    n_msgs = spec.get("n_msgs", 96)
    msg_pkts = spec.get("pkts_per_msg", 512)
    flows = spec.get("flows", 16)
    misaligned = spec.get("misaligned", 0)
    size = mtu + 1 if misaligned else mtu

    trace = make_trace(n_msgs, size * msg_pkts, size, flows=flows, interleave="rr")

    def handler(api):
        if x:
            api.charge(x)

    ctx = ExecutionContext(
        ctx_id=0,
        flow_prefix=b"",
        header_handler=handler,
        payload_handler=handler,
        completion_handler=handler,
        scratchpad_bytes=64,
        handler_mem_bytes=64,
        bytes_to_l1=size,
    )
    return Workload("synthetic", [ctx], trace, lambda result: [], spec)


def build_pingpong(params: dict) -> Workload:
    spec = load_workload_spec("pingpong") | params
    mtu = spec.get("packet_size", 64)
    npkts = spec.get("n_packets", 4096)
    seed = spec.get("seed", 7)
    from_l1 = bool(spec.get("from_l1", 1))
    swap_cycles = spec.get("swap_cycles", 20)  # includes its 6 word accesses
    rate = spec.get("rate_gbps", 400)

    rng = np.random.Generator(np.random.PCG64(seed))
    heads = [rng.bytes(12) for _ in range(min(npkts, 256))]

    def payload_fn(msg_id, _idx, _off, chunk):
        head = heads[msg_id % len(heads)]
        return head + bytes(max(0, chunk - 12))

    trace = make_trace(npkts, mtu, mtu, flows=64, interleave="rr", payload_fn=payload_fn)

    def handler(api):
        a = api.pkt_read_u32(0)
        b = api.pkt_read_u32(4)
        api.pkt_write_u32(0, b)
        api.pkt_write_u32(4, a)
        ports = api.pkt_read_u32(8)
        api.pkt_write_u32(8, ((ports & 0xFFFF) << 16) | (ports >> 16))
        api.charge(swap_cycles - 6)
        api.put_packet(from_l1=from_l1)

    ctx = ExecutionContext(
        ctx_id=0,
        flow_prefix=b"",
        header_handler=handler,
        scratchpad_bytes=64,
        handler_mem_bytes=64,
        bytes_to_l1=mtu,
    )

    def oracle(result: RunResult) -> list[str]:
        problems = []
        if not from_l1:
            return []  # sent bytes are the pristine L2 copy by design
        for i, sent in enumerate(result.sent_packets[:64]):
            orig = trace.packets[i].payload_view()
            exp = orig[4:8] + orig[0:4] + orig[10:12] + orig[8:10] + orig[12:]
            if bytes(sent) != bytes(exp):
                problems.append(f"pingpong echo {i} not swapped")
        return problems

    wl = Workload("pingpong", [ctx], trace, oracle, spec, rate_gbps=rate)
    return wl


_BUILDERS = {
    "reduce": build_reduce,
    "aggregate": build_aggregate,
    "filtering": build_filtering,
    "kvstore": build_kvstore,
    "strided_ddt": build_strided_ddt,
    "histogram": build_histogram,
    "synthetic": build_synthetic,
    "pingpong": build_pingpong,
}


def build(name: str, params: dict | None = None) -> Workload:
    """Assemble (contexts, trace, oracle) for a named workload."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown workload {name!r}; choose from {sorted(_BUILDERS)}")
    wl = _BUILDERS[name](dict(params or {}))
    return wl


def run_workload(
    name: str,
    params: dict | None = None,
    cfg: PsPINConfig | None = None,
) -> RunResult:
    return build(name, params).run(cfg)
