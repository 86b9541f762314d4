import pytest

from pspin_sim import ExecutionContext, PsPINConfig, load_config, save_config, validate
from pspin_sim.config import ConfigError, validate_contexts


def test_default_config_is_reference_shape():
    cfg = PsPINConfig()
    assert validate(cfg) == []
    assert cfg.total_hpus == 32
    assert cfg.l2_pkt_buffer_bytes == 4 * 1024 * 1024
    assert cfg.l1_pkt_region_bytes == 32 * 1024


def test_l1_partition_must_sum():
    cfg = PsPINConfig(l1_scratchpad_bytes=985 * 1024)
    problems = validate(cfg)
    assert any("partition" in p for p in problems)


def test_doubled_clusters_scale():
    cfg = PsPINConfig(num_clusters=8)
    assert validate(cfg) == []
    assert cfg.total_hpus == 64


def test_power_of_two_sizes_enforced():
    assert any("power of two" in p for p in validate(PsPINConfig(l2_pkt_banks=24)))


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "pspin.cfg"
    cfg = PsPINConfig(num_clusters=8, dma_base_cycles=9)
    save_config(cfg, str(path))
    loaded = load_config(str(path))
    assert loaded == cfg


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[pspin]\nnum_clusters = 4\nwarp_factor = 9\n")
    with pytest.raises(ConfigError, match="warp_factor"):
        load_config(str(path))


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[general]\nnum_clusters = 4\n")
    with pytest.raises(ConfigError, match="general"):
        load_config(str(path))


def test_context_needs_some_handler():
    ctx = ExecutionContext(ctx_id=0, flow_prefix=b"")
    problems = validate_contexts(PsPINConfig(), [ctx])
    assert any("handler" in p for p in problems)


def test_context_regions_must_not_overlap():
    def h(api):
        pass

    a = ExecutionContext(
        ctx_id=0, flow_prefix=b"a", payload_handler=h, handler_mem_base=0, handler_mem_bytes=128
    )
    b = ExecutionContext(
        ctx_id=1, flow_prefix=b"b", payload_handler=h, handler_mem_base=64, handler_mem_bytes=128
    )
    problems = validate_contexts(PsPINConfig(), [a, b])
    assert any("overlap" in p for p in problems)
