from pspin_sim import ExecutionContext, PsPINConfig, Simulation


def noop(api):
    pass


def empty_ctx(bytes_to_l1=64, **kw):
    base = dict(
        ctx_id=0,
        flow_prefix=b"",
        header_handler=noop,
        payload_handler=noop,
        completion_handler=noop,
        scratchpad_bytes=256,
        handler_mem_bytes=256,
        bytes_to_l1=bytes_to_l1,
    )
    base.update(kw)
    return ExecutionContext(**base)


def quick_run(trace, ctx=None, cfg=None, rate=None):
    sim = Simulation(cfg or PsPINConfig(), [ctx or empty_ctx()], trace, rate)
    return sim.run()
