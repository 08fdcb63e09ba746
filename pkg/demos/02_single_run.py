"""One simulation, read through its event log and report."""

# %%
from dtnopt.engine import ScenarioConfig, Simulation
from dtnopt.metrics import report_from_log
from dtnopt.trace import generate_synthetic_trace

trace = generate_synthetic_trace(10, duration=600, world_w=300, world_h=300,
                                 speed=(1, 5), seed=3)
cfg = ScenarioConfig(router="Epidemic", transmit_range=30, transmit_speed=250,
                     event_interval=10, event_size=35, msg_ttl=1800, seed=0)
sim = Simulation(cfg, trace).run()

# %%
# Every event is a line "time kind message from to".
print(sim.log.to_text().splitlines()[:8])

# %%
rep = report_from_log(sim.log)
print(rep.to_text())
# Where each message ended up.
print(sim.accounting())
