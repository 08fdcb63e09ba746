"""Movement traces: generate, write, read back, and convert GPS fixes."""

# %%
import io
from datetime import date, datetime, timezone

from dtnopt.trace import (GeoBounds, GeoFix, convert_taxi_dataset, generate_synthetic_trace,
                          parse_external_trace, write_external_trace)

# A random-waypoint walk for five nodes, one sample per second.
samples = generate_synthetic_trace(5, duration=60, world_w=500, world_h=500,
                                   speed=(2, 8), seed=1)
text = write_external_trace(samples)
print(text.splitlines()[0], "<- header: minTime maxTime minX maxX minY maxY")
print("\n".join(text.splitlines()[1:4]))

# %%
# Parsing the text gives back the same samples, bit for bit.
bounds, again = parse_external_trace(io.StringIO(text))
print("round trip exact:", again == samples, "| bounds:", bounds.as_tuple())

# %%
# Taxi fixes are filtered to one day, projected onto a flat world and
# given dense ids. Cabs that show up late get a start position at the
# earliest timestamp so the simulator knows where they are from the start.
t = lambda h: datetime(2008, 5, 21, h, tzinfo=timezone.utc).timestamp()
fixes = [GeoFix("cab_b", 37.77, -122.42, t(8)), GeoFix("cab_a", 37.75, -122.45, t(9)),
         GeoFix("cab_b", 37.78, -122.41, t(10))]
geo = GeoBounds(37.70, 37.82, -122.52, -122.35)
for s in convert_taxi_dataset(fixes, date(2008, 5, 21), geo, 10_000, 10_000, seed=0):
    print(s)
