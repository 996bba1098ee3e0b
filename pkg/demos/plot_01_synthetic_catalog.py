"""
Exploring a synthetic seismic catalog
=====================================

Generate a random catalog inside the default region, write it to CSV, read it
back and filter it the way the ingestion step does.
"""

import io

import numpy as np

from quakenet.catalog import (
    DEFAULT_REGION,
    filter_records,
    generate_synthetic_catalog,
    parse_catalog,
    write_catalog,
)

records = generate_synthetic_catalog(seed=1, count=500)
print(f"{len(records)} events from {records[0].date} to {records[-1].date}")

# magnitudes follow a truncated exponential law above the floor
mags = np.array([r.magnitude for r in records])
print("magnitude min/median/max:", mags.min().round(2), np.median(mags).round(2), mags.max().round(2))
counts, edges = np.histogram(mags, bins=np.arange(4.0, 9.0, 0.5))
for lo, n in zip(edges, counts):
    print(f"  [{lo:.1f}, {lo + 0.5:.1f})  {'#' * (n // 5)} {n}")

# every zone gets its own cell of the region
for zone in DEFAULT_REGION.zone_names:
    n = sum(r.zone == zone for r in records)
    print(f"{zone:<10} {n:4d} events")

# round trip through the CSV format
buf = io.StringIO()
write_catalog(records, buf)
buf.seek(0)
back = parse_catalog(buf)
assert back == records
print("CSV round trip ok, first lines:")
print("\n".join(buf.getvalue().splitlines()[:3]))

# a malformed row is skipped (and remembered) in lenient mode
text = buf.getvalue() + "2013-05-01,10:15:30,95.0,-98.72,10.0,4.3,GUERRERO\n"
lenient = parse_catalog(io.StringIO(text))
print(f"lenient parse kept {len(lenient)} rows, skipped {len(lenient.skipped)}:", lenient.skipped[0][1])

strong = filter_records(records, min_magnitude=5.0)
print(f"{len(strong)} events above magnitude 5.0")
