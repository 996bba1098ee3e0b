import datetime as dt

import numpy as np
import pytest

from quakenet.catalog import CatalogRecord
from quakenet.features import DatasetSplit, Sample

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _rec(date, mag, zone="GUERRERO", lat=16.45, lon=-98.72, depth=10.0, time=(10, 15, 30)):
    return CatalogRecord(dt.date.fromisoformat(date), dt.time(*time), lat, lon, depth, mag, zone)


@pytest.fixture
def fixture_records():
    """Ten records spanning 2005-2014; four have magnitude above 4.0."""
    return [
        _rec("2005-06-01", 3.9),
        _rec("2006-03-01", 4.5, "OAXACA"),
        _rec("2006-03-02", 4.0),
        _rec("2007-11-20", 5.2, "CHIAPAS"),
        _rec("2009-01-15", 3.1),
        _rec("2010-07-04", 4.01, "JALISCO"),
        _rec("2012-02-29", 2.8),
        _rec("2013-05-01", 3.5, "OAXACA"),
        _rec("2013-05-02", 6.3),
        _rec("2014-09-09", 4.0, "CHIAPAS"),
    ]


def make_split(rng, n=(30, 20, 10), d=3, o=2, fn=None):
    """Scaled split with targets ``fn(inputs)`` (random if fn is None)."""
    parts, idx = [], 0
    for size in n:
        samples = []
        for _ in range(size):
            x = rng.random(d)
            t = fn(x) if fn is not None else rng.random(o)
            samples.append(Sample(inputs=x, targets_raw=np.array(t, dtype=float), source_index=idx,
                                  targets_normalized=np.array(t, dtype=float)))
            idx += 1
        parts.append(samples)
    return DatasetSplit(*parts)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
