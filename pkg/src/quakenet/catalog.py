"""Seismic catalog records: CSV parsing/writing, filtering and synthetic catalogs.

The on-disk format is a UTF-8 CSV with the header::

    date,time,latitude,longitude,depth_km,magnitude,zone
"""
import csv
import datetime as dt
import io
import math
from dataclasses import dataclass

import numpy as np

CATALOG_COLUMNS = ("date", "time", "latitude", "longitude", "depth_km", "magnitude", "zone")


class CatalogError(ValueError):
    pass


class MissingHeader(CatalogError):
    pass


class MalformedRow(CatalogError):
    def __init__(self, row, field, reason=""):
        self.row = row
        self.field = field
        msg = f"row {row}: invalid field {field!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class EmptyField(MalformedRow):
    def __init__(self, row, field):
        super().__init__(row, field, "empty")


class InvalidRange(CatalogError):
    pass


class InvalidRecord(CatalogError):
    def __init__(self, field, value):
        self.field = field
        super().__init__(f"invalid {field}: {value!r}")


@dataclass(frozen=True)
class CatalogRecord:
    """One seismic event.

    ``time`` keeps seconds even though only hour and minute feed the encoder.
    """

    date: dt.date
    time: dt.time
    latitude: float
    longitude: float
    depth: float
    magnitude: float
    zone: str

    def __post_init__(self):
        bad = invalid_field(self)
        if bad is not None:
            raise InvalidRecord(bad, getattr(self, bad))


def invalid_field(rec):
    """Name of the first field violating record invariants, or None."""
    if not isinstance(rec.date, dt.date) or isinstance(rec.date, dt.datetime):
        return "date"
    if not isinstance(rec.time, dt.time):
        return "time"
    if not (math.isfinite(rec.latitude) and -90.0 <= rec.latitude <= 90.0):
        return "latitude"
    if not (math.isfinite(rec.longitude) and -180.0 <= rec.longitude <= 180.0):
        return "longitude"
    if not (math.isfinite(rec.depth) and rec.depth >= 0.0):
        return "depth"
    if not (math.isfinite(rec.magnitude) and 0.0 < rec.magnitude <= 10.0):
        return "magnitude"
    if not rec.zone or any(c in rec.zone for c in ",\r\n"):
        return "zone"
    return None


class RecordList(list):
    """List of records returned by :func:`parse_catalog`.

    ``skipped`` holds ``(row_number, error)`` for rows dropped in non-strict mode.
    """

    def __init__(self, records=(), skipped=None):
        super().__init__(records)
        self.skipped = list(skipped or [])


def _parse_row(values, row_number):
    if len(values) != len(CATALOG_COLUMNS):
        raise MalformedRow(row_number, "row", f"expected {len(CATALOG_COLUMNS)} fields, got {len(values)}")
    for col, raw in zip(CATALOG_COLUMNS, values):
        if raw.strip() == "":
            raise EmptyField(row_number, col)
    date_s, time_s, lat_s, lon_s, depth_s, mag_s, zone_s = (v.strip() for v in values)
    try:
        date = dt.date.fromisoformat(date_s)
    except ValueError:
        raise MalformedRow(row_number, "date", date_s) from None
    try:
        time = dt.datetime.strptime(time_s, "%H:%M:%S").time()
    except ValueError:
        raise MalformedRow(row_number, "time", time_s) from None
    nums = []
    for col, raw in zip(CATALOG_COLUMNS[2:6], (lat_s, lon_s, depth_s, mag_s)):
        try:
            nums.append(float(raw))
        except ValueError:
            raise MalformedRow(row_number, col, raw) from None
    try:
        return CatalogRecord(date, time, *nums, zone_s)
    except InvalidRecord as exc:
        col = "depth_km" if exc.field == "depth" else exc.field
        raise MalformedRow(row_number, col, "out of range") from None


def parse_catalog(source, strict=False):
    """Parse a catalog CSV from a text stream (or a string).

    Row numbers in errors count the header as row 1. In non-strict mode bad
    rows are skipped and reported via ``RecordList.skipped``.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeader("catalog is empty (no header line)") from None
    if tuple(h.strip() for h in header) != CATALOG_COLUMNS:
        raise MissingHeader(f"expected header {','.join(CATALOG_COLUMNS)!r}, got {','.join(header)!r}")

    out = RecordList()
    for row_number, values in enumerate(reader, start=2):
        if not values:
            continue
        try:
            out.append(_parse_row(values, row_number))
        except MalformedRow as exc:
            if strict:
                raise
            out.skipped.append((row_number, exc))
    return out


def _fmt_float(x):
    return repr(float(x))


def write_catalog(records, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CATALOG_COLUMNS)
    for r in records:
        writer.writerow([
            r.date.isoformat(),
            r.time.strftime("%H:%M:%S"),
            _fmt_float(r.latitude),
            _fmt_float(r.longitude),
            _fmt_float(r.depth),
            _fmt_float(r.magnitude),
            r.zone,
        ])


def catalog_to_string(records):
    buf = io.StringIO()
    write_catalog(records, buf)
    return buf.getvalue()


def read_catalog_file(path, strict=False):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_catalog(fh, strict=strict)


def write_catalog_file(records, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_catalog(records, fh)


def filter_records(records, min_magnitude=4.0, date_range=None):
    """Keep records with magnitude strictly above ``min_magnitude``.

    ``date_range`` is an inclusive ``(start, end)`` pair of dates.
    """
    if not min_magnitude > 0:
        raise ValueError("min_magnitude must be positive")
    if date_range is not None:
        start, end = date_range
        if start > end:
            raise InvalidRange(f"date range start {start} is after end {end}")
    out = []
    for r in records:
        if not r.magnitude > min_magnitude:
            continue
        if date_range is not None and not (start <= r.date <= end):
            continue
        out.append(r)
    return out


@dataclass(frozen=True)
class Region:
    """Bounding box split into a grid of named zones, plus a magnitude law.

    ``zones`` rows run south to north, columns west to east.
    """

    lat_min: float = 14.0
    lat_max: float = 22.0
    lon_min: float = -106.0
    lon_max: float = -92.0
    zones: tuple = (
        ("GUERRERO", "OAXACA", "CHIAPAS"),
        ("JALISCO", "MICHOACAN", "VERACRUZ"),
    )
    start_date: dt.date = dt.date(2006, 3, 2)
    end_date: dt.date = dt.date(2013, 5, 1)
    max_depth: float = 200.0
    mean_depth: float = 25.0
    magnitude_floor: float = 4.0
    magnitude_rate: float = 2.0
    magnitude_cap: float = 8.5

    def __post_init__(self):
        if not (-90 <= self.lat_min < self.lat_max <= 90):
            raise ValueError("bad latitude bounds")
        if not (-180 <= self.lon_min < self.lon_max <= 180):
            raise ValueError("bad longitude bounds")
        if not self.zones or not self.zones[0] or len({len(r) for r in self.zones}) != 1:
            raise ValueError("zones must be a non-empty rectangular grid")
        if self.start_date > self.end_date:
            raise InvalidRange("start_date after end_date")
        if not (0 < self.magnitude_floor < self.magnitude_cap <= 10):
            raise ValueError("bad magnitude bounds")

    @property
    def zone_names(self):
        return [z for row in self.zones for z in row]

    def cell_of(self, lat, lon):
        nrow, ncol = len(self.zones), len(self.zones[0])
        i = min(int((lat - self.lat_min) / (self.lat_max - self.lat_min) * nrow), nrow - 1)
        j = min(int((lon - self.lon_min) / (self.lon_max - self.lon_min) * ncol), ncol - 1)
        return max(i, 0), max(j, 0)

    def cell_bounds(self, i, j):
        nrow, ncol = len(self.zones), len(self.zones[0])
        dlat = (self.lat_max - self.lat_min) / nrow
        dlon = (self.lon_max - self.lon_min) / ncol
        return (self.lat_min + i * dlat, self.lat_min + (i + 1) * dlat,
                self.lon_min + j * dlon, self.lon_min + (j + 1) * dlon)


DEFAULT_REGION = Region()


def truncated_exponential_magnitudes(rng, count, floor, rate, cap):
    """Inverse-CDF draws on (floor, cap] with density proportional to exp(-rate*(m - floor))."""
    u = 1.0 - rng.random(count)  # (0, 1]
    span = 1.0 - math.exp(-rate * (cap - floor))
    m = floor - np.log1p(-u * span) / rate
    # u near 0 can round to exactly the floor; nudge to keep the inequality strict
    return np.maximum(m, np.nextafter(floor, np.inf))


def _random_dates_times(rng, count, region):
    span_days = (region.end_date - region.start_date).days
    days = rng.integers(0, span_days + 1, size=count)
    secs = rng.integers(0, 86400, size=count)
    return days, secs


def _make_record(region, day, sec, lat, lon, depth, mag, zone):
    sec = int(sec)
    return CatalogRecord(
        date=region.start_date + dt.timedelta(days=int(day)),
        time=dt.time(sec // 3600, (sec // 60) % 60, sec % 60),
        latitude=float(lat),
        longitude=float(lon),
        depth=float(depth),
        magnitude=float(mag),
        zone=zone,
    )


def _sorted(records):
    return sorted(records, key=lambda r: (r.date, r.time))


def generate_synthetic_catalog(seed, count, region=DEFAULT_REGION):
    """Random catalog inside ``region``, sorted chronologically.

    Magnitudes follow a truncated exponential law above the region's floor;
    the zone label is the grid cell containing the epicentre.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    rng = np.random.default_rng(seed)
    days, secs = _random_dates_times(rng, count, region)
    lat = rng.uniform(region.lat_min, region.lat_max, size=count)
    lon = rng.uniform(region.lon_min, region.lon_max, size=count)
    depth = np.minimum(rng.exponential(region.mean_depth, size=count), region.max_depth)
    mag = truncated_exponential_magnitudes(
        rng, count, region.magnitude_floor, region.magnitude_rate, region.magnitude_cap)
    records = []
    for k in range(count):
        i, j = region.cell_of(lat[k], lon[k])
        records.append(_make_record(region, days[k], secs[k], lat[k], lon[k], depth[k], mag[k], region.zones[i][j]))
    return _sorted(records)


def generate_learnable_catalog(seed, count, region=DEFAULT_REGION, noise=0.01):
    """Catalog whose latitude, longitude and magnitude are smooth functions of
    date, hour and zone, plus Gaussian noise with std ``noise`` times each
    variable's full range. Used to check that training can actually learn.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    rng = np.random.default_rng(seed)
    days, secs = _random_dates_times(rng, count, region)
    span_days = max((region.end_date - region.start_date).days, 1)
    nrow, ncol = len(region.zones), len(region.zones[0])
    cells = rng.integers(0, nrow * ncol, size=count)
    depth = np.minimum(rng.exponential(region.mean_depth, size=count), region.max_depth)

    t = days / span_days
    hr = (secs // 3600) / 23.0
    lat_range = region.lat_max - region.lat_min
    lon_range = region.lon_max - region.lon_min
    mag_lo, mag_hi = region.magnitude_floor, region.magnitude_cap
    eps = 1e-6

    records = []
    for k in range(count):
        i, j = divmod(int(cells[k]), ncol)
        la0, la1, lo0, lo1 = region.cell_bounds(i, j)
        frac_lat = 0.5 + 0.3 * math.sin(2 * math.pi * t[k]) + 0.1 * math.cos(math.pi * hr[k])
        frac_lon = 0.5 + 0.3 * math.cos(2 * math.pi * t[k]) - 0.1 * math.sin(math.pi * hr[k])
        lat = la0 + (la1 - la0) * frac_lat + noise * lat_range * rng.standard_normal()
        lon = lo0 + (lo1 - lo0) * frac_lon + noise * lon_range * rng.standard_normal()
        z = cells[k] / max(nrow * ncol - 1, 1)
        frac_mag = 0.4 + 0.25 * math.sin(math.pi * hr[k] + 2.0 * z) + 0.15 * t[k]
        mag = mag_lo + (mag_hi - mag_lo) * frac_mag + noise * (mag_hi - mag_lo) * rng.standard_normal()
        lat = min(max(lat, la0), la1 - eps)
        lon = min(max(lon, lo0), lo1 - eps)
        mag = min(max(mag, mag_lo + 1e-3), mag_hi)
        records.append(_make_record(region, days[k], secs[k], lat, lon, depth[k], mag, region.zones[i][j]))
    return _sorted(records)
