"""Input/target encoding, min-max scaling and dataset segmentation."""
import datetime as dt
import math
from dataclasses import dataclass, field, replace

import numpy as np

INPUT_VARIABLES = ("date", "hour", "minute", "zone")
OUTPUT_VARIABLES = ("latitude", "longitude", "depth", "magnitude")
DEFAULT_OUTPUTS = ("latitude", "longitude", "magnitude")
OTHER_ZONE = "OTHER"


class FeatureError(ValueError):
    pass


class UnknownZone(FeatureError):
    pass


class DegenerateVariable(FeatureError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"variable {name!r} has max == min; cannot scale")


class EmptySampleSet(FeatureError):
    pass


class CountMismatch(FeatureError):
    pass


class EmptyInput(FeatureError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    zone_vocabulary: tuple
    input_variables: tuple = INPUT_VARIABLES
    output_variables: tuple = DEFAULT_OUTPUTS
    epoch_origin: dt.date = dt.date(2006, 3, 2)
    unknown_zone: str = "reject"  # or "other": extra one-hot slot

    def __post_init__(self):
        for name, vals, allowed in (
            ("input_variables", self.input_variables, INPUT_VARIABLES),
            ("output_variables", self.output_variables, OUTPUT_VARIABLES),
        ):
            if not vals:
                raise FeatureError(f"{name} must be non-empty")
            if len(set(vals)) != len(vals):
                raise FeatureError(f"{name} has duplicates")
            unknown = set(vals) - set(allowed)
            if unknown:
                raise FeatureError(f"{name}: unknown {sorted(unknown)}")
        if len(set(self.zone_vocabulary)) != len(self.zone_vocabulary):
            raise FeatureError("zone_vocabulary has duplicates")
        if "zone" in self.input_variables and not self.zone_vocabulary:
            raise FeatureError("zone input requires a zone_vocabulary")
        if self.unknown_zone not in ("reject", "other"):
            raise FeatureError("unknown_zone must be 'reject' or 'other'")

    @property
    def zone_slots(self):
        slots = list(self.zone_vocabulary)
        if self.unknown_zone == "other":
            slots.append(OTHER_ZONE)
        return slots

    @property
    def input_names(self):
        names = []
        for v in self.input_variables:
            if v == "zone":
                names.extend(f"zone:{z}" for z in self.zone_slots)
            else:
                names.append(v)
        return names

    @property
    def input_width(self):
        return len(self.input_names)

    @property
    def output_width(self):
        return len(self.output_variables)

    def to_dict(self):
        return {
            "input_variables": list(self.input_variables),
            "output_variables": list(self.output_variables),
            "zone_vocabulary": list(self.zone_vocabulary),
            "epoch_origin": self.epoch_origin.isoformat(),
            "unknown_zone": self.unknown_zone,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "epoch_origin" in d and isinstance(d["epoch_origin"], str):
            d["epoch_origin"] = dt.date.fromisoformat(d["epoch_origin"])
        for k in ("input_variables", "output_variables", "zone_vocabulary"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class Sample:
    """Encoded sample. ``targets_normalized`` is None until a scaler is applied."""

    inputs: np.ndarray
    targets_raw: np.ndarray
    source_index: int
    targets_normalized: np.ndarray = None


def encode_records(records, config):
    """Encode records into raw (unscaled) samples, preserving order."""
    slot_of = {z: k for k, z in enumerate(config.zone_slots)}
    n_slots = len(slot_of)
    out = []
    for idx, rec in enumerate(records):
        row = []
        for v in config.input_variables:
            if v == "date":
                row.append(float((rec.date - config.epoch_origin).days))
            elif v == "hour":
                row.append(float(rec.time.hour))
            elif v == "minute":
                row.append(float(rec.time.minute))
            else:
                slot = slot_of.get(rec.zone)
                if slot is None:
                    if config.unknown_zone == "reject":
                        raise UnknownZone(f"record {idx}: zone {rec.zone!r} not in vocabulary")
                    slot = slot_of[OTHER_ZONE]
                onehot = [0.0] * n_slots
                onehot[slot] = 1.0
                row.extend(onehot)
        targets = [float(getattr(rec, v)) for v in config.output_variables]
        out.append(Sample(np.array(row), np.array(targets), idx))
    return out


@dataclass
class ScalerParams:
    input_names: list
    input_min: np.ndarray
    input_max: np.ndarray
    target_names: list
    target_min: np.ndarray
    target_max: np.ndarray

    def to_dict(self):
        # lists, not name-keyed maps: variable order must survive sorted JSON dumps
        return {
            "inputs": {"names": list(self.input_names), "min": self.input_min.tolist(),
                       "max": self.input_max.tolist()},
            "targets": {"names": list(self.target_names), "min": self.target_min.tolist(),
                        "max": self.target_max.tolist()},
        }

    @classmethod
    def from_dict(cls, d):
        i, t = d["inputs"], d["targets"]
        return cls(list(i["names"]), np.array(i["min"], dtype=float), np.array(i["max"], dtype=float),
                   list(t["names"]), np.array(t["min"], dtype=float), np.array(t["max"], dtype=float))


def fit_scaler(samples, config=None):
    """Per-variable min/max over ``samples``.

    With a ``config``, one-hot zone columns get a fixed [0, 1] range instead of
    being fitted (a zone may be absent from a split without making it degenerate).
    """
    if not samples:
        raise EmptySampleSet("cannot fit a scaler on zero samples")
    X = np.stack([s.inputs for s in samples])
    T = np.stack([s.targets_raw for s in samples])
    if config is not None:
        in_names = config.input_names
        t_names = list(config.output_variables)
    else:
        in_names = [f"x{k}" for k in range(X.shape[1])]
        t_names = [f"y{k}" for k in range(T.shape[1])]
    in_min, in_max = X.min(axis=0), X.max(axis=0)
    fixed = np.array([n.startswith("zone:") for n in in_names])
    in_min[fixed] = 0.0
    in_max[fixed] = 1.0
    t_min, t_max = T.min(axis=0), T.max(axis=0)
    for names, lo, hi in ((in_names, in_min, in_max), (t_names, t_min, t_max)):
        for n, a, b in zip(names, lo, hi):
            if not b > a:
                raise DegenerateVariable(n)
    return ScalerParams(in_names, in_min, in_max, t_names, t_min, t_max)


def scale_inputs(params, X):
    return (np.asarray(X, dtype=float) - params.input_min) / (params.input_max - params.input_min)


def scale_targets(params, T):
    return (np.asarray(T, dtype=float) - params.target_min) / (params.target_max - params.target_min)


def invert_scaler(params, y_normalized):
    """Map normalized target vector(s) back to raw units."""
    y = np.asarray(y_normalized, dtype=float)
    return y * (params.target_max - params.target_min) + params.target_min


def apply_scaler(params, sample):
    return replace(
        sample,
        inputs=scale_inputs(params, sample.inputs),
        targets_normalized=scale_targets(params, sample.targets_raw),
    )


@dataclass
class DatasetSplit:
    training: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    production: list = field(default_factory=list)

    NAMES = ("training", "validation", "production")

    def __getitem__(self, name):
        if name not in self.NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def sizes(self):
        return tuple(len(self[n]) for n in self.NAMES)

    def indices(self):
        return {n: [s.source_index for s in self[n]] for n in self.NAMES}

    def map(self, fn):
        return DatasetSplit(*([fn(s) for s in self[n]] for n in self.NAMES))


def stack(samples):
    """Stack samples into ``(inputs, normalized targets)`` matrices."""
    X = np.stack([s.inputs for s in samples])
    T = np.stack([s.targets_normalized for s in samples])
    return X, T


def largest_remainder(proportions, total):
    """Integer counts summing to ``total`` closest to ``proportions * total``.

    Leftover units go to the largest fractional parts; ties favour earlier entries.
    """
    quotas = [p * total for p in proportions]
    counts = [math.floor(q) for q in quotas]
    left = total - sum(counts)
    order = sorted(range(len(quotas)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[:left]:
        counts[k] += 1
    return counts


def split_dataset(samples, counts=None, proportions=None, seed=0):
    """Seeded shuffle, then contiguous training/validation/production slices."""
    if not samples:
        raise EmptyInput("no samples to split")
    n = len(samples)
    if (counts is None) == (proportions is None):
        raise FeatureError("give exactly one of counts or proportions")
    if proportions is not None:
        if len(proportions) != 3 or any(p < 0 for p in proportions):
            raise CountMismatch("need three non-negative proportions")
        if abs(sum(proportions) - 1.0) > 1e-9:
            raise CountMismatch(f"proportions sum to {sum(proportions)!r}, not 1")
        counts = largest_remainder(proportions, n)
    if len(counts) != 3 or any(int(c) != c or c < 0 for c in counts):
        raise CountMismatch("need three non-negative integer counts")
    if sum(counts) != n:
        raise CountMismatch(f"counts sum to {sum(counts)}, have {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    a, b = int(counts[0]), int(counts[0] + counts[1])
    return DatasetSplit(
        [samples[i] for i in perm[:a]],
        [samples[i] for i in perm[a:b]],
        [samples[i] for i in perm[b:]],
    )


def scale_split(split, params):
    return split.map(lambda s: apply_scaler(params, s))
