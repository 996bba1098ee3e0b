"""Regression error metrics and the per-split evaluation report.

Percent error for a variable is the mean absolute error divided by the
variable's training range, times 100. This is an interpretation: it makes the
numbers comparable across variables with very different raw scales.
"""
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .features import DatasetSplit, DegenerateVariable, invert_scaler, stack
from .network import DimensionMismatch, forward

SPLIT_NAMES = DatasetSplit.NAMES


class MetricsError(ValueError):
    pass


class EmptyInput(MetricsError):
    pass


class ZeroVariance(MetricsError):
    pass


def _pair(predictions, targets):
    P = np.asarray(predictions, dtype=float)
    T = np.asarray(targets, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if T.ndim == 1:
        T = T[:, None]
    if len(P) == 0 or len(T) == 0:
        raise EmptyInput("need at least one sample")
    if P.shape != T.shape:
        raise DimensionMismatch(f"predictions {P.shape} vs targets {T.shape}")
    return P, T


def mse(predictions, targets):
    """Mean over samples of the mean squared componentwise difference."""
    P, T = _pair(predictions, targets)
    return float(np.mean((P - T) ** 2))


def nmse(predictions, targets):
    """MSE relative to predicting each component's target mean."""
    P, T = _pair(predictions, targets)
    if np.any(np.var(T, axis=0) == 0):
        raise ZeroVariance("a target component is constant; NMSE undefined")
    baseline = np.mean((T - T.mean(axis=0)) ** 2)
    return float(np.mean((P - T) ** 2) / baseline)


def percent_error_per_variable(predictions, targets, scaler):
    """100 * mean |prediction - target| / training range, per output variable (raw units)."""
    P, T = _pair(predictions, targets)
    span = scaler.target_max - scaler.target_min
    if span.shape != (P.shape[1],):
        raise DimensionMismatch("scaler does not match the output variables")
    for name, s in zip(scaler.target_names, span):
        if not s > 0:
            raise DegenerateVariable(name)
    return 100.0 * np.mean(np.abs(P - T), axis=0) / span


def percent_error_normalized(predictions, targets):
    """Same as :func:`percent_error_per_variable`, for already-normalized values."""
    P, T = _pair(predictions, targets)
    return 100.0 * np.mean(np.abs(P - T), axis=0)


def count_out_of_range(normalized_predictions):
    Y = np.asarray(normalized_predictions, dtype=float)
    return int(np.count_nonzero((Y < 0.0) | (Y > 1.0)))


@dataclass
class MetricsReport:
    variables: list
    percent_error: dict  # split -> {variable: percent}
    out_of_range: dict  # split -> count
    mse: float
    nmse: float
    percent_error_aggregate: float
    cycles: int = 0
    wall_seconds: float = 0.0
    predictions: dict = field(default=None, repr=False)  # split -> (actual_raw, predicted_raw)

    def to_dict(self):
        return {
            "splits": {s: {"percent_error": dict(self.percent_error[s])} for s in SPLIT_NAMES},
            "mse": self.mse,
            "nmse": self.nmse,
            "percent_error_aggregate": self.percent_error_aggregate,
            "cycles": self.cycles,
            "wall_seconds": self.wall_seconds,
            "out_of_range_predictions": int(sum(self.out_of_range.values())),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "value"])
        for key, value in flatten(self.to_dict()):
            w.writerow([key, repr(value) if isinstance(value, float) else value])
        return buf.getvalue()


def flatten(d, prefix=""):
    for key in sorted(d):
        value = d[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from flatten(value, name + ".")
        else:
            yield name, value


def report_fields(variables):
    """Dotted field names every report JSON must contain, no more, no less."""
    names = {"mse", "nmse", "percent_error_aggregate", "cycles", "wall_seconds", "out_of_range_predictions"}
    for s in SPLIT_NAMES:
        names.update(f"splits.{s}.percent_error.{v}" for v in variables)
    return names


def evaluate(network, samples, scaler):
    """Normalized predictions/targets and raw predictions/targets for ``samples``."""
    X, T = stack(samples)
    Y = forward(network, X)
    return Y, T, invert_scaler(scaler, Y), np.stack([s.targets_raw for s in samples])


def build_report(network, split, scaler, history=None, keep_predictions=True):
    """Evaluate ``network`` on all three splits.

    Global MSE/NMSE and the aggregate percent error refer to the production split;
    the aggregate is the unweighted mean of the per-variable percent errors.
    """
    variables = list(scaler.target_names)
    percent, oor, preds = {}, {}, {}
    for s in SPLIT_NAMES:
        samples = split[s]
        if not samples:
            raise EmptyInput(f"{s} split is empty")
        Y, T, Y_raw, T_raw = evaluate(network, samples, scaler)
        pe = percent_error_per_variable(Y_raw, T_raw, scaler)
        percent[s] = {v: float(x) for v, x in zip(variables, pe)}
        oor[s] = count_out_of_range(Y)
        if keep_predictions:
            preds[s] = (T_raw, Y_raw)
        if s == "production":
            prod_mse, prod_nmse = mse(Y, T), nmse(Y, T)
            aggregate = float(np.mean(pe))
    report = MetricsReport(
        variables=variables,
        percent_error=percent,
        out_of_range=oor,
        mse=prod_mse,
        nmse=prod_nmse,
        percent_error_aggregate=aggregate,
        cycles=history.cycles if history is not None else 0,
        wall_seconds=history.wall_seconds if history is not None else 0.0,
        predictions=preds if keep_predictions else None,
    )
    for key, value in flatten(report.to_dict()):
        if isinstance(value, float) and not math.isfinite(value):
            raise MetricsError(f"non-finite report value for {key}")
    return report


def format_report(report_dict):
    """Fixed-layout text table (production, validation, training, then totals)."""
    splits = report_dict["splits"]
    variables = list(splits["production"]["percent_error"])
    secs = float(report_dict["wall_seconds"])
    h, rem = divmod(int(round(secs)), 3600)
    m, s = divmod(rem, 60)
    lines = [
        f"{'Metric':<40}{'Value':>20}",
        f"{'Cycles required':<40}{report_dict['cycles']:>20d}",
        f"{'Time required':<40}{f'{h}:{m:02d}:{s:02d}':>20}",
    ]
    for split in ("production", "validation", "training"):
        lines.append(f"{split.capitalize() + ' set':<40}")
        for v in variables:
            lines.append(f"{'  Mean error ' + v:<40}{splits[split]['percent_error'][v]:>19.2f}%")
    lines.append(f"{'MSE':<40}{report_dict['mse']:>20.12f}")
    lines.append(f"{'NMSE':<40}{report_dict['nmse']:>20.12f}")
    lines.append(f"{'% Error':<40}{report_dict['percent_error_aggregate']:>20.12f}")
    lines.append(f"{'Out-of-range predictions':<40}{report_dict['out_of_range_predictions']:>20d}")
    return "\n".join(lines)
