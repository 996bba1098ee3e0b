"""Preliminary model comparison, final-network training and plot-data export."""
import csv
import json
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from ._seeding import derive_seed, rng_for
from .features import DatasetSplit, stack
from .metrics import MetricsReport, build_report, mse, percent_error_normalized
from .network import (
    PRELIMINARY_MODELS,
    UnknownModel,
    build_network,
    final_network_spec,
    forward,
    preliminary_network_spec,
)
from .trainer import NonFiniteLoss, TrainingConfig, train

logger = logging.getLogger(__name__)

DEFAULT_PRELIMINARY_SAMPLES = 200
# momentum for the plain perceptron, Quickprop for the radial variants
DEFAULT_RULES = {"mlp": "momentum", "radial_general": "quickprop", "rbf_mlp": "quickprop"}
# recurrent model names are reserved; no architecture is defined for them
RESERVED_MODELS = ("recurrent_time_series", "recurrent_generalized")

FIGURE_FILES = {
    "validation": "fig2_validation.csv",
    "training": "fig3_training.csv",
    "production": "fig4_production.csv",
}
FIG5_FILE = "fig5_compare.csv"


class InsufficientSamples(ValueError):
    pass


class IOFailure(OSError):
    pass


@dataclass
class ModelResult:
    name: str
    rule: str
    mse: dict
    percent_error: dict  # split -> mean percent error over output variables
    cycles: int
    stop_reason: str
    parameter_count: int

    def rank_key(self):
        return (self.mse["validation"], self.mse["production"], self.parameter_count)


@dataclass
class ComparisonReport:
    results: list
    ranking: list
    seed: int
    preliminary_sample_count: int
    config: dict = field(default_factory=dict)

    @property
    def selected(self):
        return self.ranking[0]

    def result(self, name):
        return next(r for r in self.results if r.name == name)

    def to_dict(self):
        return {
            "models": [
                {
                    "name": r.name,
                    "rule": r.rule,
                    "mse": r.mse,
                    "percent_error_mean": r.percent_error,
                    "cycles": r.cycles,
                    "stop_reason": r.stop_reason,
                    "parameter_count": r.parameter_count,
                }
                for r in self.results
            ],
            "ranking": list(self.ranking),
            "selected": self.selected,
            "seed": self.seed,
            "preliminary_sample_count": self.preliminary_sample_count,
            "config": self.config,
            "not_implemented": list(RESERVED_MODELS),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def rank_results(results):
    """Names ordered by validation MSE, then production MSE, then size; stable."""
    return [r.name for r in sorted(results, key=ModelResult.rank_key)]


def preliminary_subset(training, count, seed):
    """Prefix of a seeded shuffle of the training samples."""
    if not 1 <= count <= len(training):
        raise InsufficientSamples(f"need {count} preliminary samples, training set has {len(training)}")
    perm = rng_for(seed, "preliminary-subset").permutation(len(training))
    return [training[i] for i in perm[:count]]


def _split_scores(network, split):
    mses, pes = {}, {}
    for s in DatasetSplit.NAMES:
        X, T = stack(split[s])
        Y = forward(network, X)
        mses[s] = mse(Y, T)
        pes[s] = float(np.mean(percent_error_normalized(Y, T)))
    return mses, pes


def run_comparison(dataset, models=PRELIMINARY_MODELS, config=None,
                   preliminary_sample_count=DEFAULT_PRELIMINARY_SAMPLES, rules=None, specs=None):
    """Train each preliminary model on a small seeded subset and rank them.

    ``rules`` overrides the per-model update rule, ``specs`` the per-model topology.
    Scores on the training split refer to the subset actually trained on.
    """
    config = config or TrainingConfig()
    rules = {**DEFAULT_RULES, **(rules or {})}
    specs = specs or {}
    for m in models:
        if m in RESERVED_MODELS:
            raise UnknownModel(f"{m!r} is not implemented (no architecture available)")
        if m not in PRELIMINARY_MODELS:
            raise UnknownModel(f"unknown model {m!r}")
    if not dataset.validation or not dataset.production:
        raise InsufficientSamples("validation and production sets must be non-empty")

    subset = preliminary_subset(dataset.training, preliminary_sample_count, config.seed)
    prelim = DatasetSplit(subset, dataset.validation, dataset.production)
    X_sub, T_sub = stack(subset)
    input_width, output_width = X_sub.shape[1], T_sub.shape[1]

    results = []
    for name in models:
        spec = specs.get(name) or preliminary_network_spec(name, input_width, output_width)
        net0 = build_network(spec, derive_seed(config.seed, f"init:{name}"), center_init_data=X_sub)
        run_cfg = replace(config, rule=rules[name], seed=derive_seed(config.seed, f"train:{name}"))
        try:
            net, history = train(net0, prelim, run_cfg)
            cycles, reason = history.cycles, history.stop_reason
        except NonFiniteLoss as exc:
            logger.warning("%s diverged at epoch %d; scoring its best snapshot", name, exc.epoch)
            net, cycles, reason = exc.network, exc.epoch, "diverged"
        mses, pes = _split_scores(net, prelim)
        results.append(ModelResult(name, rules[name], mses, pes, cycles, reason, net.parameter_count))
        logger.info("%s: val mse %.6g after %d cycles (%s)", name, mses["validation"], cycles, reason)

    return ComparisonReport(
        results=results,
        ranking=rank_results(results),
        seed=config.seed,
        preliminary_sample_count=preliminary_sample_count,
        config=config.to_dict(),
    )


def run_final(dataset, config, scaler, spec=None, rule="quickprop"):
    """Build the final radial + tanh network, train it and report on every split.

    Returns ``(network, report, history)``. Raises ``NonFiniteLoss`` on divergence.
    """
    if not (dataset.training and dataset.validation and dataset.production):
        raise InsufficientSamples("all three splits must be non-empty")
    X, T = stack(dataset.training)
    spec = spec or final_network_spec(X.shape[1], T.shape[1])
    net0 = build_network(spec, derive_seed(config.seed, "init:final"), center_init_data=X)
    run_cfg = replace(config, rule=rule, seed=derive_seed(config.seed, "train:final"))
    net, history = train(net0, dataset, run_cfg)
    report = build_report(net, dataset, scaler, history)
    return net, report, history


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    return path


def _num(x):
    return repr(float(x))


def emit_plot_data(report, out_dir, actual=None, predicted=None, variables=None):
    """Write figure CSVs for a comparison or a final-network report.

    A ``ComparisonReport`` yields one error table per split; a ``MetricsReport``
    (or explicit raw ``actual``/``predicted`` matrices) yields the long-format
    actual-vs-predicted table for the production split. Returns the paths written.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {out_dir}: {exc}") from exc
    paths = []
    if isinstance(report, ComparisonReport):
        for split, fname in FIGURE_FILES.items():
            rows = [[r.name, _num(r.mse[split]), _num(r.percent_error[split])] for r in report.results]
            paths.append(_write_csv(os.path.join(out_dir, fname), ["model", "mse", "percent_error_mean"], rows))
        return paths

    if actual is None or predicted is None:
        if not isinstance(report, MetricsReport) or not report.predictions:
            raise ValueError("report carries no predictions; pass actual and predicted")
        actual, predicted = report.predictions["production"]
    variables = variables or report.variables
    A = np.asarray(actual, dtype=float)
    P = np.asarray(predicted, dtype=float)
    if A.shape != P.shape or A.shape[1] != len(variables):
        raise ValueError("actual/predicted shapes do not match the variable list")
    rows = [
        [i, v, _num(A[i, j]), _num(P[i, j])]
        for i in range(len(A))
        for j, v in enumerate(variables)
    ]
    paths.append(_write_csv(os.path.join(out_dir, FIG5_FILE), ["index", "variable", "actual", "predicted"], rows))
    return paths
