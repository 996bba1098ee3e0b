"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The lines are collected in ``conftest.ACCEPTANCE_LINES`` and shown in the
"acceptance criteria" section of the pytest terminal summary.
"""
import contextlib
import csv
import json
import time

import numpy as np
import pytest
import yaml

from conftest import ACCEPTANCE_LINES
from oracles import finite_difference_grad, largest_remainder_bruteforce, max_relative_error
from quakenet import harness
from quakenet.catalog import DEFAULT_REGION, filter_records, generate_learnable_catalog
from quakenet.cli import main
from quakenet.features import (
    DatasetSplit,
    EncoderConfig,
    Sample,
    ScalerParams,
    encode_records,
    fit_scaler,
    scale_split,
    split_dataset,
    stack,
)
from quakenet.harness import FIGURE_FILES, ModelResult, emit_plot_data, rank_results, run_comparison, run_final
from quakenet.metrics import build_report, mse, nmse, percent_error_per_variable
from quakenet.network import (
    DENSE_LINEAR,
    DENSE_TANH,
    PRELIMINARY_MODELS,
    RADIAL_GAUSSIAN,
    LayerSpec,
    Network,
    NetworkSpec,
    build_network,
    final_network_spec,
    forward,
    preliminary_network_spec,
    stack_spec,
)
from quakenet.trainer import STOP_OVERTRAINING, TrainingConfig, backward, flatten_grads, train, update_quickprop

LEARNABILITY_SEED = 7


@contextlib.contextmanager
def criterion(number, title, budget=None):
    """Time the block, enforce the runtime budget and log one summary line."""
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget}s"
    except BaseException as exc:
        ACCEPTANCE_LINES.append(f"[FAIL] criterion {number}: {title} ({type(exc).__name__}: {exc})")
        raise
    ACCEPTANCE_LINES.append(f"[PASS] criterion {number}: {title} ({elapsed:.2f}s)")


def learnable_dataset(count=2000, seed=LEARNABILITY_SEED):
    records = filter_records(generate_learnable_catalog(seed, count), min_magnitude=4.0)
    enc = EncoderConfig(DEFAULT_REGION.zone_names)
    split = split_dataset(encode_records(records, enc), proportions=(0.5176, 0.2675, 0.2149), seed=seed)
    scaler = fit_scaler(split.training, enc)
    return scale_split(split, scaler), scaler


# 1 ---------------------------------------------------------------------------

def random_small_spec(rng, in_width, out_width):
    hidden = []
    if rng.random() < 0.6:
        hidden.append(LayerSpec(RADIAL_GAUSSIAN, int(rng.integers(1, 11))))
    if rng.random() < 0.6 or not hidden:
        hidden.append(LayerSpec(DENSE_TANH, int(rng.integers(1, 11))))
    return NetworkSpec(in_width, tuple(hidden) + (LayerSpec(DENSE_LINEAR, out_width),), out_width)


def test_criterion_1_gradient_oracle():
    with criterion(1, "analytic gradients match central differences on random small networks", budget=10):
        rng = np.random.default_rng(2024)
        worst, kinds_seen = 0.0, set()
        for k in range(24):
            d, o = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            spec = random_small_spec(rng, d, o)
            assert len(spec.layers) <= 3 and max(spec.units) <= 10
            kinds_seen.update(spec.kinds)
            net = build_network(spec, k, rng.random((15, d)))
            X, T = rng.random((4, d)), rng.random((4, o))
            analytic = flatten_grads(backward(net, X, T)[0])
            numeric = finite_difference_grad(net, X, T, h=1e-5)
            worst = max(worst, max_relative_error(analytic, numeric))
        assert kinds_seen == {RADIAL_GAUSSIAN, DENSE_TANH, DENSE_LINEAR}
        assert worst < 1e-4, worst


# 2 ---------------------------------------------------------------------------

def test_criterion_2_split_fidelity():
    with criterion(2, "5798 samples split into 3001/1551/1246 by counts and by proportions", budget=1):
        samples = [Sample(np.array([float(i)]), np.array([float(i)]), i) for i in range(5798)]
        by_counts = split_dataset(samples, counts=(3001, 1551, 1246), seed=1)
        props = (0.5176, 0.2675, 0.2149)
        by_props = split_dataset(samples, proportions=props, seed=1)
        assert by_counts.sizes() == by_props.sizes() == (3001, 1551, 1246)
        assert largest_remainder_bruteforce(props, 5798) == [3001, 1551, 1246]


# 3 ---------------------------------------------------------------------------

def test_criterion_3_metric_identities():
    with criterion(3, "mean predictor NMSE is 1 and the replay oracle scores zero", budget=5):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n, o = int(rng.integers(2, 200)), int(rng.integers(1, 6))
            T = rng.normal(rng.normal(size=o), rng.uniform(0.01, 100, size=o), size=(n, o))
            assert abs(nmse(np.broadcast_to(T.mean(axis=0), T.shape), T) - 1.0) <= 1e-9

        # targets are an exact affine map of the inputs; a linear network replays them
        A, c = rng.random((2, 3)), rng.random(3)
        lo, hi = np.array([14.0, -106.0, 4.0]), np.array([22.0, -92.0, 8.5])
        parts, idx = [], 0
        for size in (50, 30, 20):
            part = []
            for _ in range(size):
                x = rng.random(2)
                t = x @ A + c
                part.append(Sample(x, t * (hi - lo) + lo, idx, t))
                idx += 1
            parts.append(part)
        split = DatasetSplit(*parts)
        scaler = ScalerParams(["a", "b"], np.zeros(2), np.ones(2), ["latitude", "longitude", "magnitude"], lo, hi)
        net = Network(NetworkSpec(2, (LayerSpec(DENSE_LINEAR, 3),), 3), [{"W": A.copy(), "b": c.copy()}])
        report = build_report(net, split, scaler)
        assert report.mse == pytest.approx(0.0, abs=1e-12)
        for name in DatasetSplit.NAMES:
            assert all(v == pytest.approx(0.0, abs=1e-10) for v in report.percent_error[name].values())
        raw = np.stack([s.targets_raw for s in split.production])
        assert mse(raw, raw) == 0.0
        assert np.all(percent_error_per_variable(raw, raw, scaler) == 0.0)


# 4 ---------------------------------------------------------------------------

def test_criterion_4_quickprop_quadratic():
    with criterion(4, "quickprop solves 1-D quadratics after the bootstrap step; growth cap holds", budget=1):
        rng = np.random.default_rng(4)
        lr = 0.2
        for _ in range(200):
            # lr * k spans [0.4, 1.9]: the secant factor stays inside the 1.75 cap
            k = rng.uniform(2.0, 9.5)
            w_star, w0 = rng.uniform(-5, 5), rng.uniform(-5, 5)
            cfg = TrainingConfig(learning_rate=lr, quickprop_max_growth=1.75)
            w, g_prev, d_prev = np.array([w0]), np.zeros(1), np.zeros(1)
            gaps = []
            for _ in range(3):  # bootstrap + 2 secant steps
                g = k * (w - w_star)
                w, d_prev = update_quickprop(w, g, g_prev, d_prev, cfg)
                g_prev = g
                gaps.append(abs(float(w[0]) - w_star))
            assert min(gaps[1:]) < 1e-9, (k, w0, w_star, gaps)

        # overshoot case: lr * k = 0.05 gives a raw secant factor of 19, far above the cap
        k, w_star, w0, mu = 1.0, 0.0, 1.0, 1.75
        cfg = TrainingConfig(learning_rate=0.05, quickprop_max_growth=mu)
        g0 = np.array([k * (w0 - w_star)])
        w1, d0 = update_quickprop(np.array([w0]), g0, np.zeros(1), np.zeros(1), cfg)
        g1 = k * (w1 - w_star)
        raw_factor = float(g1[0] / (g0[0] - g1[0]))
        assert raw_factor > mu
        _, d1 = update_quickprop(w1, g1, g0, d0, cfg)
        assert abs(d1[0]) <= mu * abs(d0[0]) * (1 + 1e-15)
        assert d1[0] == pytest.approx(mu * d0[0], rel=1e-14)


# 5 ---------------------------------------------------------------------------

def test_criterion_5_architecture_fidelity():
    with criterion(5, "final and preliminary topologies have the expected unit counts"):
        for out_width in (1, 3, 4):
            spec = final_network_spec(9, out_width)
            assert spec.units == [100, 50, 100, 200, 400, 200, 100, 50, out_width]
            assert spec.kinds == [RADIAL_GAUSSIAN] + [DENSE_TANH] * 7 + [DENSE_LINEAR]
        for model in PRELIMINARY_MODELS:
            spec = preliminary_network_spec(model, 9, 3)
            hidden = spec.units[:-1]
            assert spec.units[-1] == 3 and spec.kinds[-1] == DENSE_LINEAR
            if model == "rbf_mlp":
                assert hidden == [20, 20, 60, 100, 150, 100, 60, 20]
                assert spec.kinds[:-1] == [RADIAL_GAUSSIAN] + [DENSE_TANH] * 7
            else:
                assert hidden == [20, 60, 100, 150, 100, 60, 20]
                first = RADIAL_GAUSSIAN if model == "radial_general" else DENSE_TANH
                assert spec.kinds[:-1] == [first] + [DENSE_TANH] * 6


# 6 ---------------------------------------------------------------------------

def test_criterion_6_learnability():
    with criterion(6, "reduced rbf_mlp learns a smooth synthetic catalog below 20% error", budget=300):
        split, scaler = learnable_dataset()
        X, T = stack(split.training)
        spec = stack_spec(X.shape[1], T.shape[1], (20, 60, 20), radial_units=20)
        cfg = TrainingConfig(rule="quickprop", max_epochs=5000, target_training_error=0.02,
                             seed=LEARNABILITY_SEED)
        _, report, history = run_final(split, cfg, scaler, spec=spec, rule="quickprop")
        assert history.cycles <= 5000
        production = report.percent_error["production"]
        assert set(production) == {"latitude", "longitude", "magnitude"}
        assert all(v < 20.0 for v in production.values()), production


# 7 ---------------------------------------------------------------------------

def test_criterion_7_early_stopping():
    with criterion(7, "overfitting split stops on overtraining and keeps the best snapshot", budget=30):
        rng = np.random.default_rng(7)

        def sample(x, t, i):
            t = np.atleast_1d(t)
            return Sample(x, t.copy(), i, t.copy())

        train_x = rng.random((5, 2))
        train_set = [sample(x, 0.5 + 0.4 * np.sin(6 * x[0] + 3 * x[1]), i) for i, x in enumerate(train_x)]
        val_x = rng.random((200, 2))
        val_set = [sample(x, 0.2 + 0.6 * x[1] ** 2, 5 + i) for i, x in enumerate(val_x)]
        split = DatasetSplit(train_set, val_set, val_set[:10])

        net = build_network(stack_spec(2, 1, (10,), radial_units=8), 7, train_x)
        cfg = TrainingConfig(max_epochs=20000, patience=25, target_training_error=1e-12, seed=7)
        out, history = train(net, split, cfg)
        assert history.stop_reason == STOP_OVERTRAINING
        Xv, Tv = stack(split.validation)
        val = float(np.mean((forward(out, Xv) - Tv) ** 2))
        assert abs(val - min(history.val_mse)) <= 1e-12


# 8 ---------------------------------------------------------------------------

PIPELINE = {
    "seed": 2013,
    "synth": {"count": 2000, "kind": "learnable"},
    "compare": {"training": {"max_epochs": 30}},
    "final": {"radial_units": 20, "hidden": [20, 60, 20], "training": {"max_epochs": 300}},
}
DETERMINISTIC_FILES = ("catalog.csv", "manifest.json", "scaler.json", "comparison.json", "history.csv",
                       "fig5_compare.csv") + tuple(FIGURE_FILES.values())


def without_wall_time(path):
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        data.pop("wall_seconds", None)
        return json.dumps(data, sort_keys=True)
    return "\n".join(line for line in path.read_text().splitlines() if not line.startswith("wall_seconds"))


def test_criterion_8_end_to_end_determinism(tmp_path, capsys):
    with criterion(8, "two identical CLI pipelines produce byte-identical artifacts", budget=600):
        cfg = tmp_path / "pipeline.yaml"
        cfg.write_text(yaml.safe_dump(PIPELINE))
        outs = [tmp_path / "run_a", tmp_path / "run_b"]
        for out in outs:
            for cmd in ("synth", "ingest", "compare", "train-final"):
                assert main([cmd, "--config", str(cfg), "--out", str(out)]) == 0, cmd
            assert main(["report", str(out / "report.json")]) == 0
        printed = capsys.readouterr().out
        assert "Cycles required" in printed
        a, b = outs
        for name in DETERMINISTIC_FILES:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
        assert without_wall_time(a / "report.json") == without_wall_time(b / "report.json")
        assert without_wall_time(a / "report.csv") == without_wall_time(b / "report.csv")


# 9 ---------------------------------------------------------------------------

def test_criterion_9_comparison_protocol(tmp_path, monkeypatch):
    with criterion(9, "comparison uses 200 samples, one figure row per model, deterministic ranking"):
        split, _ = learnable_dataset(count=800, seed=9)
        assert len(split.training) > 200
        seen = []
        real_train = harness.train

        def spy(network, dataset, config):
            seen.append(len(dataset.training))
            return real_train(network, dataset, config)

        monkeypatch.setattr(harness, "train", spy)
        cfg = TrainingConfig(max_epochs=40, seed=9)
        report = run_comparison(split, config=cfg)
        assert seen == [200] * len(PRELIMINARY_MODELS)
        assert report.preliminary_sample_count == 200

        emit_plot_data(report, tmp_path)
        for fname in FIGURE_FILES.values():
            with open(tmp_path / fname, newline="") as fh:
                rows = list(csv.reader(fh))[1:]
            assert sorted(r[0] for r in rows) == sorted(PRELIMINARY_MODELS)

        again = run_comparison(split, config=cfg)
        assert again.ranking == report.ranking
        assert again.to_json() == report.to_json()
        want = sorted(report.results, key=lambda r: (r.mse["validation"], r.mse["production"], r.parameter_count))
        assert report.ranking == [r.name for r in want]

        # ties on validation MSE fall back to production MSE, then to the smaller model
        def result(name, val, prod, size):
            return ModelResult(name, "quickprop", {"training": 0.0, "validation": val, "production": prod},
                               {}, 1, "max_epochs", size)

        tied = [result("large", 0.1, 0.2, 500), result("small", 0.1, 0.2, 50),
                result("lucky", 0.1, 0.1, 900), result("worse", 0.3, 0.0, 1)]
        assert rank_results(tied) == ["lucky", "small", "large", "worse"]
        assert rank_results(tied[::-1]) == ["lucky", "small", "large", "worse"]
