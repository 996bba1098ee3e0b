"""
Comparing the preliminary models
================================

Encode a learnable synthetic catalog, split it, and let the comparison harness
train the three candidate topologies on a 200-sample subset.
"""

import numpy as np

from quakenet.catalog import DEFAULT_REGION, generate_learnable_catalog
from quakenet.features import EncoderConfig, encode_records, fit_scaler, scale_split, split_dataset
from quakenet.harness import run_comparison
from quakenet.network import preliminary_network_spec
from quakenet.trainer import TrainingConfig

records = generate_learnable_catalog(seed=3, count=1500)
enc = EncoderConfig(DEFAULT_REGION.zone_names)
print("inputs:", enc.input_names)

split = split_dataset(encode_records(records, enc), proportions=(0.5176, 0.2675, 0.2149), seed=3)
scaler = fit_scaler(split.training, enc)
split = scale_split(split, scaler)
print("split sizes:", dict(zip(split.NAMES, split.sizes())))

for model in ("mlp", "radial_general", "rbf_mlp"):
    spec = preliminary_network_spec(model, enc.input_width, enc.output_width)
    print(f"{model:<15} units={spec.units}")

# a short budget keeps the demo quick; the ranking logic is the same
report = run_comparison(split, config=TrainingConfig(max_epochs=150, seed=3))
print()
print(f"{'model':<15}{'rule':<11}{'cycles':>7}  {'val mse':>10}  {'prod mse':>10}  stop")
for name in report.ranking:
    r = report.result(name)
    print(f"{name:<15}{r.rule:<11}{r.cycles:>7}  {r.mse['validation']:10.5f}  {r.mse['production']:10.5f}  {r.stop_reason}")
print("selected:", report.selected)

val = np.array([report.result(n).mse["validation"] for n in report.ranking])
assert np.all(np.diff(val) >= 0)
