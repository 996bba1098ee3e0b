"""
Training a final network and reading its report
===============================================

Train a reduced radial + tanh network with Quickprop and print the error
table per split, in raw units.
"""

import numpy as np

from quakenet.catalog import DEFAULT_REGION, generate_learnable_catalog
from quakenet.features import EncoderConfig, encode_records, fit_scaler, scale_split, split_dataset, stack
from quakenet.harness import run_final
from quakenet.metrics import format_report
from quakenet.network import forward, stack_spec
from quakenet.trainer import TrainingConfig

records = generate_learnable_catalog(seed=7, count=2000)
enc = EncoderConfig(DEFAULT_REGION.zone_names)
split = split_dataset(encode_records(records, enc), proportions=(0.5176, 0.2675, 0.2149), seed=7)
scaler = fit_scaler(split.training, enc)
split = scale_split(split, scaler)

# the full topology is radial(100) + tanh(50, 100, 200, 400, 200, 100, 50);
# a smaller stack trains in seconds
spec = stack_spec(enc.input_width, enc.output_width, (20, 60, 20), radial_units=20)
cfg = TrainingConfig(max_epochs=5000, target_training_error=0.02, seed=7)
net, report, history = run_final(split, cfg, scaler, spec=spec)

print(f"{net.parameter_count} parameters, stopped after {history.cycles} cycles ({history.stop_reason})")
print(f"best validation epoch {history.best_epoch}")
print()
print(format_report(report.to_dict()))

# a few production predictions next to the truth
X, _ = stack(split.production)
pred = forward(net, X) * (scaler.target_max - scaler.target_min) + scaler.target_min
truth = np.stack([s.targets_raw for s in split.production])
print()
print("   lat pred/true      lon pred/true     mag pred/true")
for p, t in zip(pred[:5], truth[:5]):
    print("  ".join(f"{a:8.3f}/{b:<8.3f}" for a, b in zip(p, t)))

# the validation curve on a log scale: coarse text sparkline
val = np.log10(history.val_mse)
marks = np.linspace(0, len(val) - 1, min(40, len(val))).astype(int)
scaled = (val[marks] - val.min()) / (np.ptp(val) or 1.0)
print()
print("log validation mse:", "".join("_.-:=+*#"[int(v * 7)] for v in scaled))
