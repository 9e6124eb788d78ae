"""Closed-loop comparison of the three learning schemes on a few seeds.

Each run flies stereo-only, then learns (stereo, mono or a 25/75 mix in
control), then flies on mono alone while stereo only counts overrides.
The phases are shortened to a fifth to keep the demo short.

Run: python3 demos/learning_schemes.py
"""

from pssl.batch import run_batch
from pssl.config import config_from_dict

cfg = config_from_dict({"phases": {"time_scale": 0.2}, "seeds": [0, 1, 2]})
summary = run_batch(cfg)

print(f"phase frames {summary['phase_frames']}")
for scheme, agg in summary["aggregates"].items():
    o, t = agg["overrides_test"], agg["turns_test"]
    print(f"{scheme:>16}: overrides {o['mean']:5.1f} +- {o['std'] or 0:4.1f}"
          f"   turns {t['mean']:5.1f}")

# Three seeds are far too few for the bootstrap to separate the schemes;
# the full acceptance run uses thirty.
for p in summary["pvalues"]:
    print(f"  p({p['a']} vs {p['b']}) = {p['p']:.3f}")
