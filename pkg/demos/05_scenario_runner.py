"""Driving the experiment CLI programmatically.

Writes a scenario file, runs it through the same entry point as
`nlbalance run`, and inspects the CSV/JSON artifacts it produced.

Run:  python3 demos/05_scenario_runner.py
"""

import json
import os
import tempfile

import yaml

from nlbalance.cli import main

scenario = {
    "seed": 42,
    "model": {"id": "scalar_rosenau", "params": {}},
    "initial": {"preset": "bump", "params": {"amp": 0.2, "steps": 4}},
    "schedule": {"s": 0.05, "t_final": 0.2, "N": 8, "eps": 1e-4},
    "diagnostics": [
        {"kind": "trace"},
        {"kind": "limit", "params": {"t": 0.2, "levels": 4}},
        {"kind": "commutation",
         "params": {"t_list": [0.2, 0.1, 0.05, 0.025]}},
        {"kind": "rescaling", "params": {"lambdas": [2.0], "t": 0.2}},
    ],
}

workdir = tempfile.mkdtemp(prefix="nlbalance-demo-")
path = os.path.join(workdir, "scalar.yaml")
with open(path, "w") as fh:
    yaml.safe_dump(scenario, fh)

code = main(["run", path, "--out", os.path.join(workdir, "artifacts"),
             "--jobs", "1"])
print("exit status:", code)

art = os.path.join(workdir, "artifacts")
print("artifacts:", sorted(os.listdir(art)))
summary = json.load(open(os.path.join(art, "summary.json")))
print("overall pass:", summary["pass"])
for name, entry in summary["diagnostics"].items():
    line = "  %-12s pass=%s" % (name, entry["pass"])
    if "slope" in entry:
        line += "  slope=%.3f" % entry["slope"]
    print(line)
print("\ncommutation.csv:")
print(open(os.path.join(art, "commutation.csv")).read())
