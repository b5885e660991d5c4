"""
The command line
================

``migrantcdr synth`` writes a synthetic bundle and ``migrantcdr pipeline``
runs labelling, features and experiments from one configuration file.
Reports are byte-identical for a given seed whatever the worker count.
Here the entry point is called in-process; from a shell the same arguments
follow the ``migrantcdr`` command.
"""

import tempfile
from pathlib import Path

import yaml

from migrantcdr.cli import main

d = Path(tempfile.mkdtemp())
config = {
    "seed": 5,
    "generator": {"n_locals": 1500, "n_staying": 200, "n_leaving": 40, "n_hubs": 1, "n_estates": 300},
    "data": {"dir": "data"},
    "experiment": {"learner": {"n_trees": 20}, "early_k": [3, 7, 14]},
}
(d / "run.yaml").write_text(yaml.safe_dump(config))

# $ migrantcdr synth --config run.yaml --out data
main(["synth", "--config", str(d / "run.yaml"), "--out", str(d / "data")])
# $ migrantcdr pipeline churn --config run.yaml --out out --workers 2
main(["pipeline", "churn", "--config", str(d / "run.yaml"), "--out", str(d / "out"), "--workers", "2"])

for p in sorted((d / "out").rglob("*")):
    if p.is_file():
        print(p.relative_to(d / "out"))
print((d / "out" / "reports" / "LeavingVsStaying" / "cv" / "summary.txt").read_text())
