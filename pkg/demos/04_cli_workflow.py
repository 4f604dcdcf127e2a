"""The command-line workflow end to end, driven from Python.

Equivalent shell session::

    pnorm-rkbs train   --config cfg.yaml --data train.csv --out model.yaml --schedule 1:8
    pnorm-rkbs predict --model model.yaml --data test.csv --classify
    pnorm-rkbs eval    --model model.yaml --data test.csv
    pnorm-rkbs sparse  --config cfg.yaml --data train.csv --out xi.csv
    pnorm-rkbs verify  --config cfg.yaml
"""

import tempfile
from pathlib import Path

import numpy as np

from pnorm_rkbs import cli

rng = np.random.default_rng(3)
work = Path(tempfile.mkdtemp(prefix="pnorm-rkbs-"))


def write_csv(path, x, y):
    path.write_text("x,y\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(x.tolist(), y.tolist())))


x = rng.random(30)
write_csv(work / "train.csv", x, np.sign(np.cos(2 * np.pi * x)))
x = np.linspace(0.05, 0.95, 6)
write_csv(work / "test.csv", x, np.sign(np.cos(2 * np.pi * x)))
(work / "cfg.yaml").write_text(
    "kernel: {kind: min-integral, truncation: 128}\n"
    "loss: {kind: least-square}\n"
    "regularizer: {sigma: 0.001, power: 1}\n"
)


def run(*args):
    print(f"\n$ pnorm-rkbs {' '.join(args)}")
    code = cli.main(list(args))
    print(f"[exit {code}]")


run("train", "--config", str(work / "cfg.yaml"), "--data", str(work / "train.csv"),
    "--out", str(work / "model.yaml"), "--schedule", "1:8")
run("predict", "--model", str(work / "model.yaml"), "--data", str(work / "test.csv"), "--classify")
run("eval", "--model", str(work / "model.yaml"), "--data", str(work / "test.csv"))
run("sparse", "--config", str(work / "cfg.yaml"), "--data", str(work / "train.csv"), "--out", str(work / "xi.csv"))
run("verify", "--config", str(work / "cfg.yaml"))
print(f"\nfiles in {work}: {sorted(p.name for p in work.iterdir())}")
