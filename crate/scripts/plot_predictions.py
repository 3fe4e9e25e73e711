#!/usr/bin/env python3
"""Plot swdgp prediction files, or validate them with --check."""

import argparse
import csv
import json
import math
import sys

COLUMNS = ["x", "mean", "variance", "observation_variance"]


def read_predictions(path):
    config = None
    rows = []
    with open(path, newline="") as f:
        lines = []
        for line in f:
            if line.startswith("# config="):
                config = json.loads(line[len("# config="):])
            elif not line.startswith("#"):
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    if header != COLUMNS:
        raise ValueError(f"unexpected header {header}")
    for row in reader:
        rows.append([float(v) for v in row])
    if config is None:
        raise ValueError("missing '# config=' line")
    return config, {name: [r[i] for r in rows] for i, name in enumerate(COLUMNS)}


def read_data(path):
    xs, ys = [], []
    with open(path, newline="") as f:
        for row in csv.reader(line for line in f if not line.startswith("#")):
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                continue
            xs.append(x)
            ys.append(y)
    return xs, ys


def check(config, cols, sidecar):
    n = len(cols["x"])
    if n != config.get("test_points", n):
        raise ValueError(f"{n} rows but config says {config['test_points']}")
    for i in range(n):
        values = [cols[c][i] for c in COLUMNS]
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"row {i + 1}: non-finite value")
        if cols["variance"][i] < 0 or cols["observation_variance"][i] < cols["variance"][i]:
            raise ValueError(f"row {i + 1}: inconsistent variances")
    if any(b < a for a, b in zip(cols["x"], cols["x"][1:])):
        raise ValueError("x column is not sorted")
    if sidecar is not None:
        m = config["grid"]["count"]
        for key in ("g", "grid", "chi", "weights"):
            if len(sidecar[key]) != m:
                raise ValueError(f"sidecar '{key}' has {len(sidecar[key])} entries, expected {m}")
    print(f"ok {n} rows, command {config.get('command')}")


def plot(config, cols, data, sidecar, out):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x, mu = cols["x"], cols["mean"]
    sd = [math.sqrt(v) for v in cols["observation_variance"]]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.fill_between(x, [m - 2 * s for m, s in zip(mu, sd)], [m + 2 * s for m, s in zip(mu, sd)],
                    color="tab:blue", alpha=0.2, label="mean +- 2 sd")
    ax.plot(x, mu, color="tab:blue", label="mean")
    if data is not None:
        ax.plot(*data, ".", color="0.4", markersize=3, label="data")
    if sidecar is not None:
        ax.plot(sidecar["grid"], sidecar["g"], "o", color="tab:red", markersize=4, label="grid means")
    ax.set_xlabel("x")
    ax.set_title(f"{config.get('command')} band={config.get('band')} l={config.get('length_scale'):.4g}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("predictions")
    parser.add_argument("--data", help="training CSV to overlay")
    parser.add_argument("--sidecar", help="latent sidecar JSON")
    parser.add_argument("--out", default="predictions.png")
    parser.add_argument("--check", action="store_true", help="validate the files and exit")
    args = parser.parse_args(argv)

    try:
        config, cols = read_predictions(args.predictions)
        sidecar = None
        if args.sidecar:
            with open(args.sidecar) as f:
                sidecar = json.load(f)
        if args.check:
            check(config, cols, sidecar)
            return 0
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    data = read_data(args.data) if args.data else None
    plot(config, cols, data, sidecar, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
