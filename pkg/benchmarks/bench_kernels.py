"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times the raw kernels (rref, single-vector forward, input gradient) and one
end-to-end white-box attack per domain with each backend swapped in.
"""
from __future__ import annotations

import argparse
import json
import platform
import timeit
from contextlib import contextmanager

import numpy as np

from physadv import _kernels_py, kernels, nn
from physadv.harness import config as hc
from physadv.harness import runner

try:
    from physadv import _ckernels
except ImportError:  # extension not built
    _ckernels = None


@contextmanager
def backend(mod):
    saved = kernels.rref, kernels.forward, kernels.loss_input_gradient
    kernels.rref, kernels.forward, kernels.loss_input_gradient = mod.rref, mod.forward, mod.loss_input_gradient
    try:
        yield
    finally:
        kernels.rref, kernels.forward, kernels.loss_input_gradient = saved


def per_call(stmt, number, repeat):
    return min(timeit.repeat(stmt, number=number, repeat=repeat)) / number * 1e6  # microseconds


def kernel_cases(rng):
    net = nn.build_network(nn.mlp_spec(12, nn.FDIA_DEFENDER, seed=1))
    x = rng.normal(size=12)
    t = np.array([0.0, 1.0])
    phi = rng.normal(size=(12, 8))
    phi[:, 6:] = phi[:, :2] + phi[:, 2:4]
    return {
        "rref 12x8": lambda m: m.rref(phi, 1e-9),
        "forward fdia-defender": lambda m: m.forward(net.weights, net.biases, x),
        "input gradient fdia-defender": lambda m: m.loss_input_gradient(net.weights, net.biases, x, t),
    }


def attack_cases():
    out = {}
    for domain in hc.DOMAINS:
        cfg = hc.ScenarioConfig.for_domain(domain, scenario="white-box", seeds=(0,), test_size=50)
        b = runner.prepare(cfg, 0)
        out[f"white-box attack, {domain}"] = (cfg, b)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=2000)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    mods = {"python": _kernels_py}
    if _ckernels is not None:
        mods["cython"] = _ckernels
    rng = np.random.default_rng(0)
    rows = []
    for name, fn in kernel_cases(rng).items():
        row = {"case": name, "unit": "us/call"}
        for label, mod in mods.items():
            row[label] = per_call(lambda: fn(mod), args.number, args.repeat)
        rows.append(row)
    for name, (cfg, b) in attack_cases().items():
        row = {"case": name, "unit": "ms/example"}
        n = len(b.test)
        for label, mod in mods.items():
            with backend(mod):
                row[label] = per_call(
                    lambda: [runner.attack_one(cfg, b, i) for i in range(n)], 1, args.repeat
                ) / n / 1e3
        rows.append(row)
    print(f"{'case':34s} {'unit':11s} " + " ".join(f"{k:>10s}" for k in mods) + "    speedup")
    for r in rows:
        vals = " ".join(f"{r[k]:10.2f}" for k in mods)
        speed = f"{r['python'] / r['cython']:9.1f}x" if "cython" in r else ""
        print(f"{r['case']:34s} {r['unit']:11s} {vals} {speed}")
    if args.json:
        meta = {"python": platform.python_version(), "numpy": np.__version__, "machine": platform.machine()}
        with open(args.json, "w") as fh:
            json.dump({"meta": meta, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
