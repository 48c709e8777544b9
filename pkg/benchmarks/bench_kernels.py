"""Compiled kernels vs the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--duration 0.5]

Times ``simulate`` on the Full network under 4 kHz Poisson drive (with and
without plasticity) and ``adm_points`` on a band-limited signal, checks that
both backends agree bit for bit, and prints a table.
"""

import argparse
import time

import numpy as np

from hdrsnn import _backend
from hdrsnn import _fallback
from hdrsnn.encoders import AdmParams, poisson_inputs
from hdrsnn.engine import Plasticity, run
from hdrsnn.topology import NetworkConfig, build_network


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_simulate(kern, duration_us, learn, repeat):
    cfg = NetworkConfig()
    inputs = poisson_inputs(4000.0, cfg.n_input, duration_us, seed=1)
    teacher = np.zeros(cfg.n_exc)
    teacher[:2] = 0.1

    def go():
        net = build_network(cfg)
        res = run(net, inputs, duration_us, seed=2, backend=kern,
                  plasticity=Plasticity(teacher) if learn else None)
        return res.raster, net.plastic_weights

    return best_of(go, repeat)


def bench_adm(kern, n_samples, repeat):
    rng = np.random.default_rng(3)
    x = np.cumsum(rng.standard_normal(n_samples)) * 0.5
    p = AdmParams()
    u = x / p.threshold
    return best_of(lambda: kern.adm_points(u, p.interpolation_factor, p.block_points(200.0)),
                   repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--duration", type=float, default=0.5, help="simulated seconds")
    ap.add_argument("--samples", type=int, default=400, help="ADM signal length")
    args = ap.parse_args()

    if _backend.NAME != "cython":
        print("compiled kernels not built; only the fallback is available")
        return
    compiled = _backend.kernels
    rows = []
    for label, fn in (
        ("simulate", lambda k: bench_simulate(k, args.duration * 1e6, False, args.repeat)),
        ("simulate+learn", lambda k: bench_simulate(k, args.duration * 1e6, True, args.repeat)),
        ("adm_points", lambda k: bench_adm(k, args.samples, args.repeat)),
    ):
        tc, oc = fn(compiled)
        tp, op = fn(_fallback)
        same = all(np.array_equal(a, b) for a, b in zip(oc, op))
        rows.append((label, tc, tp, tp / tc, same))

    print(f"{'kernel':<16}{'cython s':>10}{'python s':>10}{'speedup':>9}  identical")
    for label, tc, tp, sp, same in rows:
        print(f"{label:<16}{tc:>10.4f}{tp:>10.4f}{sp:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
