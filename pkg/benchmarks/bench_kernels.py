"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 1000] [--repeats 3]

Workloads: batched max-reachability on the default UAV model and on the
eight-state example chain, plus the t* bisection at large N.
"""
import argparse
import time

import numpy as np

from upmdp import kernels, scenario
from upmdp.bench import example_distribution, example_pmc, gen_uav
from upmdp.mc import BatchChecker
from upmdp.pmdp import instantiate_many
from upmdp.sampling import draw


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def use(name):
    impl = kernels.load_backend(name)
    kernels.iterate = impl.iterate
    kernels.log_binomial_tail = impl.log_binomial_tail


def workloads(n):
    uav, udist = gen_uav()
    uprobs = instantiate_many(uav, draw(udist, uav.parameters, n, 1).values)
    ex = example_pmc()
    eprobs = instantiate_many(ex, draw(example_distribution(), ex.parameters, 100 * n, 1).values)
    return {
        f"uav Pmax, {n} samples": lambda: BatchChecker(uav, "reach", "max").solve(uprobs),
        f"example P, {100 * n} samples": lambda: BatchChecker(ex, "reach", None).solve(eprobs),
        "t*(100000, 10000, 0.999)": lambda: scenario.t_star(100000, 10000, 0.999),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    backends = kernels.available_backends()
    jobs = workloads(args.n)
    results = {}
    for name in backends:
        use(name)
        for label, fn in jobs.items():
            results[name, label] = best_of(fn, args.repeats)
    print(f"{'workload':<32}" + "".join(f"{b:>12}" for b in backends) + ("    speedup" if len(backends) > 1 else ""))
    for label in jobs:
        row = [results[b, label][0] for b in backends]
        line = f"{label:<32}" + "".join(f"{t:>11.3f}s" for t in row)
        if len(backends) > 1:
            a, b = results["cython", label][1], results["python", label][1]
            agree = np.allclose(a, b, rtol=0, atol=1e-9)
            line += f"  {row[1] / row[0]:>8.1f}x" + ("" if agree else "  (results differ!)")
        print(line)


if __name__ == "__main__":
    main()
