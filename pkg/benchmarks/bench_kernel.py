"""Compare the compiled and pure-Python kernel backends.

Two workloads: a synthetic ring of timed tokens exercising the raw
enable/fire loop, and one simulated round of the cognitive-radio model.
Both backends must also agree on the result, which is checked here.

    python benchmarks/bench_kernel.py [--sim-time 600] [--repeat 3]
"""

import argparse
import statistics
import time

from crsim.config import Config
from crsim.kernel import Arc, StochasticSource, TransitionSpec, available_backends, build_net, run
from crsim.model import CognitiveRadioNet


def ring(backend, places=8, tokens=32, horizon=2_000_000):
    src = StochasticSource(1)
    names = [f"P{i}" for i in range(places)]
    specs = [
        TransitionSpec(f"t{i}", [Arc(names[i])],
                       lambda v, now, nxt=names[(i + 1) % places]: [(nxt, v[0], now + src.exponential(1000))])
        for i in range(places)
    ]
    net, m = build_net(names, specs, backend)
    for k in range(tokens):
        m.add(names[k % places], k, 0)
    trace = run(net, m, horizon, keep_trace=False)
    return trace.fired, trace.clock


def model_round(backend, sim_time):
    model = CognitiveRadioNet(Config(sim_time_s=sim_time).validate(), StochasticSource(7), backend=backend)
    model.start()
    model.run()
    return model.transmissions, model.result().mean_energy_mj


def timed(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.fmean(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sim-time", type=float, default=600.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    workloads = {
        "ring (8 places, 32 tokens)": lambda b: ring(b),
        f"model round ({args.sim_time:g} s)": lambda b: model_round(b, args.sim_time),
    }
    print(f"{'workload':<30} {'backend':<10} {'best s':>8} {'mean s':>8}  result")
    for label, fn in workloads.items():
        best = {}
        results = {}
        for b in backends:
            lo, mean, out = timed(lambda: fn(b), args.repeat)
            best[b], results[b] = lo, out
            print(f"{label:<30} {b:<10} {lo:8.3f} {mean:8.3f}  {out}")
        if len(set(map(repr, results.values()))) != 1:
            raise SystemExit(f"backends disagree on {label}: {results}")
        if "compiled" in best and "python" in best:
            print(f"{'':<30} speedup   {best['python'] / best['compiled']:8.2f}x")


if __name__ == "__main__":
    main()
