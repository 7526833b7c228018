"""Compare the compiled and pure-Python simulator backends.

The backend is chosen by REPLICAST_DISABLE_JIT at import time, so each
measurement runs in a fresh subprocess with the flag set accordingly.
The parent prints a small table with the speedup.

Usage:
    python benchmarks/bench_backends.py [--rate 20] [--target 2]
        [--n-max 10] [--duration 1200] [--repeats 3]
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

BACKENDS = (("jit", "0"), ("pure", "1"))


def build_sim_config(args):
    import replicast as rc
    autoscaler = rc.AutoscalerConfig(metric_kind="cc", target_value=args.target,
                                     n_max=args.n_max)
    workload = rc.WorkloadModel(kind=rc.WORKLOAD_INFINITE_SERVER, mean_s=0.2)
    return rc.SimulationConfig(autoscaler=autoscaler, workload=workload,
                               arrival_rate=args.rate, duration_s=args.duration,
                               warmup_s=min(300.0, args.duration / 4), seed=12345)


def run_worker(args):
    import replicast as rc
    sim_cfg = build_sim_config(args)
    # one throwaway run so jit compilation (or interpreter warmup) stays
    # out of the timed section
    rc.simulate(sim_cfg)
    samples = []
    checksum = None
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        rep = rc.simulate(sim_cfg)
        samples.append(time.perf_counter() - t0)
        checksum = (rep.arrivals_total, rep.avg_replica_count,
                    rep.avg_concurrency, rep.avg_response_time_s)
    print(json.dumps({
        "jit_enabled": rc.JIT_ENABLED,
        "best_s": min(samples),
        "median_s": statistics.median(samples),
        "checksum": list(checksum),
    }))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rate", type=float, default=20.0)
    parser.add_argument("--target", type=float, default=2.0)
    parser.add_argument("--n-max", type=int, default=10)
    parser.add_argument("--duration", type=float, default=1200.0)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        run_worker(args)
        return

    results = {}
    for name, flag in BACKENDS:
        env = dict(os.environ, REPLICAST_DISABLE_JIT=flag)
        cmd = [sys.executable, os.path.abspath(__file__), "--worker",
               "--rate", str(args.rate), "--target", str(args.target),
               "--n-max", str(args.n_max), "--duration", str(args.duration),
               "--repeats", str(args.repeats)]
        proc = subprocess.run(cmd, capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            raise SystemExit(f"{name} worker failed with code {proc.returncode}")
        results[name] = json.loads(proc.stdout.strip().splitlines()[-1])

    if results["jit"]["checksum"] != results["pure"]["checksum"]:
        raise SystemExit("backends disagree; the fallback must be bit-identical")
    assert results["jit"]["jit_enabled"] and not results["pure"]["jit_enabled"]

    print(f"simulated {args.duration:g} s at rate {args.rate:g}, "
          f"target {args.target:g}, cap {args.n_max}, best of {args.repeats}")
    print(f"{'backend':<8} {'best':>10} {'median':>10}")
    for name in ("jit", "pure"):
        r = results[name]
        print(f"{name:<8} {r['best_s']:>9.4f}s {r['median_s']:>9.4f}s")
    speedup = results["pure"]["best_s"] / results["jit"]["best_s"]
    print(f"speedup: {speedup:.1f}x (outputs identical on both backends)")


if __name__ == "__main__":
    main()
