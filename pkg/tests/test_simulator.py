"""Event-loop ground truth: queueing-theory oracles and bookkeeping."""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

import replicast as rc


def is_exp(mean_s=0.2):
    return rc.WorkloadModel(kind=rc.WORKLOAD_INFINITE_SERVER, mean_s=mean_s)


def is_det(mean_s=0.2):
    return rc.WorkloadModel(kind=rc.WORKLOAD_INFINITE_SERVER, mean_s=mean_s,
                            distribution="deterministic")


def autoscaler(target_value=100.0, n_max=1, **kw):
    return rc.AutoscalerConfig(metric_kind="cc", target_value=target_value,
                               n_max=n_max, **kw)


def run(workload, arrival_rate, duration_s=3600.0, warmup_s=300.0, seed=7,
        cfg=None, **kw):
    sim_cfg = rc.SimulationConfig(
        autoscaler=cfg or autoscaler(), workload=workload,
        arrival_rate=arrival_rate, duration_s=duration_s, warmup_s=warmup_s,
        seed=seed, **kw)
    return rc.simulate(sim_cfg)


class TestWorkloadModel:
    def test_sharing_rejects_deterministic(self):
        with pytest.raises(rc.ValidationError):
            rc.WorkloadModel(kind=rc.WORKLOAD_PROCESSOR_SHARING, mean_s=0.2,
                             distribution="deterministic")

    def test_unknown_kind_rejected(self):
        with pytest.raises(rc.ValidationError):
            rc.WorkloadModel(kind="batch", mean_s=0.2)

    @pytest.mark.parametrize("mean", [0.0, -1.0, math.inf, math.nan])
    def test_bad_mean_rejected(self, mean):
        with pytest.raises(rc.ValidationError):
            rc.WorkloadModel(kind=rc.WORKLOAD_INFINITE_SERVER, mean_s=mean)

    def test_dict_round_trip(self):
        for wl in (is_exp(), is_det(0.5),
                   rc.WorkloadModel(kind=rc.WORKLOAD_PROCESSOR_SHARING, mean_s=0.3)):
            assert rc.WorkloadModel.from_dict(json.loads(json.dumps(wl.to_dict()))) == wl


class TestSimulationConfig:
    def test_duration_must_exceed_warmup(self):
        with pytest.raises(rc.ValidationError):
            rc.SimulationConfig(autoscaler=autoscaler(), workload=is_exp(),
                                arrival_rate=1.0, duration_s=300.0, warmup_s=300.0)

    def test_needs_one_post_warmup_sample(self):
        with pytest.raises(rc.ValidationError):
            rc.SimulationConfig(autoscaler=autoscaler(), workload=is_exp(),
                                arrival_rate=1.0, duration_s=300.5, warmup_s=300.0)

    @pytest.mark.parametrize("replicas", [0, 3])
    def test_initial_replicas_bounds(self, replicas):
        with pytest.raises(rc.ValidationError):
            rc.SimulationConfig(autoscaler=autoscaler(n_max=2), workload=is_exp(),
                                arrival_rate=1.0, duration_s=10.0, warmup_s=0.0,
                                initial_replicas=replicas)

    def test_dict_round_trip(self):
        sim_cfg = rc.SimulationConfig(
            autoscaler=autoscaler(target_value=5.0, n_max=4), workload=is_exp(),
            arrival_rate=2.5, duration_s=600.0, warmup_s=60.0, seed=42)
        again = rc.SimulationConfig.from_dict(json.loads(json.dumps(sim_cfg.to_dict())))
        assert again == sim_cfg

    def test_unknown_key_rejected(self):
        payload = rc.SimulationConfig(
            autoscaler=autoscaler(), workload=is_exp(), arrival_rate=1.0,
            duration_s=10.0, warmup_s=0.0).to_dict()
        payload["burst_factor"] = 2
        with pytest.raises(rc.ValidationError):
            rc.SimulationConfig.from_dict(payload)


class TestInfiniteServerOracles:
    def test_single_container_concurrency_matches_offered_load(self):
        # one pinned container serving lambda=1 at E[S]=0.2: the sampled
        # concurrency is the M/M/inf occupancy, mean 0.2
        rep = run(is_exp(0.2), arrival_rate=1.0)
        assert rep.avg_concurrency == pytest.approx(0.2, rel=0.05)

    def test_higher_rate_tightens_little_estimate(self):
        rep = run(is_exp(0.2), arrival_rate=20.0, seed=11)
        assert rep.avg_concurrency == pytest.approx(4.0, rel=0.03)
        assert rep.avg_response_time_s == pytest.approx(0.2, rel=0.03)

    def test_deterministic_service_reports_exact_response_time(self):
        rep = run(is_det(0.2), arrival_rate=0.05, duration_s=1000.0,
                  warmup_s=100.0, seed=3)
        assert rep.completed_requests > 10
        assert rep.avg_response_time_s == pytest.approx(0.2, abs=1e-9)

    def test_sparse_arrivals_see_bare_service_time(self):
        rep = run(is_det(0.3), arrival_rate=0.001, duration_s=10_000.0,
                  warmup_s=0.0, seed=5)
        assert rep.completed_requests >= 1
        assert rep.avg_response_time_s == pytest.approx(0.3, abs=1e-9)


class TestProcessorSharingOracle:
    def test_mm1_ps_closed_form(self):
        # single container, lambda=2, mean demand 0.2: utilization 0.4,
        # so E[RT] = 0.2/0.6 and E[jobs] = 0.4/0.6
        wl = rc.WorkloadModel(kind=rc.WORKLOAD_PROCESSOR_SHARING, mean_s=0.2)
        rep = run(wl, arrival_rate=2.0, duration_s=7200.0, seed=17)
        assert rep.avg_response_time_s == pytest.approx(0.2 / 0.6, rel=0.08)
        assert rep.avg_concurrency == pytest.approx(0.4 / 0.6, rel=0.08)


class TestBookkeeping:
    def test_request_conservation_is_exact(self):
        cfg = autoscaler(target_value=2.0, n_max=5)
        rep = run(is_exp(0.2), arrival_rate=8.0, duration_s=400.0,
                  warmup_s=50.0, cfg=cfg, seed=23)
        assert rep.arrivals_total == rep.completions_total + rep.in_flight_end

    def test_ready_counts_stay_in_bounds(self):
        cfg = autoscaler(target_value=2.0, n_max=4)
        rep = run(is_exp(0.2), arrival_rate=30.0, duration_s=600.0,
                  warmup_s=60.0, cfg=cfg, seed=29)
        assert rep.ready_counts.min() >= 1
        assert rep.ready_counts.max() <= 4
        assert np.all(rep.observed_values >= 0.0)
        assert np.all(np.isfinite(rep.mean_rts))

    def test_same_seed_reports_are_byte_identical(self):
        cfg = autoscaler(target_value=3.0, n_max=6)
        kwargs = dict(cfg=cfg, arrival_rate=12.0, duration_s=500.0,
                      warmup_s=100.0, seed=31)
        a = run(is_exp(0.2), **kwargs)
        b = run(is_exp(0.2), **kwargs)
        dump = lambda r: json.dumps(r.to_dict(include_series=True), sort_keys=True)
        assert dump(a) == dump(b)

    def test_series_length_matches_post_warmup_seconds(self):
        rep = run(is_exp(0.2), arrival_rate=5.0, duration_s=600.0, warmup_s=300.0,
                  cfg=autoscaler(target_value=2.0, n_max=3), seed=37)
        assert len(rep.times) == 300
        assert rep.times[0] == 301.0
        assert rep.times[-1] == 600.0

    def test_faster_evaluation_stays_sane(self):
        cfg_fast = autoscaler(target_value=2.0, n_max=5, t_eva_s=1.0)
        rep = run(is_exp(0.2), arrival_rate=15.0, duration_s=500.0,
                  warmup_s=100.0, cfg=cfg_fast, seed=41)
        assert math.isfinite(rep.avg_response_time_s)
        assert 1.0 <= rep.avg_replica_count <= 5.0
        assert rep.ready_counts.min() >= 1
        assert rep.ready_counts.max() <= 5


class TestTraceEmission:
    def test_emitted_trace_round_trips(self, tmp_path):
        # target sits on the metric mean at two replicas, so the replica
        # count keeps crossing and the trace sees several distinct rates
        cfg = autoscaler(target_value=2.0, n_max=10)
        rep = run(is_exp(0.2), arrival_rate=20.0, duration_s=600.0,
                  warmup_s=300.0, cfg=cfg, seed=43)
        path = tmp_path / "trace.csv"
        rc.emit_profiling_trace(rep, path)
        trace = rc.parse_trace(path)
        assert len(trace.rows) == 300
        assert np.allclose(trace.rates, rep.trace.rates)

    def test_profile_trace_covers_requested_rates(self):
        trace = rc.profile_trace(is_exp(0.2), [2.0, 10.0], duration_s=420.0,
                                 warmup_s=300.0, seed=900)
        assert len(trace.rows) == 240
        assert set(np.unique(trace.rates)) == {2.0, 10.0}

    def test_profile_trace_rejects_empty_grid(self):
        with pytest.raises(rc.ValidationError):
            rc.profile_trace(is_exp(0.2), [])


class TestBackendEquivalence:
    def test_pure_python_path_matches_jit_path(self, tmp_path):
        sim_cfg = rc.SimulationConfig(
            autoscaler=autoscaler(target_value=2.0, n_max=4), workload=is_exp(0.2),
            arrival_rate=9.0, duration_s=220.0, warmup_s=20.0, seed=53)
        jit_dump = json.dumps(rc.simulate(sim_cfg).to_dict(include_series=True),
                              sort_keys=True)
        cfg_path = tmp_path / "sim.json"
        cfg_path.write_text(json.dumps(sim_cfg.to_dict()), encoding="utf-8")
        script = (
            "import json, sys\n"
            "import replicast as rc\n"
            "assert not rc.JIT_ENABLED\n"
            "cfg = rc.SimulationConfig.from_dict(json.load(open(sys.argv[1])))\n"
            "rep = rc.simulate(cfg)\n"
            "print(json.dumps(rep.to_dict(include_series=True), sort_keys=True))\n"
        )
        env = dict(os.environ, REPLICAST_DISABLE_JIT="1")
        proc = subprocess.run([sys.executable, "-c", script, str(cfg_path)],
                              capture_output=True, text=True, env=env, timeout=300)
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.strip() == jit_dump
