import numpy as np
import pytest

from prioqn.errors import ConfigError
from prioqn.model import NetworkSpec
from prioqn.oracle import allocation
from prioqn.sim import KERNELS, SimConfig, run_experiment, simulate_replication

from conftest import station

ROUTED = NetworkSpec(2, 3, [1, 2], [0.15, 0.1, 0.1, 0.2, 0.05, 0.1], [1.0, 1.5, 2.0, 1.2, 1.0, 2.0],
                     [[0, .3, 0, 0, 0, 0], [.2, 0, 0, 0, 0, 0], [0, 0, .1, .4, 0, 0],
                      [0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, .5], [0, 0, 0, 0, .3, 0]])

needs_cython = pytest.mark.skipif("cython" not in KERNELS, reason="compiled kernel not built")


def test_config_errors():
    spec = station(1, [0.5])
    for bad in (dict(events=0), dict(horizon=-1.0), dict(events=10, warmup=1.0),
                dict(events=10, replications=0), dict(), dict(events=10, horizon=5.0)):
        with pytest.raises(ConfigError):
            SimConfig(spec, **bad)


def test_trace_invariants():
    trace = []
    stats = simulate_replication(SimConfig(ROUTED, events=20000, warmup=0.0, seed=5), 0, trace=trace)
    assert len(trace) == 20000
    states = np.array([e[4] for e in trace])
    served = np.array([e[5] for e in trace])
    # non-idling with strict priority: the in-service counts are exactly the preemptive allocation
    np.testing.assert_array_equal(served, allocation(ROUTED, states))
    times = [e[0] for e in trace]
    assert all(b >= a for a, b in zip(times, times[1:]))
    np.testing.assert_array_equal(stats.entered, stats.departed + stats.in_system)
    np.testing.assert_array_equal(stats.in_system, states[-1])


def test_preemption_switches_server():
    spec = station(1, [0.4, 0.4])
    trace = []
    simulate_replication(SimConfig(spec, events=5000, warmup=0.0, seed=1), 0, trace=trace)
    hits = 0
    for prev, ev in zip(trace, trace[1:]):
        if ev[1] == 0 and ev[2] == 0 and prev[5][1] == 1:
            assert ev[5] == (1, 0)
            hits += 1
    assert hits > 10


def test_determinism_and_replication_independence():
    cfg = SimConfig(ROUTED, events=30000, seed=11, replications=3)
    a = simulate_replication(cfg, 1)
    b = simulate_replication(cfg, 1)
    c = simulate_replication(cfg, 2)
    for key in a.as_dict():
        np.testing.assert_array_equal(a.as_dict()[key], b.as_dict()[key])
    assert not np.array_equal(a.mean_queue, c.mean_queue)
    serial = run_experiment(cfg)
    threaded = run_experiment(cfg, workers=3)
    np.testing.assert_array_equal(serial["mean_queue"].mean, threaded["mean_queue"].mean)


@needs_cython
@pytest.mark.parametrize("spec", [ROUTED, station(2, [1.1, 0.3, 0.1]), station(1, [0.5])])
def test_kernels_bit_identical(spec):
    cfg = SimConfig(spec, events=50000, seed=3)
    a = simulate_replication(cfg, 0, kernel="python")
    b = simulate_replication(cfg, 0, kernel="cython")
    for key in a.as_dict():
        np.testing.assert_array_equal(a.as_dict()[key], b.as_dict()[key])
    assert a.events == b.events and a.elapsed == b.elapsed


@needs_cython
def test_kernels_identical_by_horizon():
    cfg = SimConfig(ROUTED, horizon=2000.0, seed=8)
    a = simulate_replication(cfg, 0, kernel="python")
    b = simulate_replication(cfg, 0, kernel="cython")
    np.testing.assert_array_equal(a.mean_queue, b.mean_queue)
    assert a.elapsed == pytest.approx(1600.0)


def test_single_replication_has_no_interval():
    res = run_experiment(SimConfig(station(1, [0.5]), events=2000, seed=0))
    assert res["mean_queue"].half_width is None
    assert res["mean_queue"].interval() is None


def test_stats_ranges():
    stats = simulate_replication(SimConfig(ROUTED, events=50000, seed=2), 0)
    assert np.all((stats.utilization >= 0) & (stats.utilization <= 1))
    assert np.all(stats.mean_queue >= 0)
    assert np.all((stats.p_empty_class >= 0) & (stats.p_empty_class <= 1))


def test_mm1_little_law():
    res = run_experiment(SimConfig(station(1, [0.5]), events=200000, seed=4, replications=5))
    q = res["mean_queue"].mean[0]
    t = res["mean_sojourn"].mean[0]
    assert q == pytest.approx(0.5 * t, rel=0.03)
    assert res["utilization"].mean[0] == pytest.approx(0.5, abs=0.01)


@pytest.mark.slow
def test_mm1_interval_coverage():
    spec = station(1, [0.5])
    covered = 0
    for seed in range(20):
        res = run_experiment(SimConfig(spec, events=100000, seed=seed, replications=20))
        covered += bool(res["mean_queue"].covers(1.0)[0])
    assert covered >= 18


@pytest.mark.slow
def test_priority_estimates_unbiased():
    """z-scores of the low-rank queue against 2/3 across independent experiments."""
    spec = station(1, [0.25, 0.25])
    z = []
    for seed in range(30):
        est = run_experiment(SimConfig(spec, events=200000, seed=500 + seed, replications=10))["mean_queue"]
        z.append((est.mean[1] - 2 / 3) / est.std_error[1])
    z = np.array(z)
    assert abs(z.mean()) < 3 * 1.2 / np.sqrt(len(z))
    assert np.mean(np.abs(z) <= 2.26) >= 0.8  # t quantile for 9 degrees of freedom


def test_pure_python_selection():
    import os
    import subprocess
    import sys

    env = dict(os.environ, PRIOQN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from prioqn.sim import DEFAULT_KERNEL; print(DEFAULT_KERNEL)"],
                         env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
