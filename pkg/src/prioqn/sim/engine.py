"""Replications, random streams and confidence intervals."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..model import NetworkSpec, validate_spec
from .kernels import get_kernel

BUFFER = 4096
ROLES = ("arrival", "service", "routing")
Z95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Run length is either ``events`` (event budget) or ``horizon`` (time).

    ``warmup`` is the discarded fraction of the run, measured in the same
    unit as the run length.
    """

    spec: NetworkSpec
    events: int | None = None
    horizon: float | None = None
    warmup: float = 0.2
    replications: int = 1
    seed: int = 0

    def __post_init__(self):
        if (self.events is None) == (self.horizon is None):
            raise ConfigError("give exactly one of events or horizon")
        if self.events is not None and not self.events > 0:
            raise ConfigError(f"event budget must be positive, got {self.events}")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if not 0 <= self.warmup < 1:
            raise ConfigError(f"warmup fraction must be in [0, 1), got {self.warmup}")
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")


@dataclass(frozen=True, eq=False)
class ReplicationStats:
    mean_queue: np.ndarray
    mean_sojourn: np.ndarray
    utilization: np.ndarray
    p_empty_class: np.ndarray
    p_empty_station: np.ndarray
    entered: np.ndarray
    departed: np.ndarray
    in_system: np.ndarray
    events: int
    elapsed: float

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "mean_queue": self.mean_queue,
            "mean_sojourn": self.mean_sojourn,
            "utilization": self.utilization,
            "p_empty_class": self.p_empty_class,
            "p_empty_station": self.p_empty_station,
        }


def stream_generators(seed: int, replication: int, num_classes: int) -> list[np.random.Generator]:
    """One PCG64 stream per (role, class), keyed by seed and replication."""
    gens = []
    for role in range(len(ROLES)):
        for k in range(num_classes):
            ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), role, k))
            gens.append(np.random.Generator(np.random.PCG64(ss)))
    return gens


def _cumulative_routing(spec: NetworkSpec) -> np.ndarray:
    cum = np.cumsum(spec.routing, axis=1)
    # exit when the draw lands beyond the last destination
    return np.where(spec.routing > 0, cum, -1.0)


def simulate_replication(config: SimConfig, replication: int, kernel: str | None = None,
                         trace: list | None = None) -> ReplicationStats:
    """One independent run, fully determined by ``(config.seed, replication)``.

    Pass a list as ``trace`` (Python kernel only) to receive one tuple
    ``(time, kind, class, destination, n, in_service)`` per event.
    """
    spec = config.spec
    validate_spec(spec).raise_for_problems()
    K = spec.num_classes
    gens = stream_generators(config.seed, replication, K)
    buf = np.empty((len(gens), BUFFER))
    for s, g in enumerate(gens):
        buf[s] = g.random(BUFFER)

    def refill(s):
        buf[s] = gens[s].random(BUFFER)

    if config.events is not None:
        max_events, horizon = int(config.events), math.inf
        warm_events, warm_time = int(config.warmup * config.events), 0.0
    else:
        max_events, horizon = -1, float(config.horizon)
        warm_events, warm_time = 0, config.warmup * config.horizon
    run = get_kernel("python" if trace is not None else kernel)
    out = run(np.array([spec.station_of(k) for k in range(K)]), spec.servers, spec.alpha,
              spec.mean_service, _cumulative_routing(spec), max_events, horizon,
              warm_events, warm_time, buf, refill, trace)

    T = out["elapsed"]
    with np.errstate(invalid="ignore", divide="ignore"):
        sojourn = np.where(out["sojourn_count"] > 0, out["sojourn_sum"] / out["sojourn_count"], np.nan)
        return ReplicationStats(
            mean_queue=out["area"] / T,
            mean_sojourn=sojourn,
            utilization=out["busy_area"] / (T * spec.servers),
            p_empty_class=out["zero_time"] / T,
            p_empty_station=out["empty_time"] / T,
            entered=out["entered"],
            departed=out["departed"],
            in_system=out["in_system"],
            events=int(out["events"]),
            elapsed=float(T),
        )


@dataclass(frozen=True)
class Estimate:
    mean: np.ndarray
    std_error: np.ndarray | None
    half_width: np.ndarray | None

    def interval(self):
        if self.half_width is None:
            return None
        return self.mean - self.half_width, self.mean + self.half_width

    def covers(self, value) -> np.ndarray:
        lo, hi = self.interval()
        return (lo <= value) & (value <= hi)


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: SimConfig
    replications: tuple[ReplicationStats, ...]
    estimates: dict[str, Estimate]

    def __getitem__(self, key) -> Estimate:
        return self.estimates[key]


def aggregate(reps) -> dict[str, Estimate]:
    out = {}
    R = len(reps)
    for key in reps[0].as_dict():
        data = np.array([r.as_dict()[key] for r in reps])
        mean = data.mean(axis=0)
        if R < 2:
            out[key] = Estimate(mean, None, None)
            continue
        se = data.std(axis=0, ddof=1) / math.sqrt(R)
        out[key] = Estimate(mean, se, Z95 * se)
    return out


def run_experiment(config: SimConfig, kernel: str | None = None, workers: int = 1) -> ExperimentResult:
    """All replications plus 95% normal-approximation intervals.

    With one replication the interval is reported as unavailable
    (``half_width is None``).  Results do not depend on ``workers``.
    """
    indices = range(config.replications)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            reps = list(pool.map(lambda r: simulate_replication(config, r, kernel), indices))
    else:
        reps = [simulate_replication(config, r, kernel) for r in indices]
    return ExperimentResult(config, tuple(reps), aggregate(reps))
