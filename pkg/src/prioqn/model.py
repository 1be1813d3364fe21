"""Network description and first-order traffic quantities.

Classes are indexed flat, 0-based, with the priority convention built in:
class ``i * J + k`` is the rank-``i`` class at station ``k`` (rank 0 is the
highest priority).  All routing between classes stays inside one type.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularRouting, ValidationError

ROW_SUM_TOL = 1e-12
RESIDUAL_TOL = 1e-12


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Open multiclass network with static buffer priorities.

    Attributes:
        num_stations: number of stations ``J``.
        num_types: number of job types (priority ranks) ``I``.
        servers: server count per station, length ``J``.
        alpha: external arrival rate per class, length ``K = I * J``.
        mu: service rate per class, length ``K``.
        routing: ``K x K`` matrix of routing probabilities.
    """

    num_stations: int
    num_types: int
    servers: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    routing: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "servers", _frozen(self.servers, dtype=np.int64))
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        object.__setattr__(self, "mu", _frozen(self.mu))
        object.__setattr__(self, "routing", _frozen(self.routing))

    @property
    def num_classes(self) -> int:
        return self.num_stations * self.num_types

    @property
    def mean_service(self) -> np.ndarray:
        return 1.0 / self.mu

    def station_of(self, cls: int) -> int:
        return cls % self.num_stations

    def rank_of(self, cls: int) -> int:
        return cls // self.num_stations

    def class_index(self, rank: int, station: int) -> int:
        return rank * self.num_stations + station

    def classes_at(self, station: int) -> list[int]:
        """Classes served at ``station``, highest priority first."""
        return [self.class_index(i, station) for i in range(self.num_types)]

    def servers_of(self, cls: int) -> int:
        return int(self.servers[self.station_of(cls)])

    def scaled(self, factor: float) -> "NetworkSpec":
        """Copy with every external arrival rate multiplied by ``factor``."""
        return NetworkSpec(self.num_stations, self.num_types, self.servers,
                           self.alpha * factor, self.mu, self.routing, self.name)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    index: tuple = ()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def raise_for_problems(self):
        if self.violations:
            raise ValidationError([v.message for v in self.violations])


def validate_spec(spec: NetworkSpec) -> ValidationReport:
    """Check every structural invariant and report what is violated."""
    out: list[Violation] = []
    J, I = spec.num_stations, spec.num_types
    if not (isinstance(J, (int, np.integer)) and J >= 1):
        out.append(Violation("stations", f"num_stations must be a positive integer, got {J!r}"))
    if not (isinstance(I, (int, np.integer)) and I >= 1):
        out.append(Violation("types", f"num_types must be a positive integer, got {I!r}"))
    if out:
        return ValidationReport(tuple(out))

    K = I * J
    if spec.servers.shape != (J,):
        out.append(Violation("servers", f"servers must have length {J}, got shape {spec.servers.shape}"))
    elif np.any(spec.servers < 1):
        bad = tuple(int(j) for j in np.flatnonzero(spec.servers < 1))
        out.append(Violation("servers", f"server counts must be >= 1 at stations {bad}", bad))
    for name in ("alpha", "mu"):
        arr = getattr(spec, name)
        if arr.shape != (K,):
            out.append(Violation(name, f"{name} must have length {K}, got shape {arr.shape}"))
    if spec.routing.shape != (K, K):
        out.append(Violation("routing", f"routing must be {K}x{K}, got shape {spec.routing.shape}"))
    if out:
        return ValidationReport(tuple(out))

    if not np.all(np.isfinite(spec.alpha)) or np.any(spec.alpha < 0):
        bad = tuple(int(k) for k in np.flatnonzero(~(spec.alpha >= 0)))
        out.append(Violation("alpha", f"external arrival rates must be finite and >= 0 (classes {bad})", bad))
    if not np.all(np.isfinite(spec.mu)) or np.any(spec.mu <= 0):
        bad = tuple(int(k) for k in np.flatnonzero(~(spec.mu > 0)))
        out.append(Violation("mu", f"service rates must be finite and > 0 (classes {bad})", bad))

    P = spec.routing
    if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
        bad = tuple(map(tuple, np.argwhere(~((P >= 0) & (P <= 1)))))
        out.append(Violation("routing", f"routing entries must lie in [0, 1] at {bad}", bad))
    rows = P.sum(axis=1)
    for k in np.flatnonzero(rows > 1 + ROW_SUM_TOL):
        out.append(Violation("row_sum", f"row sum > 1 for class {int(k)} ({rows[k]:.6g})", (int(k),)))
    ranks = np.arange(K) // J
    cross = (ranks[:, None] != ranks[None, :]) & (P != 0)
    for k, l in np.argwhere(cross):
        out.append(Violation("cross_type",
                             f"cross-type routing from class {int(k)} to class {int(l)}",
                             (int(k), int(l))))
    if not out:
        radius = max(abs(np.linalg.eigvals(P))) if K else 0.0
        if radius >= 1 - 1e-12:
            out.append(Violation("open", f"routing spectral radius {radius:.6g} >= 1; network is not open"))
    return ValidationReport(tuple(out))


@dataclass(frozen=True, eq=False)
class TrafficSolution:
    """Total arrival rates, station intensities and ``Q = (I - P')^-1``."""

    lam: np.ndarray
    rho: np.ndarray
    q_matrix: np.ndarray

    def residual(self, spec: NetworkSpec) -> float:
        return float(np.max(np.abs(self.lam - spec.alpha - spec.routing.T @ self.lam), initial=0.0))


def station_intensity(spec: NetworkSpec, lam) -> np.ndarray:
    """Nominal busy fraction of each station."""
    lam = np.asarray(lam, dtype=float)
    rho = np.zeros(spec.num_stations)
    for k in range(spec.num_classes):
        j = spec.station_of(k)
        rho[j] += lam[k] / (spec.servers[j] * spec.mu[k])
    return rho


def solve_traffic(spec: NetworkSpec, method: str = "direct",
                  tol: float = 1e-15, max_iter: int = 100_000) -> TrafficSolution:
    """Solve ``lambda = alpha + P' lambda``.

    The default is a direct linear solve.  ``method="fixed_point"`` iterates
    the equation instead (only useful for checking the direct result).
    """
    report = validate_spec(spec)
    report.raise_for_problems()
    K = spec.num_classes
    A = np.eye(K) - spec.routing.T
    if np.linalg.cond(A) > 1e12:
        raise SingularRouting("I - P' is numerically singular")
    try:
        Q = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise SingularRouting(str(exc)) from exc

    if method == "direct":
        lam = np.linalg.solve(A, spec.alpha)
        # one step of iterative refinement keeps the residual at machine level
        lam = lam + np.linalg.solve(A, spec.alpha - A @ lam)
    elif method == "fixed_point":
        lam = spec.alpha.copy()
        for _ in range(max_iter):
            nxt = spec.alpha + spec.routing.T @ lam
            if np.max(np.abs(nxt - lam), initial=0.0) <= tol:
                lam = nxt
                break
            lam = nxt
    else:
        raise ValueError(f"unknown method {method!r}")
    lam = np.maximum(lam, spec.alpha)  # exact lower bound; removes -0.0 noise
    return TrafficSolution(_frozen(lam), _frozen(station_intensity(spec, lam)), _frozen(Q))
