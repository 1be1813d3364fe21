"""Single-station priority metrics: exact values and the SRBM approximation.

Both routes take a single-server station whose ``K`` classes are served in
strict priority order (class 0 first) and whose only routing is a feedback
self-loop ``p_kk``.  The exact route uses the product-form means; the SRBM
route computes each rank's mean total workload from its drift and variance
and converts it to a sojourn time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, Unstable
from .model import NetworkSpec, TrafficSolution, solve_traffic
from .tables import OutputTable


@dataclass(frozen=True, eq=False)
class VariabilityParams:
    """Per-class interarrival variance ``a`` and service-time variance ``b``."""

    a: np.ndarray
    b: np.ndarray

    @classmethod
    def exponential(cls, spec: NetworkSpec) -> "VariabilityParams":
        with np.errstate(divide="ignore"):
            a = np.where(spec.alpha > 0, 1.0 / spec.alpha ** 2, np.inf)
        return cls(a, spec.mean_service ** 2)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("variances must be nonnegative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True, eq=False)
class MetricsRow:
    """Per-class means for one scenario.

    ``eq``, ``et`` are mean queue lengths and sojourn times; ``ew`` holds
    the mean total workload of classes ``0..k`` (SRBM rows only).
    """

    lam: np.ndarray
    rho: float
    eq: np.ndarray
    et: np.ndarray
    ew: np.ndarray | None = None

    @property
    def eq_total(self) -> float:
        return float(np.sum(self.eq))

    def et_cumulative(self) -> np.ndarray:
        """``sum_{i<=k} ET_i`` for every ``k``."""
        return np.cumsum(self.et)

    def et_table_compat(self) -> np.ndarray:
        """Aggregate as printed in the published table: ``ET_1 + ET_k``."""
        out = self.et + self.et[0]
        out[0] = self.et[0]
        return out

    def aggregates(self, table_compat: bool = False) -> np.ndarray:
        return self.et_table_compat() if table_compat else self.et_cumulative()


def _check_shape(spec: NetworkSpec):
    if spec.num_stations != 1 or int(spec.servers[0]) != 1:
        raise ShapeError("needs a single station with a single server")
    off = spec.routing - np.diag(np.diag(spec.routing))
    if np.any(off != 0):
        raise ShapeError("routing must be diagonal (self-loops only)")


def exact_metrics(spec: NetworkSpec, traffic: TrafficSolution | None = None) -> MetricsRow:
    """Exact means for the single-server priority station.

    ``EQ_k = lam_k m_k / (1 - sum_{i<=k} lam_i m_i)`` and
    ``ET_k = m_k / (1 - sum_{i<=k} lam_i m_i)``.
    """
    _check_shape(spec)
    if traffic is None:
        traffic = solve_traffic(spec)
    lam = np.asarray(traffic.lam)
    m = spec.mean_service
    load = np.cumsum(lam * m)
    if load[-1] >= 1:
        raise Unstable(f"total load {load[-1]:.6g} >= 1")
    et = m / (1.0 - load)
    return MetricsRow(lam.copy(), float(load[-1]), lam * et, et)


def _drift(k, lam, m, p):
    return (1.0 - p[k]) * (np.sum(lam[:k + 1] * m[:k + 1]) - 1.0)


def _variance(k, lam, m, p, alpha, var):
    total = 0.0
    for i in range(k + 1):
        arr = alpha[i] if alpha[i] == 0 else alpha[i] ** 3 * var.a[i]
        total += lam[i] * var.b[i] + m[i] ** 2 * (arr + lam[i] * p[i] * (1 - p[i])) / (1 - p[i]) ** 2
    return (1.0 - p[k]) ** 2 * total


def srbm_workload(k: int, spec: NetworkSpec, traffic: TrafficSolution,
                  variability: VariabilityParams) -> float:
    """Mean total workload ``sigma_k^2 / (2 |theta_k|)`` of classes ``0..k``.

    Raises:
        Unstable: if the drift ``theta_k`` is not negative.
    """
    lam = np.asarray(traffic.lam)
    m = spec.mean_service
    p = np.diag(spec.routing)
    theta = _drift(k, lam, m, p)
    if theta >= 0:
        raise Unstable(f"class {k}: drift {theta:.6g} is not negative")
    sigma2 = _variance(k, lam, m, p, spec.alpha, variability)
    return sigma2 / (2.0 * abs(theta))


def srbm_terms(k: int, spec: NetworkSpec, traffic: TrafficSolution,
               variability: VariabilityParams) -> tuple[float, float]:
    """``(theta_k, sigma_k^2)`` for inspection."""
    lam = np.asarray(traffic.lam)
    m = spec.mean_service
    p = np.diag(spec.routing)
    return _drift(k, lam, m, p), _variance(k, lam, m, p, spec.alpha, variability)


def srbm_metrics(spec: NetworkSpec, traffic: TrafficSolution | None = None,
                 variability: VariabilityParams | None = None) -> MetricsRow:
    """SRBM sojourn times ``(EW_k + m_k) / (1 - sum_{i<k} lam_i m_i)``."""
    _check_shape(spec)
    if traffic is None:
        traffic = solve_traffic(spec)
    if variability is None:
        variability = VariabilityParams.exponential(spec)
    lam = np.asarray(traffic.lam)
    m = spec.mean_service
    K = spec.num_classes
    ew = np.array([srbm_workload(k, spec, traffic, variability) for k in range(K)])
    higher = np.concatenate(([0.0], np.cumsum(lam * m)[:-1]))
    et = (ew + m) / (1.0 - higher)
    return MetricsRow(lam.copy(), float(np.sum(lam * m)), lam * et, et, ew)


def _ratio_pct(err, exact):
    return abs(err) / exact * 100.0 if exact else None


def comparison_table(spec: NetworkSpec, variability: VariabilityParams | None = None,
                     table_compat: bool = False, title: str | None = None) -> OutputTable:
    """EXACT, SRBM, ERROR and RATIO rows in the layout of the published table.

    RATIO cells are percentages.
    """
    traffic = solve_traffic(spec)
    exact = exact_metrics(spec, traffic)
    approx = srbm_metrics(spec, traffic, variability)
    K = spec.num_classes
    agg_label = "ET1+ETk" if table_compat else "sum ET"
    headers = ["row"] + [f"lambda{k + 1}" for k in range(K)] + ["rho", "EQ_total"] + \
        [f"ET_hat{k + 1}" for k in range(K)]
    table = OutputTable(title or f"EXACT vs SRBM ({agg_label} aggregation)", headers)

    def values(row):
        return [row.eq_total] + list(row.aggregates(table_compat))

    ev, sv = values(exact), values(approx)
    lam = [float(x) for x in exact.lam]
    table.add_row("EXACT", *lam, exact.rho, *ev)
    table.add_row("SRBM", *lam, approx.rho, *sv)
    err = [s - e for s, e in zip(sv, ev)]
    table.add_row("ERROR", *([None] * (K + 1)), *err)
    table.add_row("RATIO%", *([None] * (K + 1)), *[_ratio_pct(d, e) for d, e in zip(err, ev)])
    return table
