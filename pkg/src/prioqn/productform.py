"""Iterative product-form stationary distribution for SBP networks.

Ranks are solved in priority order.  Rank 0 at every station is an M/M/c
queue (the top classes form a Jackson network).  For a lower rank the
per-level service capacity ``kappa(n)`` averages the number of servers left
over by the higher ranks at the same station, weighting each occupancy
tuple by the product of the higher-rank marginals.  Each class marginal is
then a birth-death distribution with birth rate ``lambda`` and death rate
``kappa(n) * mu``, geometric from level ``c`` on.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import Unstable
from .model import NetworkSpec, TrafficSolution, solve_traffic


@dataclass(frozen=True)
class ClassMarginal:
    """Stationary law of one class's queue length.

    ``P_n = p0 * prod_{r<=n} lambda / (kappa(r) mu)``; the finite prefix
    ``p0, head`` covers levels ``0 .. c-1`` and from there on each level is
    ``tail_ratio`` times the previous one.
    """

    class_id: int
    p0: float
    head: tuple[float, ...]
    tail_ratio: float

    @property
    def prefix(self) -> tuple[float, ...]:
        return (self.p0,) + self.head

    @property
    def saturation_level(self) -> int:
        return len(self.head) + 1

    def pmf(self, n: int) -> float:
        if n < 0:
            return 0.0
        pre = self.prefix
        if n < len(pre):
            return pre[n]
        return pre[-1] * self.tail_ratio ** (n - len(pre) + 1)

    def pmf_array(self, nmax: int) -> np.ndarray:
        """Probabilities of levels ``0 .. nmax``."""
        pre = np.asarray(self.prefix)
        out = np.zeros(nmax + 1)
        m = min(len(pre), nmax + 1)
        out[:m] = pre[:m]
        if nmax + 1 > len(pre):
            steps = np.arange(1, nmax + 2 - len(pre))
            out[len(pre):] = pre[-1] * self.tail_ratio ** steps
        return out

    def tail_mass(self, n: int) -> float:
        """``P(N >= n)`` in closed form."""
        if n <= 0:
            return 1.0
        pre = self.prefix
        c = len(pre)
        q = self.tail_ratio
        geo = pre[-1] * q / (1.0 - q) if q > 0 else 0.0
        if n < c:
            return float(sum(pre[n:]) + geo)
        return pre[-1] * q ** (n - c + 1) / (1.0 - q) if q > 0 else 0.0

    def total_mass(self) -> float:
        return float(sum(self.prefix)) + self.tail_mass(len(self.prefix))

    @property
    def is_absent(self) -> bool:
        return self.p0 == 1.0 and self.tail_ratio == 0.0


@dataclass(frozen=True)
class KappaTable:
    """Effective service capacity ``kappa(1..c)``; constant beyond ``c``."""

    class_id: int
    values: tuple[float, ...]
    saturation_level: int

    def __call__(self, n: int) -> float:
        if n <= 0:
            return 0.0
        return self.values[min(n, self.saturation_level) - 1]


def _absent(class_id: int, c: int) -> ClassMarginal:
    return ClassMarginal(class_id, 1.0, (0.0,) * (c - 1), 0.0)


def mmc_marginal(lam: float, mu: float, c: int, class_id: int = -1) -> ClassMarginal:
    """Stationary distribution of an M/M/c queue.

    Raises:
        Unstable: if ``lam >= c * mu``.
    """
    c = int(c)
    if lam == 0:
        return _absent(class_id, c)
    a = lam / mu
    if a >= c:
        raise Unstable(f"M/M/{c} with offered load {a:.6g} has no stationary law")
    terms = [a ** n / math.factorial(n) for n in range(c)]
    p0 = 1.0 / (sum(terms) + a ** c / (math.factorial(c) * (1.0 - a / c)))
    head = tuple(p0 * t for t in terms[1:])
    return ClassMarginal(class_id, p0, head, a / c)


def _compositions(parts: int, bound: int):
    """All tuples of ``parts`` nonnegative ints with sum < ``bound``."""
    if parts == 0:
        yield ()
        return
    for first in range(bound):
        for rest in _compositions(parts - 1, bound - first):
            yield (first,) + rest


def kappa_table(spec: NetworkSpec, traffic: TrafficSolution,
                higher: Sequence[ClassMarginal], rank: int, station: int) -> KappaTable:
    """Capacity table of class ``(rank, station)`` given its higher ranks.

    ``higher`` holds the marginals of ranks ``0 .. rank-1`` at the same
    station, in priority order.  Rank 0 uses ``kappa(n) = min(n, c)``.
    """
    c = int(spec.servers[station])
    cls = spec.class_index(rank, station)
    if rank == 0:
        return KappaTable(cls, tuple(float(min(n, c)) for n in range(1, c + 1)), c)
    if len(higher) != rank:
        raise ValueError(f"rank {rank} needs {rank} higher-rank marginals, got {len(higher)}")

    pmfs = [m.prefix for m in higher]
    weights: dict[int, float] = {}
    for combo in _compositions(rank, c):
        w = 1.0
        for u, n_u in enumerate(combo):
            w *= pmfs[u][n_u] if n_u < len(pmfs[u]) else higher[u].pmf(n_u)
        s = sum(combo)
        weights[s] = weights.get(s, 0.0) + w
    values = []
    for n in range(1, c + 1):
        values.append(sum(max(min(n, c - y), 0) * w for y, w in sorted(weights.items())))
    return KappaTable(cls, tuple(values), c)


def class_marginal(spec: NetworkSpec, traffic: TrafficSolution,
                   kappa: KappaTable, class_id: int) -> ClassMarginal:
    """Normalized marginal of ``class_id`` from its capacity table.

    The normalizing constant uses the exact geometric tail, so nothing is
    truncated.

    Raises:
        Unstable: if the tail ratio is >= 1 or some ``kappa(n)`` is zero.
    """
    lam = float(traffic.lam[class_id])
    mu = float(spec.mu[class_id])
    c = kappa.saturation_level
    if lam == 0:
        return _absent(class_id, c)
    w = [1.0]
    for n in range(1, c):
        if kappa(n) <= 0:
            raise Unstable(f"class {class_id}: zero capacity at level {n}")
        w.append(w[-1] * lam / (kappa(n) * mu))
    if kappa(c) <= 0:
        raise Unstable(f"class {class_id}: zero capacity at saturation")
    q = lam / (kappa(c) * mu)
    if q >= 1:
        raise Unstable(f"class {class_id}: tail ratio {q:.6g} >= 1")
    total = sum(w) + w[-1] * q / (1.0 - q)
    p0 = 1.0 / total
    return ClassMarginal(class_id, p0, tuple(p0 * x for x in w[1:]), q)


def marginal_moments(marginal: ClassMarginal) -> tuple[float, float]:
    """Mean and variance of a marginal, tail summed in closed form."""
    pre = marginal.prefix
    c = len(pre)
    q = marginal.tail_ratio
    m1 = sum(n * p for n, p in enumerate(pre))
    m2 = sum(n * n * p for n, p in enumerate(pre))
    if q > 0:
        # levels n = c-1+m for m >= 1 carry pre[-1] * q**m
        s0 = q / (1 - q)
        s1 = q / (1 - q) ** 2
        s2 = q * (1 + q) / (1 - q) ** 3
        base = c - 1
        m1 += pre[-1] * (s1 + base * s0)
        m2 += pre[-1] * (s2 + 2 * base * s1 + base * base * s0)
    return m1, m2 - m1 * m1


def joint_probability(marginals: Sequence[ClassMarginal], state: Sequence[int]) -> float:
    """Product-form probability of a full state vector."""
    if len(marginals) != len(state):
        raise ValueError(f"state has {len(state)} entries for {len(marginals)} classes")
    p = 1.0
    for m, n in zip(marginals, state):
        p *= m.pmf(int(n))
    return p


@dataclass(frozen=True)
class ClassStability:
    class_id: int
    worst_ratio: float   # lambda / (kappa(1) mu); the largest over n >= 1
    tail_ratio: float    # lambda / (kappa(c) mu); governs normalizability


@dataclass(frozen=True)
class StabilityReport:
    rho: tuple[float, ...]
    classes: tuple[ClassStability | None, ...]
    stable: bool
    first_failure: tuple[str, int, float] | None = None

    @property
    def strict(self) -> bool:
        """True when ``lambda / (kappa(n) mu) < 1`` holds at every level."""
        return self.stable and all(c is not None and c.worst_ratio < 1 for c in self.classes)


def _ratio(lam, kappa_value, mu):
    if lam == 0:
        return 0.0
    if kappa_value <= 0:
        return math.inf
    return lam / (kappa_value * mu)


def stability_check(spec: NetworkSpec, traffic: TrafficSolution | None = None) -> StabilityReport:
    """Station intensities plus, rank by rank, the capacity ratios.

    The verdict is stable when every ``rho_j < 1`` and every class's tail
    ratio is below one (so its marginal normalizes).  Ratios at a station
    stop at its first failing rank because lower ranks depend on it.
    """
    if traffic is None:
        traffic = solve_traffic(spec)
    rho = tuple(float(r) for r in traffic.rho)
    entries: list[ClassStability | None] = [None] * spec.num_classes
    failure = None
    for j, r in enumerate(rho):
        if r >= 1 and failure is None:
            failure = ("station", j, r)
    for j in range(spec.num_stations):
        higher: list[ClassMarginal] = []
        for i in range(spec.num_types):
            cls = spec.class_index(i, j)
            kap = kappa_table(spec, traffic, higher, i, j)
            lam, mu = float(traffic.lam[cls]), float(spec.mu[cls])
            entry = ClassStability(cls, _ratio(lam, kap(1), mu), _ratio(lam, kap(kap.saturation_level), mu))
            entries[cls] = entry
            if entry.tail_ratio >= 1:
                if failure is None:
                    failure = ("class", cls, entry.tail_ratio)
                break
            higher.append(class_marginal(spec, traffic, kap, cls))
    return StabilityReport(rho, tuple(entries), failure is None, failure)


@dataclass(frozen=True, eq=False)
class ProductForm:
    """All capacity tables and marginals of a stable network."""

    spec: NetworkSpec
    traffic: TrafficSolution
    kappas: tuple[KappaTable, ...]
    marginals: tuple[ClassMarginal, ...]

    def probability(self, state: Sequence[int]) -> float:
        return joint_probability(self.marginals, state)

    def block_probability(self, rank: int, block: Sequence[int]) -> float:
        """Joint probability of the ``J`` rank-``rank`` classes."""
        J = self.spec.num_stations
        return joint_probability(self.marginals[rank * J:(rank + 1) * J], block)

    def means(self) -> np.ndarray:
        return np.array([marginal_moments(m)[0] for m in self.marginals])

    def variances(self) -> np.ndarray:
        return np.array([marginal_moments(m)[1] for m in self.marginals])


def solve_product_form(spec: NetworkSpec, traffic: TrafficSolution | None = None) -> ProductForm:
    """Compute every marginal in priority order.

    Raises:
        Unstable: if any station intensity or class tail ratio is >= 1.
    """
    if traffic is None:
        traffic = solve_traffic(spec)
    for j, r in enumerate(traffic.rho):
        if r >= 1:
            raise Unstable(f"station {j} has traffic intensity {r:.6g} >= 1")
    K = spec.num_classes
    kappas: list[KappaTable | None] = [None] * K
    marginals: list[ClassMarginal | None] = [None] * K
    for j in range(spec.num_stations):
        c = int(spec.servers[j])
        higher: list[ClassMarginal] = []
        for i in range(spec.num_types):
            cls = spec.class_index(i, j)
            kap = kappa_table(spec, traffic, higher, i, j)
            if i == 0:
                marg = mmc_marginal(float(traffic.lam[cls]), float(spec.mu[cls]), c, cls)
            else:
                marg = class_marginal(spec, traffic, kap, cls)
            kappas[cls] = kap
            marginals[cls] = marg
            higher.append(marg)
    return ProductForm(spec, traffic, tuple(kappas), tuple(marginals))
