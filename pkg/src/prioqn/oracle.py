"""Truncated-CTMC ground truth for the product form.

The true chain serves each station under instantaneous preemptive priority:
class ``k`` holds ``max(min(n_k, c - sum of higher-rank n_l), 0)`` servers in
the current state.  The product form instead averages higher-rank
occupancy through ``kappa``; this module measures how far apart the two are.

Truncation: an external arrival to a class at its cap is blocked, and a job
routed into a class at its cap leaves the network.  Both are counted as lost
flux, and the stationary mass on the cap boundary is reported as the
escaped-mass bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order

from .errors import CapTooSmall, NotIrreducible
from .model import NetworkSpec, TrafficSolution, solve_traffic
from .productform import ProductForm, solve_product_form

TAIL_EPS = 1e-10
MAX_STATES = 5_000_000
DIRECT_LIMIT = 5_000


@dataclass(frozen=True, eq=False)
class TruncatedChain:
    """Generator of the truncated chain.

    ``rates`` is a CSR matrix of off-diagonal transition rates between the
    rows of ``states``; the diagonal is implied.  ``lost`` is the rate per
    state at which jobs are blocked or dropped by the caps.
    """

    spec: NetworkSpec
    caps: tuple[int, ...]
    states: np.ndarray
    rates: sp.csr_matrix
    lost: np.ndarray

    @property
    def num_states(self) -> int:
        return self.states.shape[0]

    def generator(self) -> sp.csr_matrix:
        out_rate = np.asarray(self.rates.sum(axis=1)).ravel()
        return (self.rates - sp.diags(out_rate)).tocsr()

    def index_of(self, state: Sequence[int]) -> int:
        if any(n < 0 or n > c for n, c in zip(state, self.caps)):
            raise KeyError(tuple(state))
        return int(np.dot(state, _strides(self.caps)))

    def successors(self, state: Sequence[int]) -> dict[tuple[int, ...], float]:
        row = self.rates.getrow(self.index_of(state))
        return {tuple(int(x) for x in self.states[j]): float(v) for j, v in zip(row.indices, row.data)}


@dataclass(frozen=True, eq=False)
class OracleResult:
    chain: TruncatedChain
    pi: np.ndarray
    residual: float
    escaped_mass: float
    lost_flux: float
    oracle_means: np.ndarray
    tv: float | None = None
    pf_means: np.ndarray | None = None
    mean_gaps: np.ndarray | None = None

    def marginal(self, cls: int) -> np.ndarray:
        cap = self.chain.caps[cls]
        return np.bincount(self.chain.states[:, cls], weights=self.pi, minlength=cap + 1)


def _strides(caps) -> np.ndarray:
    caps = np.asarray(caps, dtype=np.int64)
    strides = np.ones(len(caps), dtype=np.int64)
    for k in range(len(caps) - 2, -1, -1):
        strides[k] = strides[k + 1] * (caps[k + 1] + 1)
    return strides


def allocation(spec: NetworkSpec, states: np.ndarray) -> np.ndarray:
    """Servers held by each class in each state under preemptive priority."""
    states = np.atleast_2d(states)
    busy = np.zeros_like(states)
    J = spec.num_stations
    for j in range(J):
        used = np.zeros(states.shape[0], dtype=states.dtype)
        c = int(spec.servers[j])
        for cls in spec.classes_at(j):
            got = np.clip(np.minimum(states[:, cls], c - used), 0, None)
            busy[:, cls] = got
            used = used + got
    return busy


def default_caps(spec: NetworkSpec, pf: ProductForm | None = None, eps: float = TAIL_EPS) -> tuple[int, ...]:
    """Twice the level where each class's product-form tail drops below ``eps``."""
    if pf is None:
        pf = solve_product_form(spec)
    caps = []
    for cls, m in enumerate(pf.marginals):
        if m.is_absent:
            caps.append(0)
            continue
        n = 1
        while m.tail_mass(n) >= eps:
            n += 1
        caps.append(max(2 * n, spec.servers_of(cls)))
    return tuple(caps)


def build_generator(spec: NetworkSpec, caps: Sequence[int], traffic: TrafficSolution | None = None,
                    max_states: int = MAX_STATES) -> TruncatedChain:
    """Enumerate the truncated state space and its transition rates.

    Raises:
        CapTooSmall: if a class that carries traffic has a cap below the
            server count of its station.
    """
    if traffic is None:
        traffic = solve_traffic(spec)
    K = spec.num_classes
    caps = tuple(int(c) for c in caps)
    if len(caps) != K:
        raise ValueError(f"need {K} caps, got {len(caps)}")
    for cls, cap in enumerate(caps):
        if traffic.lam[cls] > 0 and cap < spec.servers_of(cls):
            raise CapTooSmall(f"class {cls}: cap {cap} < {spec.servers_of(cls)} servers")
        if cap < 0:
            raise CapTooSmall(f"class {cls}: negative cap")
    size = math.prod(c + 1 for c in caps)
    if size > max_states:
        raise ValueError(f"truncated space has {size} states (limit {max_states}); pass smaller caps")

    grids = np.indices([c + 1 for c in caps]).reshape(K, -1).T.astype(np.int64)
    strides = _strides(caps)
    idx = np.arange(size, dtype=np.int64)
    busy = allocation(spec, grids)
    capv = np.asarray(caps)

    rows, cols, vals = [], [], []
    lost = np.zeros(size)

    def emit(mask, dest, rate):
        rows.append(idx[mask])
        cols.append(dest[mask])
        vals.append(np.broadcast_to(rate, idx.shape)[mask])

    P = spec.routing
    for k in range(K):
        a = float(spec.alpha[k])
        if a > 0:
            room = grids[:, k] < capv[k]
            emit(room, idx + strides[k], a)
            lost[~room] += a
        service = spec.mu[k] * busy[:, k]
        serving = service > 0
        if not serving.any():
            continue
        exit_p = max(1.0 - float(P[k].sum()), 0.0)
        drop = exit_p * service
        for l in np.flatnonzero(P[k]):
            if l == k:
                continue  # self-loop leaves the state unchanged
            rate = P[k, l] * service
            room = serving & (grids[:, l] < capv[l])
            emit(room, idx - strides[k] + strides[l], rate)
            full = serving & ~room
            drop = drop + np.where(full, rate, 0.0)
            lost += np.where(full, rate, 0.0)
        emit(serving & (drop > 0), idx - strides[k], drop)

    if rows:
        R = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(size, size)).tocsr()
    else:
        R = sp.csr_matrix((size, size))
    R.sum_duplicates()
    R.eliminate_zeros()
    return TruncatedChain(spec, caps, grids, R, lost)


def _reachable(chain: TruncatedChain) -> np.ndarray:
    order = breadth_first_order(chain.rates, 0, directed=True, return_predecessors=False)
    return np.sort(order)


def _solve_pinned(B, b, direct: bool, refine_steps: int) -> np.ndarray:
    """Sparse LU on small or two-dimensional spaces, Jacobi-GMRES otherwise.

    LU fill-in grows quickly on grids of three or more dimensions, where
    the preconditioned Krylov solve is orders of magnitude faster.
    """
    if not direct:
        M = sp.diags(1.0 / B.diagonal())
        y, info = spla.gmres(B, b, M=M, rtol=1e-15, atol=0.0, restart=100, maxiter=5000)
        if info == 0:
            return y
    lu = spla.splu(B)
    y = lu.solve(b)
    for _ in range(refine_steps):
        y = y + lu.solve(b - B @ y)
    return y


def stationary_solve(chain: TruncatedChain, traffic: TrafficSolution | None = None,
                     refine_steps: int = 3) -> OracleResult:
    """Stationary vector by sparse LU on the states reachable from empty.

    Raises:
        NotIrreducible: if a class that carries traffic never becomes
            nonempty in the reachable component.
    """
    spec = chain.spec
    if traffic is None:
        traffic = solve_traffic(spec)
    keep = _reachable(chain)
    sub_states = chain.states[keep]
    for cls in range(spec.num_classes):
        if traffic.lam[cls] > 0 and not np.any(sub_states[:, cls] > 0):
            raise NotIrreducible(f"class {cls} carries traffic but is never occupied in the truncated chain")

    G = chain.generator()[keep][:, keep].tocsc()
    n = len(keep)
    # pin the empty state (row 0 of keep) and solve the other balance
    # equations; a dense normalization row would wreck the sparsity
    A = G.T.tocsc()
    x = np.ones(n)
    if n > 1:
        B = A[1:, 1:].tocsc()
        b = -A[1:, 0].toarray().ravel()
        x[1:] = _solve_pinned(B, b, spec.num_classes <= 2 or n <= DIRECT_LIMIT, refine_steps)
    x = np.clip(x, 0.0, None)
    x /= x.sum()

    pi = np.zeros(chain.num_states)
    pi[keep] = x
    residual = float(np.max(np.abs(G.T @ x), initial=0.0))
    capv = np.asarray(chain.caps)
    on_edge = np.any((chain.states == capv) & (capv > 0), axis=1)
    means = chain.states.T.astype(float) @ pi
    return OracleResult(chain, pi, residual, float(pi[on_edge].sum()), float(pi @ chain.lost), means)


def product_form_on(chain: TruncatedChain, pf: ProductForm) -> np.ndarray:
    """Product form restricted to the truncated states and renormalized."""
    w = np.ones(chain.num_states)
    for cls, m in enumerate(pf.marginals):
        w *= m.pmf_array(chain.caps[cls])[chain.states[:, cls]]
    return w / w.sum()


def compare_to_product_form(result: OracleResult, pf: ProductForm) -> OracleResult:
    """Attach total-variation distance and per-class mean gaps."""
    q = product_form_on(result.chain, pf)
    tv = 0.5 * float(np.abs(result.pi - q).sum())
    pf_means = pf.means()
    return replace(result, tv=min(max(tv, 0.0), 1.0), pf_means=pf_means,
                   mean_gaps=result.oracle_means - pf_means)


def run_oracle(spec: NetworkSpec, caps: Sequence[int] | None = None) -> OracleResult:
    traffic = solve_traffic(spec)
    pf = solve_product_form(spec, traffic)
    if caps is None:
        caps = default_caps(spec, pf)
    chain = build_generator(spec, caps, traffic)
    return compare_to_product_form(stationary_solve(chain, traffic), pf)


def _block_terms(spec: NetworkSpec, pf: ProductForm, rank: int, block: np.ndarray) -> tuple[float, float]:
    """Both sides of the rank-``rank`` stationary balance identity."""
    J = spec.num_stations
    cls = [rank * J + k for k in range(J)]
    kap = pf.kappas
    mu = spec.mu
    alpha = spec.alpha
    P = spec.routing

    def prob(b):
        if np.any(b < 0):
            return 0.0
        return pf.block_probability(rank, b)

    here = prob(block)
    lhs = sum(alpha[c] for c in cls) * here + sum(kap[c](block[k]) * mu[c] for k, c in enumerate(cls)) * here
    rhs = 0.0
    for k, c in enumerate(cls):
        up = block.copy()
        up[k] += 1
        exit_p = 1.0 - sum(P[c, d] for d in cls)
        rhs += kap[c](block[k] + 1) * mu[c] * exit_p * prob(up)
        if block[k] > 0:
            down = block.copy()
            down[k] -= 1
            rhs += alpha[c] * prob(down)
        rhs += kap[c](block[k]) * mu[c] * P[c, c] * here
    for r, cr in enumerate(cls):
        for s, cs in enumerate(cls):
            if r == s or P[cr, cs] == 0 or block[s] == 0:
                continue
            moved = block.copy()
            moved[r] += 1
            moved[s] -= 1
            rhs += kap[cr](block[r] + 1) * mu[cr] * P[cr, cs] * prob(moved)
    return lhs, rhs


def paper_balance_residual(spec: NetworkSpec, pf: ProductForm, sample_states: Sequence[Sequence[int]]) -> float:
    """Largest violation of the per-rank balance identity over the samples.

    Each full state is split into its rank blocks; every block is checked
    with the product form's own ``kappa`` in place of the instantaneous
    server allocation.
    """
    J = spec.num_stations
    worst = 0.0
    for state in sample_states:
        state = np.asarray(state, dtype=np.int64)
        for rank in range(spec.num_types):
            lhs, rhs = _block_terms(spec, pf, rank, state[rank * J:(rank + 1) * J].copy())
            worst = max(worst, abs(lhs - rhs))
    return worst


def random_states(spec: NetworkSpec, count: int, max_level: int = 8, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, max_level + 1, size=(count, spec.num_classes))
