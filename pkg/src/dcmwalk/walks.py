"""Stationary distributions, extremal values, hitting and cover times.

The stationary vector is computed by power iteration on the lazy kernel
(I + P)/2 restricted to the attractive SCC (the lazy kernel has the same
stationary vector and no periodicity obstruction), with a direct dense
solve as a cross-check on small graphs. Support is structural (SCC
membership), never a numeric threshold on pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    CensoredError,
    NonUniqueError,
    NumericalError,
    ValidationError,
)
from .graph import Multigraph, attractive_scc, sccs

POWER_TOL = 1e-12
ACCEPT_RESIDUAL = 1e-10
MAX_POWER_ITER = 10**6
CROSS_CHECK_MAX_N = 2000


@dataclass(frozen=True)
class StationaryResult:
    """Stationary vector with structural support and diagnostics."""

    pi: np.ndarray
    support: np.ndarray
    pi_min: float
    pi_max: float
    residual: float
    iterations: int
    cross_check_linf: float | None = None

    @property
    def n(self) -> int:
        return len(self.pi)


@dataclass(frozen=True)
class HittingEstimate:
    """Monte Carlo walk-time estimate with censoring diagnostics.

    `samples` holds the per-replicate step counts (step_cap for censored
    replicates) so callers can emit one CSV row per replicate.
    """

    mean: float
    se: float
    reps: int
    hits: int
    censored: int
    step_cap: int
    samples: np.ndarray | None = None
    start: int | None = None

    @property
    def censoring_biased(self) -> bool:
        return self.censored > 0


@dataclass(frozen=True)
class WalkTimes:
    """Exact maximal hitting time plus cover-time estimate and Matthews bound."""

    targets: np.ndarray
    hitting: np.ndarray  # shape (len(targets), n); hitting[j, x] = E[tau_x(y_j)]
    t_hit: float
    t_cov: HittingEstimate
    matthews_upper: float

    def hitting_time(self, x: int, y: int) -> float:
        j = int(np.searchsorted(self.targets, y))
        if j >= len(self.targets) or self.targets[j] != y:
            raise ValidationError(f"{y} is not one of the solved targets")
        return float(self.hitting[j, x])


def transition_matrix(g: Multigraph) -> sp.csr_matrix:
    """Row-stochastic transition matrix of the simple random walk."""
    if np.any(g.d_out == 0):
        raise NonUniqueError("vertex with out-degree 0: walk transitions undefined")
    data = 1.0 / g.d_out[g.tail_vertex]
    return sp.csr_matrix(
        (data, (g.tail_vertex, g.successors())), shape=(g.n, g.n)
    )


def stationary_distribution(
    g: Multigraph,
    tol: float = POWER_TOL,
    max_iter: int = MAX_POWER_ITER,
    cross_check: bool | None = None,
) -> StationaryResult:
    """Stationary distribution of the walk, supported on the attractive SCC.

    Power iteration runs on the lazy kernel until the plain-kernel residual
    ||pi P - pi||_1 drops below `tol`. For graphs with at most 2000 vertices
    (or when cross_check=True), a dense singular-system solve verifies the
    result to 1e-10 in sup norm.
    """
    comp = attractive_scc(g)
    if comp is None:
        raise NonUniqueError()
    if np.any(g.d_out[comp] == 0):
        raise NonUniqueError("attractive component contains a sink vertex")
    local = -np.ones(g.n, dtype=np.int64)
    local[comp] = np.arange(len(comp))
    src = local[g.tail_vertex]
    dst = local[g.successors()]
    inside = src >= 0
    if np.any(inside & (dst < 0)):
        raise NumericalError("attractive component has an outgoing edge")
    k = len(comp)
    p_sub = sp.csr_matrix(
        (
            1.0 / g.d_out[g.tail_vertex[inside]],
            (src[inside], dst[inside]),
        ),
        shape=(k, k),
    )
    pi = np.full(k, 1.0 / k)
    residual = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        image = pi @ p_sub
        residual = float(np.abs(image - pi).sum())
        if residual < tol:
            break
        pi = 0.5 * (pi + image)
        pi /= pi.sum()
    else:
        raise NumericalError("power iteration did not converge", residual=residual)

    linf = None
    if cross_check or (cross_check is None and g.n <= CROSS_CHECK_MAX_N):
        direct = _direct_stationary(p_sub)
        linf = float(np.max(np.abs(direct - pi)))
        if linf > ACCEPT_RESIDUAL:
            raise NumericalError(
                "power iteration and direct solve disagree", residual=linf
            )
    full = np.zeros(g.n)
    full[comp] = pi
    return StationaryResult(
        pi=full,
        support=comp,
        pi_min=float(pi.min()),
        pi_max=float(pi.max()),
        residual=residual,
        iterations=iterations,
        cross_check_linf=linf,
    )


def _direct_stationary(p_sub: sp.csr_matrix) -> np.ndarray:
    """Least-squares solve of pi P = pi, sum(pi) = 1 on a dense copy."""
    k = p_sub.shape[0]
    a = np.vstack([p_sub.toarray().T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return sol


def head_stationary(g: Multigraph, result: StationaryResult) -> np.ndarray:
    """Stationary vector of the walk on heads: pi_e(f) = pi(z) / d_out(z),
    where z is the vertex whose tail is paired with head f.

    Verifies that the head masses of each vertex sum back to pi within 1e-12.
    """
    inv = g.inverse_match
    z = g.tail_vertex[inv]
    pi_e = result.pi[z] / g.d_out[z]
    sums = np.bincount(g.head_vertex, weights=pi_e, minlength=g.n)
    gap = float(np.max(np.abs(sums - result.pi)))
    if gap > 1e-12:
        raise NumericalError("head stationary masses do not aggregate", residual=gap)
    return pi_e


def extremal_values(result: StationaryResult) -> tuple[float, float, int, int]:
    """(pi_min, pi_max, argmin vertex, argmax vertex) over the structural
    support; ties break toward the smallest vertex id."""
    if len(result.support) == 0:
        raise NonUniqueError("empty support")
    sub = result.pi[result.support]
    i_min = int(np.argmin(sub))
    i_max = int(np.argmax(sub))
    return (
        float(sub[i_min]),
        float(sub[i_max]),
        int(result.support[i_min]),
        int(result.support[i_max]),
    )


def empirical_tail(result: StationaryResult, alpha: float) -> float:
    """psi((0, n^-alpha]) = fraction of vertices with 0 < pi <= n^-(1+alpha)."""
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    n = result.n
    threshold = n ** -(1.0 + alpha)
    sub = result.pi[result.support]
    return float((sub <= threshold).sum()) / n


class _HittingSolver:
    """Shared structure for expected-hitting-time solves on one graph."""

    def __init__(self, g: Multigraph):
        self.g = g
        self.n = g.n
        self.p = transition_matrix(g)
        n_comp, labels = sccs(g)
        src_comp = labels[g.tail_vertex]
        dst_comp = labels[g.successors()]
        has_external = np.zeros(n_comp, dtype=bool)
        has_external[src_comp[src_comp != dst_comp]] = True
        self.labels = labels
        self.sink_comps = set(np.nonzero(~has_external)[0].tolist())
        # Predecessor lists for reverse reachability.
        dst = g.successors()
        order = np.argsort(dst, kind="stable")
        self.pred_sorted = g.tail_vertex[order]
        counts = np.bincount(dst, minlength=g.n)
        self.pred_ptr = np.concatenate(([0], np.cumsum(counts)))

    def _predecessors(self, v: int) -> np.ndarray:
        return self.pred_sorted[self.pred_ptr[v] : self.pred_ptr[v + 1]]

    def solve(self, y: int) -> np.ndarray:
        """E[tau_x(y)] for all x; +inf where y is not hit with probability 1."""
        g = self.g
        bad_sinks = self.sink_comps - {int(self.labels[y])}
        # States that can reach a bad sink without stepping on y first have
        # hitting probability < 1, hence infinite expectation.
        blocked = np.zeros(self.n, dtype=bool)
        stack = [
            v for v in range(self.n) if self.labels[v] in bad_sinks and v != y
        ]
        blocked[stack] = True
        while stack:
            v = stack.pop()
            for u in self._predecessors(v):
                if not blocked[u] and u != y:
                    blocked[u] = True
                    stack.append(int(u))
        finite = ~blocked
        finite[y] = True
        h = np.full(self.n, np.inf)
        h[y] = 0.0
        others = np.nonzero(finite & (np.arange(self.n) != y))[0]
        if len(others) == 0:
            return h
        sub = self.p[others][:, others]
        ident = sp.identity(len(others), format="csr")
        rhs = np.ones(len(others))
        sol = spla.spsolve((ident - sub).tocsc(), rhs)
        h[others] = sol
        return h


def hitting_times_exact(g: Multigraph, y: int) -> np.ndarray:
    """Expected steps to hit y from every vertex, by a sparse linear solve.

    States that fail to hit y with probability 1 (they can drain into a
    closed class avoiding y) are reported as +inf.
    """
    if g.n > 5000:
        raise ValidationError("exact hitting times budgeted for n <= 5000")
    if not 0 <= y < g.n:
        raise ValidationError(f"target {y} outside 0..{g.n - 1}")
    return _HittingSolver(g).solve(y)


def return_time_exact(g: Multigraph, x: int, hitting: np.ndarray | None = None) -> float:
    """Expected return time E[tau+_x] = 1 + mean over out-edges of E[tau_dst(x)]."""
    if hitting is None:
        hitting = hitting_times_exact(g, x)
    dst = g.successors()[g.tail_ptr[x] : g.tail_ptr[x + 1]]
    return 1.0 + float(hitting[dst].sum()) / g.d_out[x]


def return_times_exact(g: Multigraph, vertices) -> np.ndarray:
    """Expected return times for many vertices, sharing one solver setup.

    Each target still gets its own linear solve; only the transition matrix,
    SCC structure, and predecessor lists are reused.
    """
    solver = _HittingSolver(g)
    out = np.empty(len(vertices))
    dst_all = g.successors()
    for i, x in enumerate(vertices):
        x = int(x)
        h = solver.solve(x)
        dst = dst_all[g.tail_ptr[x] : g.tail_ptr[x + 1]]
        out[i] = 1.0 + float(h[dst].sum()) / g.d_out[x]
    return out


def hitting_matrix(g: Multigraph) -> tuple[np.ndarray, np.ndarray]:
    """All expected hitting times onto the attractive SCC in one pass.

    Returns (targets, H) with targets the support vertices and H of shape
    (n, len(targets)): H[x, j] = E[tau_x(targets[j])]. Inside the support the
    times come from the fundamental matrix Z = (I - P + 1 pi)^(-1) via
    m(x, y) = (Z[y, y] - Z[x, y]) / pi(y); transient starts add their entry
    time and entry distribution into the support. Much faster than a linear
    solve per target; the per-target solver cross-checks it in the tests.
    """
    res = stationary_distribution(g)
    comp = res.support
    k = len(comp)
    if k > 2500:
        raise ValidationError("hitting_matrix budgeted for supports up to 2500")
    local = -np.ones(g.n, dtype=np.int64)
    local[comp] = np.arange(k)
    p = transition_matrix(g)
    p_sub = p[comp][:, comp].toarray()
    pi = res.pi[comp]
    z = np.linalg.inv(np.eye(k) - p_sub + np.outer(np.ones(k), pi))
    h_inside = (np.diag(z)[None, :] - z) / pi[None, :]
    transient = np.nonzero(local < 0)[0]
    h = np.zeros((g.n, k))
    h[comp] = h_inside
    if len(transient):
        t_block = p[transient][:, transient]
        r_block = p[transient][:, comp]
        ident = sp.identity(len(transient), format="csc")
        lu = spla.splu((ident - t_block).tocsc())
        entry_steps = lu.solve(np.ones(len(transient)))
        entry_dist = lu.solve(r_block.toarray())
        h[transient] = entry_steps[:, None] + entry_dist @ h_inside
    return comp, h


def walk_times_exact(
    g: Multigraph,
    targets: np.ndarray | None = None,
    cover_reps: int = 200,
    step_cap: int | None = None,
    rng_seed: int = 0,
) -> WalkTimes:
    """Exact maximal hitting time over the given targets (default: the whole
    attractive SCC), a Monte Carlo cover-time estimate, and Matthews' bound."""
    comp = attractive_scc(g)
    if comp is None:
        raise NonUniqueError()
    if targets is None:
        targets = comp
    targets = np.sort(np.asarray(targets, dtype=np.int64))
    solver = _HittingSolver(g)
    hitting = np.vstack([solver.solve(int(y)) for y in targets])
    t_hit = float(hitting[np.isfinite(hitting)].max())
    bound = matthews_bound(t_hit, len(comp))
    if step_cap is None:
        step_cap = max(10_000, int(50 * bound))
    cov = cover_time_mc(g, reps=cover_reps, step_cap=step_cap, rng_seed=rng_seed)
    return WalkTimes(
        targets=targets,
        hitting=hitting,
        t_hit=t_hit,
        t_cov=cov,
        matthews_upper=bound,
    )


def _advance(g: Multigraph, pos: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One uniform out-edge step (multiplicity-weighted) for each walker."""
    offsets = rng.integers(0, g.d_out[pos])
    tails = g.tail_ptr[pos] + offsets
    return g.head_vertex[g.match[tails]]


def hitting_time_mc(
    g: Multigraph,
    x: int,
    y: int,
    reps: int,
    step_cap: int,
    rng_seed: int = 0,
) -> HittingEstimate:
    """Monte Carlo estimate of E[tau_x(y)] from `reps` independent walks.

    Censored walks (step cap reached) are excluded from the mean and
    reported; if every walk is censored a CensoredError is raised.
    """
    rng = np.random.default_rng(rng_seed)
    pos = np.full(reps, x, dtype=np.int64)
    times = np.zeros(reps, dtype=np.int64)
    active = pos != y
    step = 0
    while active.any() and step < step_cap:
        step += 1
        pos[active] = _advance(g, pos[active], rng)
        arrived = active & (pos == y)
        times[arrived] = step
        active &= ~arrived
    censored = int(active.sum())
    hits = reps - censored
    if hits == 0:
        raise CensoredError()
    sample = times[~active].astype(float)
    times[active] = step_cap
    se = float(sample.std(ddof=1) / math.sqrt(hits)) if hits > 1 else math.inf
    return HittingEstimate(
        mean=float(sample.mean()),
        se=se,
        reps=reps,
        hits=hits,
        censored=censored,
        step_cap=step_cap,
        samples=times,
    )


def cover_time_mc(
    g: Multigraph,
    reps: int,
    step_cap: int,
    rng_seed: int = 0,
    n_starts: int = 10,
) -> HittingEstimate:
    """Estimated cover time of the attractive SCC: worst mean over a sampled
    start set, all steps counted from the start vertex."""
    comp = attractive_scc(g)
    if comp is None:
        raise NonUniqueError()
    rng = np.random.default_rng(rng_seed)
    starts = rng.choice(g.n, size=min(n_starts, g.n), replace=False)
    local = -np.ones(g.n, dtype=np.int64)
    local[comp] = np.arange(len(comp))
    per_start = max(2, reps // len(starts))
    worst: HittingEstimate | None = None
    for start in starts:
        est = _cover_from(g, int(start), comp, local, per_start, step_cap, rng)
        if worst is None or est.mean > worst.mean:
            worst = est
    assert worst is not None
    return worst


def _cover_from(g, start, comp, local, reps, step_cap, rng) -> HittingEstimate:
    k = len(comp)
    pos = np.full(reps, start, dtype=np.int64)
    visited = np.zeros((reps, k), dtype=bool)
    remaining = np.full(reps, k, dtype=np.int64)
    times = np.zeros(reps, dtype=np.int64)
    idx0 = local[start]
    if idx0 >= 0:
        visited[:, idx0] = True
        remaining -= 1
    active = remaining > 0
    step = 0
    rows = np.arange(reps)
    while active.any() and step < step_cap:
        step += 1
        pos[active] = _advance(g, pos[active], rng)
        loc = local[pos]
        markable = active & (loc >= 0)
        fresh = markable & ~visited[rows, np.maximum(loc, 0)]
        visited[rows[fresh], loc[fresh]] = True
        remaining[fresh] -= 1
        done = active & (remaining == 0)
        times[done] = step
        active &= ~done
    censored = int(active.sum())
    hits = reps - censored
    if hits == 0:
        raise CensoredError()
    sample = times[~active].astype(float)
    times[active] = step_cap
    se = float(sample.std(ddof=1) / math.sqrt(hits)) if hits > 1 else math.inf
    return HittingEstimate(
        mean=float(sample.mean()),
        se=se,
        reps=reps,
        hits=hits,
        censored=censored,
        step_cap=step_cap,
        samples=times,
        start=start,
    )


def matthews_bound(t_hit: float, n_targets: int) -> float:
    """Matthews' cover-time bound H_k * t_hit with H_k the harmonic number."""
    if t_hit < 0 or n_targets < 1:
        raise ValidationError("need t_hit >= 0 and n_targets >= 1")
    harmonic = math.fsum(1.0 / k for k in range(1, n_targets + 1))
    return harmonic * t_hit
