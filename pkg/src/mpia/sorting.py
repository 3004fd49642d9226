"""Non-dominated sorting, the two-round multiparty sort, and crowding distance."""

from __future__ import annotations

import numpy as np

from .core import ContractError, PartyScheme, Population


def dominance_matrix(values, violations=None) -> np.ndarray:
    """Boolean matrix ``D`` with ``D[i, j]`` true when point ``i`` dominates ``j``.

    With ``violations`` the feasibility-first rule applies: a feasible point
    dominates any infeasible one, two infeasible points compare by total
    violation, and two feasible points by Pareto dominance.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ContractError("values must be an (N, M) array")
    n = len(v)
    le = np.ones((n, n), dtype=bool)
    lt = np.zeros((n, n), dtype=bool)
    # column loop: M is small, and this avoids an (N, N, M) temporary
    for j in range(v.shape[1]):
        col = v[:, j]
        le &= col[:, None] <= col[None, :]
        lt |= col[:, None] < col[None, :]
    dom = le & lt
    if violations is None:
        return dom
    cv = np.asarray(violations, dtype=float)
    feas = cv <= 0.0
    if feas.all():
        return dom
    both = feas[:, None] & feas[None, :]
    out = both & dom
    out |= feas[:, None] & ~feas[None, :]
    out |= (~feas[:, None] & ~feas[None, :]) & (cv[:, None] < cv[None, :])
    return out


def fast_nondominated_sort(values, violations=None) -> np.ndarray:
    """1-based non-dominated layer of every point.

    Layer ``r`` holds the points that are non-dominated once layers
    ``1..r-1`` are removed.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if len(v) == 0:
        raise ContractError("cannot sort an empty set")
    dom = dominance_matrix(v, violations)
    count = dom.sum(axis=0)
    layers = np.zeros(len(v), dtype=int)
    remaining = np.ones(len(v), dtype=bool)
    rank = 0
    while remaining.any():
        rank += 1
        front = remaining & (count == 0)
        layers[front] = rank
        remaining &= ~front
        count = count - dom[front].sum(axis=0)
    return layers


def party_ranks(F, scheme: PartyScheme, violations=None) -> np.ndarray:
    """Round one: ``(N, K)`` matrix of per-party layers."""
    F = np.asarray(F, dtype=float)
    if F.shape[1] != scheme.total_objectives:
        raise ContractError(f"expected {scheme.total_objectives} objectives, got {F.shape[1]}")
    L = np.empty((len(F), scheme.n_parties), dtype=int)
    for k in range(scheme.n_parties):
        L[:, k] = fast_nondominated_sort(F[:, scheme.index(k)], violations)
    return L


def multiparty_ranks(F, scheme: PartyScheme, violations=None) -> tuple[np.ndarray, np.ndarray]:
    """Both rounds on raw arrays; returns ``(rank_matrix, mp_rank)``."""
    L = party_ranks(F, scheme, violations)
    return L, fast_nondominated_sort(L)


def mpnds2(population: Population, scheme: PartyScheme) -> tuple[np.ndarray, np.ndarray]:
    """Two-round multiparty sort.  Writes ``party_ranks`` and ``mp_rank`` onto the population."""
    L, mp = multiparty_ranks(population.F, scheme, population.cv)
    population.party_ranks = L
    population.mp_rank = mp
    return L, mp


def crowding_distance(values, layers) -> np.ndarray:
    """Per-layer crowding distance over all columns of ``values``.

    Boundary points of each objective get ``inf``; interior points sum the
    normalized gap between their neighbours.  A zero-range objective adds 0.
    """
    v = np.asarray(values, dtype=float)
    layers = np.asarray(layers)
    cd = np.zeros(len(v))
    for r in np.unique(layers):
        idx = np.flatnonzero(layers == r)
        if len(idx) <= 2:
            cd[idx] = np.inf
            continue
        sub = v[idx]
        acc = np.zeros(len(idx))
        for j in range(sub.shape[1]):
            order = np.argsort(sub[:, j], kind="stable")
            col = sub[order, j]
            span = col[-1] - col[0]
            acc[order[0]] = np.inf
            acc[order[-1]] = np.inf
            if span > 0:
                acc[order[1:-1]] += (col[2:] - col[:-2]) / span
        cd[idx] = acc
    return cd


def sorted_order(mp_rank, crowding) -> np.ndarray:
    """Total order: layer ascending, crowding descending (``inf`` first), index ascending."""
    mp_rank = np.asarray(mp_rank)
    crowding = np.asarray(crowding, dtype=float)
    return np.lexsort((np.arange(len(mp_rank)), -crowding, mp_rank))


def sort_population(population: Population, scheme: PartyScheme) -> Population:
    """Rank, compute crowding, and return the population in the total sort order."""
    mpnds2(population, scheme)
    population.crowding = crowding_distance(population.F, population.mp_rank)
    return population.take(sorted_order(population.mp_rank, population.crowding))


def multiparty_pareto_mask(F, scheme: PartyScheme, violations=None) -> np.ndarray:
    """Members that are first-layer for every party."""
    L = party_ranks(F, scheme, violations)
    return np.all(L == 1, axis=1)


def multiparty_pareto_filter(population: Population, scheme: PartyScheme) -> Population:
    """Subset of the population that is Pareto optimal in every party's objective space."""
    mask = multiparty_pareto_mask(population.F, scheme, population.cv)
    return population.take(np.flatnonzero(mask))
