"""Immune-algorithm operators: cover-metric activation, cloning, variation, selection.

Random draws always come from an explicit ``numpy.random.Generator`` so a
fixed seed replays a run exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ContractError, PartyScheme, Population
from .sorting import sorted_order

OP_MUTATION_ONLY = 0
OP_RAND2BIN = 1
OP_GUIDED_SBX = 2
OP_RAND1BIN = 3


@dataclass(frozen=True)
class OperatorConfig:
    cr1: float = 0.9
    f1: float = 0.7
    cr2: float = 0.5
    f2: float = 0.5
    p2: float = 0.6
    pc: float | None = None  # None means 1/d
    sbx_index: float = 20.0
    pm_index: float = 20.0
    pm_rate: float | None = None  # None means 1/d
    mcm_threshold: float = 0.99
    activate_sizes: tuple[int, ...] = (20, 30, 40, 50, 60, 70)

    def __post_init__(self) -> None:
        object.__setattr__(self, "activate_sizes", tuple(int(s) for s in self.activate_sizes))
        for name in ("cr1", "cr2", "p2", "mcm_threshold"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ContractError(f"{name}={val} outside [0, 1]")
        for name in ("pc", "pm_rate"):
            val = getattr(self, name)
            if val is not None and not 0.0 <= val <= 1.0:
                raise ContractError(f"{name}={val} outside [0, 1]")
        if self.sbx_index <= 0 or self.pm_index <= 0:
            raise ContractError("distribution indices must be positive")
        sizes = self.activate_sizes
        if not sizes or any(s <= 0 for s in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ContractError("activate_sizes must be positive and strictly increasing")

    def crossover_rate(self, d: int) -> float:
        return 1.0 / d if self.pc is None else self.pc

    def mutation_rate(self, d: int) -> float:
        return 1.0 / d if self.pm_rate is None else self.pm_rate


# --------------------------------------------------------------------------
# cover metric and activation


def cover_metric(A, B, k: int, scheme: PartyScheme) -> float:
    """Worst per-objective ratio of the range of ``A`` to the range of ``B`` for party ``k``.

    ``A`` and ``B`` are full objective matrices (rows are individuals).
    Objectives on which ``B`` has zero range count as fully covered.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.size == 0 or B.size == 0:
        raise ContractError("cover metric needs non-empty sets")
    cols = scheme.index(k)
    num = np.ptp(A[:, cols], axis=0)
    den = np.ptp(B[:, cols], axis=0)
    ratio = np.ones(len(cols))
    nz = den > 0
    ratio[nz] = num[nz] / den[nz]
    return float(np.clip(ratio.min(), 0.0, 1.0))


def multiparty_cover_metric(A, fronts: Sequence, scheme: PartyScheme) -> float:
    """Minimum cover metric over all parties; ``fronts[k]`` is party ``k``'s first front."""
    if len(fronts) != scheme.n_parties:
        raise ContractError("need one front per party")
    return min(cover_metric(A, fronts[k], k, scheme) for k in range(scheme.n_parties))


@dataclass
class ActivationSet:
    members: Population
    size: int
    mcm: float | None = None
    tried: list[tuple[int, float]] = field(default_factory=list)


def party_fronts(population: Population, scheme: PartyScheme) -> list[np.ndarray]:
    if population.party_ranks is None:
        raise ContractError("population must be sorted before activation")
    return [population.F[population.party_ranks[:, k] == 1] for k in range(scheme.n_parties)]


def adaptive_activation(population: Population, scheme: PartyScheme, config: OperatorConfig) -> ActivationSet:
    """Smallest listed prefix of the sorted population whose MCM exceeds the threshold.

    Falls back to the largest listed size when no prefix qualifies.  Sizes
    beyond the population length are capped at it.
    """
    n = len(population)
    sizes = config.activate_sizes
    if n < sizes[0]:
        raise ContractError(f"population of {n} is smaller than the smallest activation size {sizes[0]}")
    fronts = party_fronts(population, scheme)
    tried = []
    chosen, mcm = None, 0.0
    for size in sizes:
        size = min(size, n)
        mcm = multiparty_cover_metric(population.F[:size], fronts, scheme)
        tried.append((size, mcm))
        chosen = size
        if mcm > config.mcm_threshold:
            break
    return ActivationSet(population.take(np.arange(chosen)), chosen, mcm, tried)


def fixed_activation(population: Population, size: int) -> ActivationSet:
    size = min(int(size), len(population))
    return ActivationSet(population.take(np.arange(size)), size, None)


# --------------------------------------------------------------------------
# cloning


def convergence_metric(layers) -> np.ndarray:
    layers = np.asarray(layers, dtype=int)
    return layers.max() - layers


def clone_weights(crowding, convergence) -> np.ndarray:
    """``CD + p`` with infinite crowding replaced by twice the largest finite value (1.0 if none)."""
    cd = np.asarray(crowding, dtype=float).copy()
    inf = ~np.isfinite(cd)
    if inf.any():
        finite = cd[~inf]
        cap = 2.0 * finite.max() if finite.size and finite.max() > 0 else 1.0
        cd[inf] = cap
    return cd + np.asarray(convergence, dtype=float)


def clone_counts(crowding, convergence, n_clones: int) -> np.ndarray:
    """Replicates per activated individual: ``ceil(nC * w_i / sum(w))``.

    When every weight is zero the allocation is uniform, ``ceil(nC / nA)``.
    """
    if n_clones <= 0:
        raise ContractError("n_clones must be positive")
    w = clone_weights(crowding, convergence)
    total = w.sum()
    if total <= 0:
        return np.full(len(w), math.ceil(n_clones / len(w)), dtype=int)
    share = n_clones * w / total
    # guard against 5.000000001 -> 6, but never starve a positive weight
    counts = np.ceil(share - 1e-9).astype(int)
    return np.where(w > 0, np.maximum(counts, 1), counts)


@dataclass
class CloneSet:
    X: np.ndarray
    sources: np.ndarray

    def __len__(self) -> int:
        return len(self.sources)


def clone(activation: ActivationSet, n_clones: int) -> CloneSet:
    """Copies of activated members in activation order, each tagged with its source index."""
    members = activation.members
    p = convergence_metric(members.mp_rank)
    counts = clone_counts(members.crowding, p, n_clones)
    sources = np.repeat(np.arange(len(counts)), counts)
    return CloneSet(members.X[sources].copy(), sources)


# --------------------------------------------------------------------------
# variation


def p1_schedule(t: float, T: float) -> float:
    """Probability of the large-step operator at generation ``t`` of ``T``."""
    if T <= 0:
        raise ContractError("T must be positive")
    if not 0 <= t <= T:
        raise ContractError(f"t={t} outside [0, {T}]")
    return 0.95 / (1.0 + math.exp(20.0 * t / T - 3.0))


def _clip(X: np.ndarray, lower, upper) -> np.ndarray:
    if lower is None and upper is None:
        return X
    return np.clip(X, lower, upper)


def _binomial_mask(n: int, d: int, cr: float, rng: np.random.Generator) -> np.ndarray:
    randj = rng.integers(0, d, size=n)
    mask = rng.random((n, d)) < cr
    mask[np.arange(n), randj] = True
    return mask


def _distinct_indices(n: int, pool: int, k: int, rng: np.random.Generator) -> np.ndarray:
    return np.argsort(rng.random((n, pool)), axis=1)[:, :k]


def op1_rand2bin(clone, activation, rng, *, cr=0.9, f=0.7, lower=None, upper=None) -> np.ndarray:
    """rand/2/bin trial: ``C + F (A_r1 - A_r2) + F (A_r3 - A_r4)`` on crossed coordinates.

    ``clone`` may be one vector or a stack of vectors.  Draw order per call:
    donor indices (one uniform row per clone, argsorted), then ``randj``,
    then the crossover uniforms.
    """
    C = np.atleast_2d(np.asarray(clone, dtype=float))
    A = np.asarray(activation, dtype=float)
    if len(A) < 4:
        raise ContractError("rand/2/bin needs at least four activated individuals")
    n, d = C.shape
    r = _distinct_indices(n, len(A), 4, rng)
    mask = _binomial_mask(n, d, cr, rng)
    mutant = C + f * (A[r[:, 0]] - A[r[:, 1]]) + f * (A[r[:, 2]] - A[r[:, 3]])
    out = _clip(np.where(mask, mutant, C), lower, upper)
    return out[0] if np.ndim(clone) == 1 else out


def op3_rand1bin(clone, activation, rng, *, cr=0.5, f=0.5, lower=None, upper=None) -> np.ndarray:
    """rand/1/bin trial: ``C + F (A_r1 - A_r2)`` on crossed coordinates.  Same draw order as op1."""
    C = np.atleast_2d(np.asarray(clone, dtype=float))
    A = np.asarray(activation, dtype=float)
    if len(A) < 2:
        raise ContractError("rand/1/bin needs at least two activated individuals")
    n, d = C.shape
    r = _distinct_indices(n, len(A), 2, rng)
    mask = _binomial_mask(n, d, cr, rng)
    mutant = C + f * (A[r[:, 0]] - A[r[:, 1]])
    out = _clip(np.where(mask, mutant, C), lower, upper)
    return out[0] if np.ndim(clone) == 1 else out


def sbx_spread(u, eta: float) -> np.ndarray:
    """Standard SBX spread factor for uniforms ``u`` in [0, 1)."""
    u = np.asarray(u, dtype=float)
    e = 1.0 / (eta + 1.0)
    low = np.power(2.0 * u, e)
    with np.errstate(divide="ignore"):
        high = np.power(1.0 / (2.0 * (1.0 - u)), e)
    return np.where(u <= 0.5, low, high)


def op2_guided_sbx(clone, guide, rng, *, pc, eta=20.0, lower=None, upper=None, delta=None) -> np.ndarray:
    """Guided SBX child ``0.5 [(1 + delta) C + (1 - delta) G]`` on coordinates picked with rate ``pc``.

    ``delta`` defaults to a fresh spread-factor draw per coordinate; passing it
    explicitly is meant for testing.  Draw order: crossover uniforms, then
    spread uniforms.
    """
    C = np.atleast_2d(np.asarray(clone, dtype=float))
    G = np.atleast_2d(np.asarray(guide, dtype=float))
    n, d = C.shape
    mask = rng.random((n, d)) < pc
    if delta is None:
        delta = sbx_spread(rng.random((n, d)), eta)
    child = 0.5 * ((1.0 + delta) * C + (1.0 - delta) * G)
    out = _clip(np.where(mask, child, C), lower, upper)
    return out[0] if np.ndim(clone) == 1 else out


def polynomial_mutation(x, lower, upper, rng, *, eta=20.0, rate=None) -> np.ndarray:
    """Bounded polynomial mutation; each coordinate mutates with probability ``rate`` (default 1/d)."""
    X = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    n, d = X.shape
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (d,))
    rate = 1.0 / d if rate is None else rate
    mask = rng.random((n, d)) < rate
    r = rng.random((n, d))
    span = hi - lo
    mask &= span > 0
    if mask.any():
        safe = np.where(span > 0, span, 1.0)
        d1 = (X - lo) / safe
        d2 = (hi - X) / safe
        p = 1.0 / (eta + 1.0)
        left = np.power(np.maximum(2.0 * r + (1.0 - 2.0 * r) * np.power(1.0 - d1, eta + 1.0), 0.0), p) - 1.0
        right = 1.0 - np.power(
            np.maximum(2.0 * (1.0 - r) + 2.0 * (r - 0.5) * np.power(1.0 - d2, eta + 1.0), 0.0), p
        )
        dq = np.where(r < 0.5, left, right)
        X = np.where(mask, X + dq * span, X)
        X = np.clip(X, lo, hi)
    return X[0] if np.ndim(x) == 1 else X


def guide_candidates(source: int, population: Population) -> np.ndarray:
    """Indices meeting Con1 and Con2 for a clone of ``population[source]``."""
    mp = population.mp_rank
    L = population.party_ranks
    if mp is None or L is None:
        raise ContractError("population must be sorted")
    if mp[source] == 1:
        return np.empty(0, dtype=int)
    ok = (mp < mp[source]) & np.any(L <= L[source], axis=1)
    return np.flatnonzero(ok)


def find_guide(source: int, population: Population, rng: np.random.Generator) -> int | None:
    """A uniformly chosen guiding individual for a clone of ``population[source]``, or None."""
    cand = guide_candidates(source, population)
    if len(cand) == 0:
        return None
    return int(cand[rng.integers(len(cand))])


@dataclass
class Offspring:
    X: np.ndarray
    operators: np.ndarray
    sources: np.ndarray
    guides: np.ndarray


def adaptive_operator(
    population: Population,
    activation: ActivationSet,
    clones: CloneSet,
    t: float,
    T: float,
    config: OperatorConfig,
    rng: np.random.Generator,
    lower,
    upper,
    guided: bool = True,
) -> Offspring:
    """One offspring per clone.

    Each clone takes rand/2/bin with probability P1(t); otherwise guided SBX
    when a guide exists and the source has not had a successful guided
    crossover this generation (each attempt succeeds with probability P2);
    otherwise rand/1/bin.  Polynomial mutation finishes every offspring.
    ``guided=False`` replaces the guided branch by rand/1/bin.
    """
    n = len(clones)
    d = clones.X.shape[1] if n else population.X.shape[1]
    A = activation.members.X
    nA = len(A)
    ops = np.full(n, OP_RAND1BIN if nA >= 3 else OP_MUTATION_ONLY, dtype=int)
    guides = np.full(n, -1, dtype=int)
    if n == 0:
        return Offspring(np.empty((0, d)), ops, clones.sources.copy(), guides)

    p1 = p1_schedule(min(t, T), T)
    first = rng.random(n) < p1
    if nA >= 5:
        ops[first] = OP_RAND2BIN

    if guided:
        done: set[int] = set()
        cache: dict[int, np.ndarray] = {}
        for i in np.flatnonzero(ops != OP_RAND2BIN):
            src = int(clones.sources[i])
            if src in done:
                continue
            if src not in cache:
                cache[src] = guide_candidates(src, population)
            cand = cache[src]
            if len(cand) == 0:
                continue
            if rng.random() < config.p2:
                guides[i] = int(cand[rng.integers(len(cand))])
                ops[i] = OP_GUIDED_SBX
                done.add(src)

    out = clones.X.copy()
    sel = ops == OP_RAND2BIN
    if sel.any():
        out[sel] = op1_rand2bin(clones.X[sel], A, rng, cr=config.cr1, f=config.f1, lower=lower, upper=upper)
    sel = ops == OP_GUIDED_SBX
    if sel.any():
        out[sel] = op2_guided_sbx(
            clones.X[sel],
            population.X[guides[sel]],
            rng,
            pc=config.crossover_rate(d),
            eta=config.sbx_index,
            lower=lower,
            upper=upper,
        )
    sel = ops == OP_RAND1BIN
    if sel.any():
        out[sel] = op3_rand1bin(clones.X[sel], A, rng, cr=config.cr2, f=config.f2, lower=lower, upper=upper)
    out = polynomial_mutation(out, lower, upper, rng, eta=config.pm_index, rate=config.mutation_rate(d))
    return Offspring(out, ops, clones.sources.copy(), guides)


# --------------------------------------------------------------------------
# environmental selection


def selection(merged: Population, n_keep: int) -> Population:
    """Keep whole layers while they fit, then drop the least crowded of the last layer.

    ``merged`` must carry ``mp_rank`` and ``crowding``.
    """
    if merged.mp_rank is None or merged.crowding is None:
        raise ContractError("merged population must be ranked with crowding")
    if len(merged) <= n_keep:
        return merged.take(sorted_order(merged.mp_rank, merged.crowding))
    keep: list[int] = []
    for r in np.unique(merged.mp_rank):
        layer = np.flatnonzero(merged.mp_rank == r)
        keep.extend(layer.tolist())
        if len(keep) >= n_keep:
            break
    last = layer
    # least crowded first; among ties the later index goes first
    removal = np.lexsort((-last, merged.crowding[last]))
    drop = set(last[removal[: len(keep) - n_keep]].tolist())
    kept = np.array([i for i in keep if i not in drop], dtype=int)
    return merged.take(kept[sorted_order(merged.mp_rank[kept], merged.crowding[kept])])
