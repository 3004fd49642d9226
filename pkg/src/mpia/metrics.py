"""MPIGD, hypervolume, sumHV, normalization and the rank-sum significance test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import ContractError, PartyScheme
from .sorting import fast_nondominated_sort

MC_SAMPLES = 100_000
MC_SEED = 12345


def mpigd(reference, obtained, scheme: PartyScheme) -> float:
    """Mean over reference points of the smallest summed per-party distance to ``obtained``."""
    R = np.atleast_2d(np.asarray(reference, dtype=float))
    P = np.atleast_2d(np.asarray(obtained, dtype=float))
    if P.size == 0 or len(P) == 0:
        raise ContractError("obtained set is empty")
    if R.size == 0:
        raise ContractError("reference front is empty")
    total = np.zeros((len(R), len(P)))
    for k in range(scheme.n_parties):
        cols = scheme.index(k)
        diff = R[:, None, cols] - P[None, :, cols]
        total += np.sqrt((diff * diff).sum(axis=-1))
    return float(total.min(axis=1).mean())


def _filter(points, ref) -> np.ndarray:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    ref = np.asarray(ref, dtype=float)
    if P.size == 0:
        return np.empty((0, len(ref)))
    if P.shape[1] != len(ref):
        raise ContractError(f"points have {P.shape[1]} objectives, reference has {len(ref)}")
    return P[np.all(P < ref, axis=1)]


def _hv2d(P, ref) -> float:
    P = P[np.lexsort((P[:, 1], P[:, 0]))]
    hv, best_y = 0.0, ref[1]
    for x, y in P:
        if y < best_y:
            hv += (ref[0] - x) * (best_y - y)
            best_y = y
    return hv


def _hv3d(P, ref) -> float:
    # slice along the third objective; each slab is a 2-D problem
    P = P[np.argsort(P[:, 2], kind="stable")]
    z = np.append(P[:, 2], ref[2])
    hv = 0.0
    for i in range(len(P)):
        h = z[i + 1] - z[i]
        if h > 0:
            hv += _hv2d(P[: i + 1, :2], ref[:2]) * h
    return hv


@dataclass
class HvEstimate:
    value: float
    stderr: float


def hypervolume_mc(points, ref, n_samples: int = MC_SAMPLES, seed: int = MC_SEED, lower=None) -> HvEstimate:
    """Monte-Carlo hypervolume over the box ``[lower, ref]`` (``lower`` defaults to the point-wise minimum)."""
    ref = np.asarray(ref, dtype=float)
    P = _filter(points, ref)
    if len(P) == 0:
        return HvEstimate(0.0, 0.0)
    lo = P.min(axis=0) if lower is None else np.asarray(lower, dtype=float)
    vol = float(np.prod(ref - lo))
    rng = np.random.default_rng(seed)
    S = lo + rng.random((n_samples, len(ref))) * (ref - lo)
    hit = np.zeros(n_samples, dtype=bool)
    for p in P:
        hit |= np.all(S >= p, axis=1)
    frac = hit.mean()
    return HvEstimate(vol * frac, vol * np.sqrt(frac * (1 - frac) / n_samples))


def hypervolume(points, ref) -> float:
    """Hypervolume dominated by ``points`` and bounded by ``ref`` (minimization).

    Exact for two and three objectives; four or more use a fixed-seed
    Monte-Carlo estimate (see :func:`hypervolume_mc` for its standard error).
    Points not strictly better than ``ref`` in every objective contribute nothing.
    """
    ref = np.asarray(ref, dtype=float)
    P = _filter(points, ref)
    if len(P) == 0:
        return 0.0
    m = len(ref)
    if m == 1:
        return float(ref[0] - P[:, 0].min())
    P = P[fast_nondominated_sort(P) == 1]
    if m == 2:
        return float(_hv2d(P, ref))
    if m == 3:
        return float(_hv3d(P, ref))
    return hypervolume_mc(P, ref).value


@dataclass
class Normalization:
    lower: np.ndarray
    upper: np.ndarray

    def apply(self, F) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        span = self.upper - self.lower
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (F - self.lower) / safe, 0.0)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def normalize_objectives(sets) -> tuple[list[np.ndarray], Normalization]:
    """Normalize several solution sets by the componentwise extremes of their union.

    Objectives with zero range map to 0.
    """
    arrs = [np.atleast_2d(np.asarray(s, dtype=float)) for s in sets]
    nonempty = [a for a in arrs if a.size]
    if not nonempty:
        raise ContractError("merged solution set is empty")
    merged = np.vstack(nonempty)
    norm = Normalization(merged.min(axis=0), merged.max(axis=0))
    return [norm.apply(a) if a.size else a.reshape(0, merged.shape[1]) for a in arrs], norm


def party_hv(F, scheme: PartyScheme, k: int, ref=None) -> float:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    cols = scheme.index(k)
    ref = np.ones(len(cols)) if ref is None else np.asarray(ref, dtype=float)
    if F.size == 0:
        return 0.0
    return hypervolume(F[:, cols], ref)


def sum_hv(F, scheme: PartyScheme, refs=None, normalization: Normalization | None = None) -> float:
    """Sum over parties of the hypervolume of each party's slice.

    ``normalization`` (typically from :func:`normalize_objectives` over every
    compared set) is applied first; the default per-party reference is then
    all ones.  Without it the set is normalized by its own extremes.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.size == 0:
        return 0.0
    if normalization is None:
        (F,), _ = normalize_objectives([F])
    else:
        F = normalization.apply(F)
    total = 0.0
    for k in range(scheme.n_parties):
        total += party_hv(F, scheme, k, None if refs is None else refs[k])
    return total


@dataclass
class RankSumResult:
    label: str  # "better", "worse" or "similar" for sample_a relative to sample_b
    p_value: float

    @property
    def symbol(self) -> str:
        return {"better": "+", "worse": "-", "similar": "≈"}[self.label]


def rank_sum_test(sample_a, sample_b, alpha: float = 0.05, higher_is_better: bool = True) -> RankSumResult:
    """Two-sided Mann-Whitney rank-sum test labelling ``sample_a`` against ``sample_b``.

    Small tie-free samples get the exact null distribution; otherwise the
    normal approximation with tie correction is used.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 5 or len(b) < 5:
        raise ContractError("rank-sum test needs at least five values per sample")
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return RankSumResult("similar", 1.0)
    res = stats.mannwhitneyu(a, b, alternative="two-sided", method="auto")
    p = float(res.pvalue)
    if p >= alpha:
        return RankSumResult("similar", p)
    a_higher = float(res.statistic) > len(a) * len(b) / 2.0
    return RankSumResult("better" if a_higher == higher_is_better else "worse", p)
