"""Party-grouped multiobjective problems with an analytic common Pareto set."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..core import ContractError, PartyScheme

SHAPES = ("sphere", "linear", "convex")


class GroupedMop:
    """Box-constrained MOP whose objectives are grouped into parties.

    ``objectives`` maps an ``(N, d)`` decision matrix to an ``(N, M)``
    objective matrix.  ``ps_sampler(n)`` optionally returns ``n`` decision
    vectors on the common Pareto set, which makes MPIGD computable.
    """

    constrained = False

    def __init__(
        self,
        objectives: Callable[[np.ndarray], np.ndarray],
        lower,
        upper,
        scheme: PartyScheme,
        ps_sampler: Callable[[int], np.ndarray] | None = None,
        name: str = "grouped-mop",
        objective_names: Sequence[str] | None = None,
    ):
        self._objectives = objectives
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ContractError("invalid bounds")
        self.scheme = scheme
        self.ps_sampler = ps_sampler
        self.name = name
        self.objective_names = list(objective_names or [f"f{i + 1}" for i in range(scheme.total_objectives)])

    @property
    def n_var(self) -> int:
        return len(self.lower)

    @property
    def n_obj(self) -> int:
        return self.scheme.total_objectives

    def evaluate(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.asarray(self._objectives(X), dtype=float)
        if F.shape != (len(X), self.n_obj):
            raise ContractError(f"objective function returned shape {F.shape}")
        return F, np.zeros(len(X))

    def sample_initial(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.lower + rng.random((n, self.n_var)) * (self.upper - self.lower)

    def reference_front(self, n: int = 500) -> np.ndarray:
        if self.ps_sampler is None:
            raise ContractError(f"{self.name} has no analytic Pareto set")
        F, _ = self.evaluate(self.ps_sampler(n))
        return F


def grouped_mop(objectives, scheme: PartyScheme, lower, upper, ps_sampler=None, **kw) -> GroupedMop:
    """Wrap objective functions into a grouped problem.

    ``objectives`` is either one vectorized callable returning ``(N, M)`` or
    a sequence of per-objective callables, each mapping ``(N, d)`` to ``(N,)``.
    """
    if callable(objectives):
        fn = objectives
    else:
        fns = list(objectives)

        def fn(X):
            return np.column_stack([f(X) for f in fns])

    return GroupedMop(fn, lower, upper, scheme, ps_sampler, **kw)


def _positions(P: np.ndarray, m: int, shape: str) -> np.ndarray:
    """Map position variables in [0, 1] to ``m`` mutually non-dominated coordinates."""
    n = len(P)
    if m == 1:
        return np.zeros((n, 1))
    P = P[:, : m - 1]
    out = np.empty((n, m))
    if shape == "sphere":
        th = P * (np.pi / 2)
        for j in range(m):
            v = np.prod(np.cos(th[:, : m - 1 - j]), axis=1)
            if j > 0:
                v = v * np.sin(th[:, m - 1 - j])
            out[:, j] = v
        return out
    if shape in ("linear", "convex"):
        for j in range(m):
            v = np.prod(P[:, : m - 1 - j], axis=1)
            if j > 0:
                v = v * (1.0 - P[:, m - 1 - j])
            out[:, j] = v
        return out**2 if shape == "convex" else out
    raise ContractError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def shared_sphere(
    d: int = 20,
    party_sizes: Sequence[int] = (2, 2),
    shapes: Sequence[str] | None = None,
) -> GroupedMop:
    """Parties share position variables and one distance term.

    Objective ``j`` of party ``k`` is ``position_kj(x_1..x_{m-1}) + g`` with
    ``g = sum((x_i - 0.5)^2)`` over the remaining variables, ``m`` being the
    largest party size.  Every point with the tail at 0.5 is Pareto optimal
    for every party, so the common Pareto set is known exactly.
    """
    sizes = [int(s) for s in party_sizes]
    if len(sizes) < 1 or min(sizes) < 1:
        raise ContractError("party sizes must be positive")
    if shapes is None:
        shapes = [("sphere", "linear", "convex")[k % 3] for k in range(len(sizes))]
    shapes = list(shapes)
    if len(shapes) != len(sizes):
        raise ContractError("need one shape per party")
    for s in shapes:
        if s not in SHAPES:
            raise ContractError(f"unknown shape {s!r}; expected one of {SHAPES}")
    n_pos = max(sizes) - 1
    if d <= n_pos:
        raise ContractError(f"d={d} too small for {n_pos} position variables")

    def objectives(X):
        g = np.sum((X[:, n_pos:] - 0.5) ** 2, axis=1, keepdims=True)
        cols = [_positions(X[:, :n_pos], m, s) + g for m, s in zip(sizes, shapes)]
        return np.hstack(cols)

    def ps_sampler(n: int) -> np.ndarray:
        X = np.full((n, d), 0.5)
        if n_pos == 1:
            X[:, 0] = np.linspace(0.0, 1.0, n)
        elif n_pos > 1:
            X[:, :n_pos] = np.random.default_rng(0).random((n, n_pos))
        return X

    parties, start = [], 0
    for m in sizes:
        parties.append(tuple(range(start, start + m)))
        start += m
    scheme = PartyScheme(parties, start)
    names = [f"f{k + 1}{j + 1}" for k, m in enumerate(sizes) for j in range(m)]
    label = "-".join(shapes)
    return GroupedMop(
        objectives,
        np.zeros(d),
        np.ones(d),
        scheme,
        ps_sampler,
        name=f"shared-sphere(d={d},{label})",
        objective_names=names,
    )
