"""Domain types and dominance relations shared by every other module.

All objectives are minimized.  A :class:`PartyScheme` maps each decision
maker (party) to the subset of objective indices it cares about; subsets
may overlap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ContractError(ValueError):
    """Raised when a caller violates an operation's preconditions."""


class Dominance(enum.Enum):
    FIRST_DOMINATES = 1
    SECOND_DOMINATES = 2
    INCOMPARABLE = 0

    def flip(self) -> "Dominance":
        if self is Dominance.FIRST_DOMINATES:
            return Dominance.SECOND_DOMINATES
        if self is Dominance.SECOND_DOMINATES:
            return Dominance.FIRST_DOMINATES
        return self


@dataclass(frozen=True)
class PartyScheme:
    """Assignment of objective indices to decision makers.

    ``parties[k]`` lists the objective indices of party ``k`` in the order
    used by :func:`party_view`.
    """

    parties: tuple[tuple[int, ...], ...]
    total_objectives: int

    def __init__(self, parties: Sequence[Sequence[int]], total_objectives: int | None = None):
        parts = tuple(tuple(int(i) for i in p) for p in parties)
        if total_objectives is None:
            total_objectives = 1 + max((max(p) for p in parts if p), default=-1)
        object.__setattr__(self, "parties", parts)
        object.__setattr__(self, "total_objectives", int(total_objectives))
        self._validate()

    def _validate(self) -> None:
        m = self.total_objectives
        if not self.parties:
            raise ContractError("a party scheme needs at least one party")
        covered: set[int] = set()
        for k, p in enumerate(self.parties):
            if not p:
                raise ContractError(f"party {k} has no objectives")
            if len(set(p)) != len(p):
                raise ContractError(f"party {k} lists an objective twice")
            for i in p:
                if not 0 <= i < m:
                    raise ContractError(f"objective index {i} out of range for M={m}")
            covered.update(p)
        if covered != set(range(m)):
            missing = sorted(set(range(m)) - covered)
            raise ContractError(f"objectives {missing} belong to no party")

    @property
    def n_parties(self) -> int:
        return len(self.parties)

    def is_multiparty(self) -> bool:
        """True when the scheme satisfies the MPMOP shape (K >= 2, some m_k >= 2)."""
        return self.n_parties >= 2 and any(len(p) >= 2 for p in self.parties)

    def index(self, k: int) -> np.ndarray:
        if not 0 <= k < self.n_parties:
            raise ContractError(f"party {k} out of range for K={self.n_parties}")
        return np.asarray(self.parties[k], dtype=int)

    @classmethod
    def single(cls, n_objectives: int) -> "PartyScheme":
        return cls([tuple(range(n_objectives))], n_objectives)

    def to_dict(self) -> dict:
        return {"parties": [list(p) for p in self.parties], "total_objectives": self.total_objectives}


@dataclass
class Individual:
    """One candidate solution.

    ``party_ranks`` and ``mp_rank`` are 1-based layers filled in by sorting;
    ``violation`` is the total constraint violation (0 means feasible).
    """

    x: np.ndarray
    objectives: np.ndarray | None = None
    party_ranks: np.ndarray | None = None
    mp_rank: int | None = None
    crowding: float = 0.0
    violation: float = 0.0

    @property
    def evaluated(self) -> bool:
        return self.objectives is not None


@dataclass
class Population:
    """Array-backed population; row ``i`` of every array describes member ``i``."""

    X: np.ndarray
    F: np.ndarray
    cv: np.ndarray = None  # type: ignore[assignment]
    party_ranks: np.ndarray | None = None
    mp_rank: np.ndarray | None = None
    crowding: np.ndarray | None = None
    generation: int = 0
    fe_count: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        if self.cv is None:
            self.cv = np.zeros(len(self.X))
        self.cv = np.asarray(self.cv, dtype=float)
        if len(self.F) != len(self.X) or len(self.cv) != len(self.X):
            raise ContractError("X, F and cv must have the same number of rows")
        if np.isnan(self.F).any():
            raise ContractError("objective values contain NaN")

    def __len__(self) -> int:
        return len(self.X)

    @property
    def members(self) -> list[Individual]:
        out = []
        for i in range(len(self)):
            out.append(
                Individual(
                    x=self.X[i].copy(),
                    objectives=self.F[i].copy(),
                    party_ranks=None if self.party_ranks is None else self.party_ranks[i].copy(),
                    mp_rank=None if self.mp_rank is None else int(self.mp_rank[i]),
                    crowding=0.0 if self.crowding is None else float(self.crowding[i]),
                    violation=float(self.cv[i]),
                )
            )
        return out

    def take(self, idx) -> "Population":
        idx = np.asarray(idx, dtype=int)
        return Population(
            X=self.X[idx],
            F=self.F[idx],
            cv=self.cv[idx],
            party_ranks=None if self.party_ranks is None else self.party_ranks[idx],
            mp_rank=None if self.mp_rank is None else self.mp_rank[idx],
            crowding=None if self.crowding is None else self.crowding[idx],
            generation=self.generation,
            fe_count=self.fe_count,
        )

    @classmethod
    def concat(cls, a: "Population", b: "Population") -> "Population":
        return cls(
            X=np.vstack([a.X, b.X]),
            F=np.vstack([a.F, b.F]),
            cv=np.concatenate([a.cv, b.cv]),
            generation=a.generation,
            fe_count=max(a.fe_count, b.fe_count),
        )

    @classmethod
    def from_individuals(cls, members: Sequence[Individual]) -> "Population":
        for ind in members:
            if not ind.evaluated:
                raise ContractError("all individuals must be evaluated")
        return cls(
            X=np.array([m.x for m in members], dtype=float),
            F=np.array([m.objectives for m in members], dtype=float),
            cv=np.array([m.violation for m in members], dtype=float),
        )


def _as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise ContractError("objective vectors must be one-dimensional")
    return a


def dominates(a, b) -> Dominance:
    """Pareto relation between two objective vectors (minimization)."""
    a = _as_vector(a)
    b = _as_vector(b)
    if a.shape != b.shape:
        raise ContractError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ContractError("objective vectors contain NaN")
    a_le = bool(np.all(a <= b))
    b_le = bool(np.all(b <= a))
    if a_le and not b_le:
        return Dominance.FIRST_DOMINATES
    if b_le and not a_le:
        return Dominance.SECOND_DOMINATES
    return Dominance.INCOMPARABLE


def party_view(objectives, k: int, scheme: PartyScheme) -> np.ndarray:
    """Slice of ``objectives`` seen by party ``k``, in the scheme's stored order.

    Works on a single vector or on an ``(N, M)`` matrix (slices columns).
    """
    obj = np.asarray(objectives, dtype=float)
    return obj[..., scheme.index(k)]


def dominates_in_party(a: Individual, b: Individual, k: int, scheme: PartyScheme) -> Dominance:
    if not (a.evaluated and b.evaluated):
        raise ContractError("both individuals must be evaluated")
    return dominates(party_view(a.objectives, k, scheme), party_view(b.objectives, k, scheme))


def constrained_dominates(a, b, cv_a: float, cv_b: float) -> Dominance:
    """Feasibility-first relation: feasible beats infeasible, then lower violation, then Pareto."""
    fa, fb = cv_a <= 0.0, cv_b <= 0.0
    if fa and fb:
        return dominates(a, b)
    if fa:
        return Dominance.FIRST_DOMINATES
    if fb:
        return Dominance.SECOND_DOMINATES
    if cv_a < cv_b:
        return Dominance.FIRST_DOMINATES
    if cv_b < cv_a:
        return Dominance.SECOND_DOMINATES
    return Dominance.INCOMPARABLE
