"""The MPIA main loop and its ablation variants."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import immune
from .core import ContractError, Population
from .immune import OperatorConfig
from .sorting import crowding_distance, mpnds2, multiparty_pareto_filter, sort_population

UAV_BUDGET = 140_000

# variant -> (adaptive activation, inter-party guided crossover)
VARIANTS: dict[str, tuple[bool, bool]] = {
    "MPIA": (True, True),
    "MPIA-BASE": (False, False),
    "MPIA-A": (True, False),
    "MPIA-B": (False, True),
}


@dataclass(frozen=True)
class RunConfig:
    population_size: int = 105
    fe_budget: int | None = None  # None: 1.4e5 for constrained (UAV) problems, 1000*d*M otherwise
    seed: int = 0
    variant: str = "MPIA"
    operators: OperatorConfig = field(default_factory=OperatorConfig)
    fixed_activation_size: int = 20

    def budget_for(self, problem) -> int:
        if self.fe_budget is not None:
            return int(self.fe_budget)
        if getattr(problem, "constrained", False):
            return UAV_BUDGET
        return 1000 * problem.n_var * problem.n_obj

    def validate(self, problem) -> None:
        if self.variant not in VARIANTS:
            raise ContractError(f"unknown variant {self.variant!r}; expected one of {sorted(VARIANTS)}")
        n = self.population_size
        if n < 1:
            raise ContractError("population_size must be positive")
        budget = self.budget_for(problem)
        if budget < n:
            raise ContractError(f"fe_budget={budget} is smaller than population_size={n}")
        adaptive, _ = VARIANTS[self.variant]
        if adaptive and n < max(self.operators.activate_sizes):
            raise ContractError(
                f"population_size={n} is below the largest activation size "
                f"{max(self.operators.activate_sizes)} needed by {self.variant}"
            )
        if not adaptive and self.fixed_activation_size < 1:
            raise ContractError("fixed_activation_size must be positive")
        scheme = problem.scheme
        if scheme.total_objectives != problem.n_obj:
            raise ContractError("party scheme does not match the problem's objective count")
        if len(problem.lower) != problem.n_var or len(problem.upper) != problem.n_var:
            raise ContractError("bounds do not match the problem dimension")


@dataclass
class GenerationStats:
    generation: int
    fe_count: int
    mcm: float | None
    n_activated: int
    n_offspring: int
    front_sizes: list[int]
    operator_counts: dict[str, int]


@dataclass
class RunResult:
    population: Population
    mps: Population
    trace: list[GenerationStats]
    wall_time: float
    fe_count: int
    config: RunConfig
    problem_name: str = ""

    @property
    def generations(self) -> int:
        return len(self.trace)


Callback = Callable[[int, Population, int], None]

_OP_NAMES = {
    immune.OP_MUTATION_ONLY: "mutation",
    immune.OP_RAND2BIN: "rand2bin",
    immune.OP_GUIDED_SBX: "guided_sbx",
    immune.OP_RAND1BIN: "rand1bin",
}


def _evaluate(problem, X) -> tuple[np.ndarray, np.ndarray]:
    F, cv = problem.evaluate(X)
    if not problem.constrained:
        cv = np.zeros(len(X))
    return np.asarray(F, dtype=float), np.asarray(cv, dtype=float)


def _rank(pop: Population, scheme) -> Population:
    mpnds2(pop, scheme)
    pop.crowding = crowding_distance(pop.F, pop.mp_rank)
    return pop


def run_mpia(problem, config: RunConfig = RunConfig(), callback: Callback | None = None) -> RunResult:
    """Run one seeded optimization.

    ``callback(generation, population, fe_count)`` is called after
    initialization (generation 0) and after every selection step.
    """
    config.validate(problem)
    adaptive, guided = VARIANTS[config.variant]
    scheme = problem.scheme
    n = config.population_size
    budget = config.budget_for(problem)
    T = budget // n
    ops = config.operators
    rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()

    X = np.clip(problem.sample_initial(n, rng), problem.lower, problem.upper)
    F, cv = _evaluate(problem, X)
    fe = n
    pop = sort_population(Population(X, F, cv, fe_count=fe), scheme)
    trace: list[GenerationStats] = []
    if callback is not None:
        callback(0, pop, fe)

    gen = 0
    while fe < budget:
        gen += 1
        if adaptive:
            act = immune.adaptive_activation(pop, scheme, ops)
        else:
            act = immune.fixed_activation(pop, config.fixed_activation_size)
        clones = immune.clone(act, n)
        remaining = budget - fe
        if len(clones) > remaining:
            clones = immune.CloneSet(clones.X[:remaining], clones.sources[:remaining])
        off = immune.adaptive_operator(
            pop, act, clones, gen, T, ops, rng, problem.lower, problem.upper, guided=guided
        )
        Fo, cvo = _evaluate(problem, off.X)
        fe += len(off.X)
        merged = Population.concat(pop, Population(off.X, Fo, cvo))
        survivors = immune.selection(_rank(merged, scheme), n)
        pop = sort_population(survivors, scheme)
        pop.generation = gen
        pop.fe_count = fe
        counts = np.bincount(off.operators, minlength=4)
        trace.append(
            GenerationStats(
                generation=gen,
                fe_count=fe,
                mcm=act.mcm,
                n_activated=act.size,
                n_offspring=len(off.X),
                front_sizes=np.bincount(pop.mp_rank)[1:].tolist(),
                operator_counts={_OP_NAMES[i]: int(c) for i, c in enumerate(counts)},
            )
        )
        if callback is not None:
            callback(gen, pop, fe)

    mps = multiparty_pareto_filter(pop, scheme)
    return RunResult(
        population=pop,
        mps=mps,
        trace=trace,
        wall_time=time.perf_counter() - t0,
        fe_count=fe,
        config=config,
        problem_name=getattr(problem, "name", ""),
    )


def run_variant(problem, config: RunConfig, callback: Callback | None = None) -> RunResult:
    """Dispatch on ``config.variant``; every variant shares the main loop."""
    if config.variant not in VARIANTS:
        raise ContractError(f"unknown variant {config.variant!r}; expected one of {sorted(VARIANTS)}")
    return run_mpia(problem, config, callback)


def with_variant(config: RunConfig, variant: str, seed: int | None = None) -> RunConfig:
    return replace(config, variant=variant, seed=config.seed if seed is None else seed)
