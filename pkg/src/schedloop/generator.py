"""Seeded instance generation across six compositional difficulty tiers.

Tier 0 is a 4-job warmup with dependencies only; tiers ramp up to the
held-out tier 5 (10 jobs, precedence + resources + deadline). Every
returned instance is certified feasible by the exact solver, and deadlines
are derived from the instance's own optimal makespan times a slack factor,
so generation cannot produce unsolvable problems.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from fractions import Fraction
from enum import Enum
from random import Random
from typing import Optional

from .core import InvalidInstanceError, Job, ProblemInstance, Schedule
from .seeding import NS_GEN_REROLL, mix
from .solver import DEFAULT_NODE_BUDGET, SolveResult, SolveStatus, solve_optimal


class Family(Enum):
    PRECEDENCE = "precedence"
    RESOURCE = "resource"
    DEADLINE = "deadline"


class GenerationExhausted(RuntimeError):
    """32 consecutive seeds failed to produce a certified instance."""


MAX_ATTEMPTS = 32


@dataclass(frozen=True)
class TierSpec:
    tier: int
    job_count: int
    families: frozenset[Family]
    duration_range: tuple[int, int] = (1, 5)
    edge_density: float = 0.4
    capacity_range: tuple[int, int] = (2, 3)
    demand_range: tuple[int, int] = (1, 2)
    deadline_slack: float = 1.2
    held_out: bool = False
    resource_count: int = 1
    # When set, the active families for a given seed cycle through these
    # subsets (seed mod len), so tier-4 instance sets cover all pairs.
    family_cycle: Optional[tuple[frozenset[Family], ...]] = None

    def __post_init__(self) -> None:
        if not self.families:
            raise ValueError("families must be nonempty")
        if self.job_count < 1:
            raise ValueError("job_count must be positive")
        if Family.RESOURCE in self.families:
            if self.demand_range[1] > self.capacity_range[0]:
                raise ValueError("max demand must not exceed min capacity")
        if self.deadline_slack < 1:
            raise ValueError("deadline_slack must be >= 1")
        if self.tier == 5 and not self.held_out:
            raise ValueError("tier 5 is held out")

    def active_families(self, seed: int) -> frozenset[Family]:
        if self.family_cycle:
            return self.family_cycle[seed % len(self.family_cycle)]
        return self.families


_P = Family.PRECEDENCE
_R = Family.RESOURCE
_D = Family.DEADLINE


def default_tiers() -> list[TierSpec]:
    """The six standard tiers, T0 warmup through held-out T5."""
    return [
        TierSpec(tier=0, job_count=4, families=frozenset({_P}),
                 duration_range=(1, 4), edge_density=0.5),
        TierSpec(tier=1, job_count=6, families=frozenset({_P})),
        TierSpec(tier=2, job_count=6, families=frozenset({_P, _R})),
        TierSpec(tier=3, job_count=6, families=frozenset({_P, _D})),
        TierSpec(
            tier=4,
            job_count=8,
            families=frozenset({_P, _R, _D}),
            family_cycle=(
                frozenset({_P, _R}),
                frozenset({_P, _D}),
                frozenset({_P, _R, _D}),
            ),
        ),
        TierSpec(tier=5, job_count=10, families=frozenset({_P, _R, _D}),
                 held_out=True),
    ]


def _job_ids(count: int) -> list[str]:
    letters = string.ascii_uppercase
    if count <= len(letters):
        return list(letters[:count])
    return [f"J{i + 1}" for i in range(count)]


def _sample_candidate(
    spec: TierSpec, seed: int, families: frozenset[Family]
) -> ProblemInstance:
    rng = Random(mix(seed, spec.tier))
    ids = _job_ids(spec.job_count)
    with_resources = Family.RESOURCE in families
    capacities: tuple[int, ...] = ()
    if with_resources:
        capacities = tuple(
            rng.randint(*spec.capacity_range) for _ in range(spec.resource_count)
        )
    jobs = []
    for job_id in ids:
        duration = rng.randint(*spec.duration_range)
        demand: tuple[int, ...] = ()
        if with_resources:
            demand = tuple(
                rng.randint(spec.demand_range[0], min(spec.demand_range[1], cap))
                for cap in capacities
            )
        jobs.append(Job(id=job_id, duration=duration, demand=demand))
    edges = []
    if Family.PRECEDENCE in families:
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                if rng.random() < spec.edge_density:
                    edges.append((ids[i], ids[j]))
    horizon = sum(j.duration for j in jobs)
    return ProblemInstance(
        instance_id=f"t{spec.tier}-s{seed:x}",
        tier=spec.tier,
        jobs=tuple(jobs),
        precedence=tuple(edges),
        capacities=capacities,
        deadline=None,
        horizon=horizon,
        seed=seed,
    )


@dataclass(frozen=True)
class CertifiedInstance:
    instance: ProblemInstance
    makespan: int
    witness: Schedule


def generate_certified(
    spec: TierSpec, seed: int, node_budget: int = DEFAULT_NODE_BUDGET
) -> CertifiedInstance:
    """Generate an instance plus its oracle optimum and witness.

    Deadlines come from the resource-and-precedence relaxation: solve
    without a deadline, then set deadline = ceil(optimum * slack), which
    keeps the optimum unchanged and the instance feasible by construction.
    Infeasible or budget-exhausted samples re-roll deterministically.
    """
    families = spec.active_families(seed)
    inner = seed
    for attempt in range(MAX_ATTEMPTS):
        candidate = _sample_candidate(spec, inner, families)
        result = solve_optimal(candidate, node_budget=node_budget)
        if result.status is SolveStatus.OPTIMAL:
            assert result.makespan is not None and result.witness is not None
            instance = candidate
            if Family.DEADLINE in families:
                deadline = _ceil_mul(result.makespan, spec.deadline_slack)
                instance = ProblemInstance(
                    instance_id=candidate.instance_id,
                    tier=candidate.tier,
                    jobs=candidate.jobs,
                    precedence=candidate.precedence,
                    capacities=candidate.capacities,
                    deadline=deadline,
                    horizon=candidate.horizon,
                    seed=candidate.seed,
                )
            return CertifiedInstance(
                instance=instance, makespan=result.makespan, witness=result.witness
            )
        inner = mix(seed, NS_GEN_REROLL, attempt + 1)
    raise GenerationExhausted(
        f"no certified instance for tier {spec.tier} seed {seed} "
        f"after {MAX_ATTEMPTS} attempts"
    )


def _ceil_mul(value: int, factor: float) -> int:
    # Exact ceil of value * factor; str() round-trip avoids binary-float
    # artifacts like 10 * 1.2 = 12.000000000000002.
    scaled = value * Fraction(str(factor))
    return -(-scaled.numerator // scaled.denominator)


def generate_instance(
    spec: TierSpec, seed: int, node_budget: int = DEFAULT_NODE_BUDGET
) -> ProblemInstance:
    return generate_certified(spec, seed, node_budget=node_budget).instance


def tier_spec_to_dict(spec: TierSpec) -> dict:
    doc: dict = {
        "tier": spec.tier,
        "job_count": spec.job_count,
        "families": sorted(f.value for f in spec.families),
        "duration_range": list(spec.duration_range),
        "edge_density": spec.edge_density,
        "capacity_range": list(spec.capacity_range),
        "demand_range": list(spec.demand_range),
        "deadline_slack": spec.deadline_slack,
        "held_out": spec.held_out,
        "resource_count": spec.resource_count,
    }
    if spec.family_cycle is not None:
        doc["family_cycle"] = [
            sorted(f.value for f in fams) for fams in spec.family_cycle
        ]
    return doc


def tier_spec_from_dict(doc: dict) -> TierSpec:
    cycle = doc.get("family_cycle")
    return TierSpec(
        tier=doc["tier"],
        job_count=doc["job_count"],
        families=frozenset(Family(f) for f in doc["families"]),
        duration_range=tuple(doc.get("duration_range", (1, 5))),
        edge_density=doc.get("edge_density", 0.4),
        capacity_range=tuple(doc.get("capacity_range", (2, 3))),
        demand_range=tuple(doc.get("demand_range", (1, 2))),
        deadline_slack=doc.get("deadline_slack", 1.2),
        held_out=doc.get("held_out", False),
        resource_count=doc.get("resource_count", 1),
        family_cycle=(
            tuple(frozenset(Family(f) for f in fams) for fams in cycle)
            if cycle is not None
            else None
        ),
    )
