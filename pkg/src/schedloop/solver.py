"""Exact minimum-makespan solver: depth-first branch-and-bound.

Branches over start times in topological job order (ties by id), with
precedence-propagated earliest starts, an incremental resource timeline,
and critical-path tail bounds for pruning. Deadlines are hard constraints
folded into the search. Deterministic: the witness returned is the
lexicographically least optimal schedule under the branching order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .core import ProblemInstance, Schedule


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ABORTED = "aborted"


DEFAULT_NODE_BUDGET = 5_000_000


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    makespan: Optional[int] = None
    witness: Optional[Schedule] = None
    nodes_explored: int = 0
    elapsed: float = 0.0


class _BudgetExhausted(Exception):
    pass


def topological_order(instance: ProblemInstance) -> list[str]:
    """Kahn's algorithm, always popping the smallest ready id."""
    indeg = {j.id: 0 for j in instance.jobs}
    succs: dict[str, list[str]] = {j.id: [] for j in instance.jobs}
    for pred, succ in instance.precedence:
        indeg[succ] += 1
        succs[pred].append(succ)
    order: list[str] = []
    ready = sorted(i for i, d in indeg.items() if d == 0)
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for nxt in succs[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
                changed = True
        if changed:
            ready.sort()
    return order


def _tail_lengths(instance: ProblemInstance) -> dict[str, int]:
    """Longest path from each job to the DAG sink, own duration included."""
    durations = {j.id: j.duration for j in instance.jobs}
    succs: dict[str, list[str]] = {j.id: [] for j in instance.jobs}
    for pred, succ in instance.precedence:
        succs[pred].append(succ)
    tails: dict[str, int] = {}
    for job_id in reversed(topological_order(instance)):
        best_succ = max((tails[s] for s in succs[job_id]), default=0)
        tails[job_id] = durations[job_id] + best_succ
    return tails


def lower_bound(instance: ProblemInstance) -> int:
    """Admissible makespan bound: critical path, resource work, max duration."""
    tails = _tail_lengths(instance)
    bound = max(tails.values())
    for r, cap in enumerate(instance.capacities):
        work = sum(j.duration * j.demand[r] for j in instance.jobs)
        bound = max(bound, math.ceil(work / cap))
    bound = max(bound, max(j.duration for j in instance.jobs))
    return bound


def solve_optimal(
    instance: ProblemInstance, node_budget: int = DEFAULT_NODE_BUDGET
) -> SolveResult:
    """Exact minimum makespan, or Infeasible/Aborted. Never returns a
    suboptimal makespan as Optimal."""
    started = time.perf_counter()
    order = topological_order(instance)
    jobs = {j.id: j for j in instance.jobs}
    tails = _tail_lengths(instance)
    preds: dict[str, list[str]] = {i: [] for i in order}
    for pred, succ in instance.precedence:
        preds[succ].append(pred)

    cap_limit = instance.horizon
    if instance.deadline is not None:
        cap_limit = min(cap_limit, instance.deadline)

    n_res = len(instance.capacities)
    usage = [[0] * instance.horizon for _ in range(n_res)]
    starts: dict[str, int] = {}
    nodes = 0

    def fits(job_id: str, start: int) -> bool:
        job = jobs[job_id]
        for r in range(n_res):
            d = job.demand[r]
            if d == 0:
                continue
            cap = instance.capacities[r]
            row = usage[r]
            for t in range(start, start + job.duration):
                if row[t] + d > cap:
                    return False
        return True

    def place(job_id: str, start: int, sign: int) -> None:
        job = jobs[job_id]
        for r in range(n_res):
            d = job.demand[r] * sign
            if d == 0:
                continue
            row = usage[r]
            for t in range(start, start + job.duration):
                row[t] += d

    def search(index: int, current_ms: int, limit: int, budget: list[int]):
        """First complete schedule with makespan <= limit, DFS ascending.

        Returns (makespan, starts copy) or None. Because jobs are visited in
        topological order and starts ascend, the first hit is the
        lexicographically least schedule meeting the limit.
        """
        nonlocal nodes
        if index == len(order):
            return current_ms, dict(starts)
        job_id = order[index]
        job = jobs[job_id]
        est = max(
            (starts[p] + jobs[p].duration for p in preds[job_id]), default=0
        )
        for s in range(est, limit - job.duration + 1):
            if s + tails[job_id] > limit:
                break
            nodes += 1
            if nodes > budget[0]:
                raise _BudgetExhausted
            if n_res and not fits(job_id, s):
                continue
            place(job_id, s, 1)
            starts[job_id] = s
            found = search(index + 1, max(current_ms, s + job.duration), limit, budget)
            del starts[job_id]
            place(job_id, s, -1)
            if found is not None:
                return found
        return None

    budget = [node_budget]
    lb = lower_bound(instance)
    try:
        # Iterative deepening from the admissible bound upward: the first
        # limit with any schedule is the optimum, and ascending-start DFS
        # makes the first hit the lexicographically least optimal witness.
        for limit in range(lb, cap_limit + 1):
            found = search(0, 0, limit, budget)
            if found is not None:
                return SolveResult(
                    status=SolveStatus.OPTIMAL,
                    makespan=found[0],
                    witness=Schedule(starts=found[1]),
                    nodes_explored=nodes,
                    elapsed=time.perf_counter() - started,
                )
        return SolveResult(
            status=SolveStatus.INFEASIBLE,
            nodes_explored=nodes,
            elapsed=time.perf_counter() - started,
        )
    except _BudgetExhausted:
        return SolveResult(
            status=SolveStatus.ABORTED,
            nodes_explored=nodes,
            elapsed=time.perf_counter() - started,
        )
