"""Verifiable-reward scheduling harness: tiered RCPSP generation, exact
solving, deterministic verification, and a rejection-sampling training loop
with an implicit-curriculum replay buffer and continuous per-tier evaluation.
"""

from .core import (
    CapacityViolation,
    DeadlineViolation,
    HorizonExceeded,
    Job,
    MissingJob,
    NegativeStart,
    PrecedenceViolation,
    ProblemInstance,
    Schedule,
    UnknownJob,
    Verdict,
    resource_profile,
    verify,
)
from .generator import (
    Family,
    GenerationExhausted,
    TierSpec,
    default_tiers,
    generate_certified,
    generate_instance,
)
from .loop import (
    CorrectnessMode,
    IterationMetrics,
    ReplayBuffer,
    RunConfig,
    TrainingTrace,
    emit_training_batch,
    notify_trainer,
    run,
    run_iteration,
)
from .seeding import mix, splitmix64
from .solver import SolveResult, SolveStatus, lower_bound, solve_optimal
from .textio import (
    ParseOutcome,
    PromptStyle,
    parse_response,
    render_feedback,
    render_prompt,
)

__all__ = [
    "CapacityViolation",
    "CorrectnessMode",
    "DeadlineViolation",
    "Family",
    "GenerationExhausted",
    "HorizonExceeded",
    "IterationMetrics",
    "Job",
    "MissingJob",
    "NegativeStart",
    "ParseOutcome",
    "PrecedenceViolation",
    "ProblemInstance",
    "PromptStyle",
    "ReplayBuffer",
    "RunConfig",
    "Schedule",
    "SolveResult",
    "SolveStatus",
    "TierSpec",
    "TrainingTrace",
    "UnknownJob",
    "Verdict",
    "default_tiers",
    "emit_training_batch",
    "generate_certified",
    "generate_instance",
    "lower_bound",
    "mix",
    "notify_trainer",
    "parse_response",
    "render_feedback",
    "render_prompt",
    "resource_profile",
    "run",
    "run_iteration",
    "solve_optimal",
    "splitmix64",
    "verify",
]

__version__ = "0.1.0"
