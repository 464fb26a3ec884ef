import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from schedloop.core import Job, ProblemInstance


@pytest.fixture
def chain_instance():
    """Two jobs in a chain: A (3) before B (2). Optimal makespan 5."""
    return ProblemInstance(
        instance_id="chain",
        tier=0,
        jobs=(Job("A", 3), Job("B", 2)),
        precedence=(("A", "B"),),
        horizon=5,
    )


@pytest.fixture
def capacity_instance():
    """Two unit-demand jobs of duration 2 on a capacity-1 resource."""
    return ProblemInstance(
        instance_id="cap",
        tier=2,
        jobs=(Job("A", 2, (1,)), Job("B", 2, (1,))),
        capacities=(1,),
        horizon=4,
    )


@pytest.fixture
def deadline_instance():
    """Capacity instance with a deadline of 3: infeasible by one step."""
    return ProblemInstance(
        instance_id="capdl",
        tier=3,
        jobs=(Job("A", 2, (1,)), Job("B", 2, (1,))),
        capacities=(1,),
        deadline=3,
        horizon=4,
    )
