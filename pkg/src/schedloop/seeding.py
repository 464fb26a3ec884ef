"""Public 64-bit seed mixing used everywhere randomness is derived.

Every derived seed in the harness comes from `mix(...)` over integer parts,
so re-rolls, rollouts, and eval draws are reproducible across processes and
execution modes. Constants are the splitmix64 finalizer constants.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1

# Namespace tags keeping seed streams disjoint (training instances, rollout
# requests, eval instances, eval requests, few-shot bank, generator re-rolls).
NS_TRAIN_INSTANCE = 0x545249
NS_ROLLOUT = 0x524F56D1
NS_EVAL_INSTANCE = 0x4556414C
NS_EVAL_REQUEST = 0x455652
NS_SHOT_BANK = 0x53484F54
NS_GEN_REROLL = 0x524C


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance-and-finalize a 64-bit state."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix(*parts: int) -> int:
    """Fold integer parts into one unsigned 64-bit seed, order-sensitive."""
    acc = 0x243F6A8885A308D3
    for part in parts:
        acc = splitmix64(acc ^ (part & _MASK))
    return acc
