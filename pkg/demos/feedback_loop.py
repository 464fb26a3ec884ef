"""Narrative walkthrough: generate a problem, fail it, learn from feedback.

Run with:  python3 demos/feedback_loop.py
"""

from schedloop import (
    PromptStyle,
    Schedule,
    default_tiers,
    generate_certified,
    parse_response,
    render_feedback,
    render_prompt,
    solve_optimal,
    verify,
)

# A certified tier-3 problem: precedence plus a deadline, oracle-solvable.
cert = generate_certified(default_tiers()[3], seed=7)
instance = cert.instance
print("=== prompt the agent would see ===")
print(render_prompt(instance, PromptStyle(chain_of_thought=True)))

# Pretend the agent answered by starting every job at time zero.
naive = Schedule({job.id: 0 for job in instance.jobs})
verdict = verify(instance, naive)
print("\n=== verdict on the naive all-at-zero schedule ===")
print(f"feasible: {verdict.feasible}")
if not verdict.feasible:
    print(render_feedback(verdict))

# The exact solver plays the role of a perfectly trained agent.
result = solve_optimal(instance)
print("\n=== oracle answer ===")
print(f"optimal makespan: {result.makespan} (certified: {cert.makespan})")
answer_text = "```\n" + "\n".join(
    f"{job}: {start}" for job, start in sorted(result.witness.starts.items())
) + "\n```"
parsed = parse_response(answer_text)
final = verify(instance, parsed.schedule, oracle_makespan=cert.makespan)
print(f"verifier accepts it: feasible={final.feasible}, optimal={final.optimal}")
