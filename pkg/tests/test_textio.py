import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schedloop.core import (
    CapacityViolation,
    DeadlineViolation,
    PrecedenceViolation,
    Schedule,
    Verdict,
    verify,
)
from schedloop.generator import default_tiers, generate_certified
from schedloop.textio import (
    MalformedBlock,
    NoAnswerBlock,
    NonIntegerStart,
    PromptStyle,
    instance_from_text,
    instance_to_text,
    parse_response,
    read_trace_file,
    render_answer_block,
    render_feedback,
    render_prompt,
    write_trace_file,
    TraceRecord,
)


def test_prompt_mentions_edge_and_answer_block(chain_instance):
    text = render_prompt(chain_instance)
    assert "A must finish before B" in text
    assert "fenced code block" in text
    assert "JOB: START" in text


def test_prompt_shots(chain_instance, capacity_instance):
    bank = [
        (capacity_instance, Schedule({"A": 0, "B": 2})),
        (capacity_instance, Schedule({"A": 2, "B": 0})),
        (capacity_instance, Schedule({"A": 0, "B": 2})),
    ]
    text = render_prompt(chain_instance, PromptStyle(shots=3), shot_bank=bank)
    assert text.count("Example problem:") == 3
    assert text.count("Example answer:") == 3
    with pytest.raises(ValueError):
        render_prompt(chain_instance, PromptStyle(shots=3), shot_bank=bank[:2])


def test_prompt_cot_switch(chain_instance):
    plain = render_prompt(chain_instance, PromptStyle(chain_of_thought=False))
    cot = render_prompt(chain_instance, PromptStyle(chain_of_thought=True))
    assert "step by step" in cot
    assert "step by step" not in plain


def test_prompt_feedback_section(chain_instance):
    verdict = verify(chain_instance, Schedule({"A": 0, "B": 2}))
    feedback = render_feedback(verdict)
    text = render_prompt(chain_instance, PromptStyle(feedback=feedback))
    assert "Your previous schedule was rejected:" in text
    assert "B starts before its prerequisite A" in text


def test_prompt_deterministic(chain_instance):
    style = PromptStyle(chain_of_thought=True)
    assert render_prompt(chain_instance, style) == render_prompt(chain_instance, style)


def test_parse_fenced_block():
    outcome = parse_response("Sure!\n```\nA: 0\nB: 3\n```\n")
    assert outcome.ok
    assert outcome.schedule == Schedule({"A": 0, "B": 3})


def test_parse_reordered_and_prose():
    outcome = parse_response("I think... final answer: ```\nB: 3\nA: 0\n```")
    assert outcome.schedule == Schedule({"A": 0, "B": 3})


def test_parse_last_block_wins():
    text = "Draft:\n```\nA: 9\nB: 9\n```\nActually:\n```\nA: 0\nB: 3\n```"
    assert parse_response(text).schedule == Schedule({"A": 0, "B": 3})


def test_parse_no_answer():
    outcome = parse_response("no idea")
    assert outcome.error == NoAnswerBlock()


def test_parse_unfenced_tail():
    outcome = parse_response("The plan is simple.\n\nA: 0\nB: 3\n")
    assert outcome.schedule == Schedule({"A": 0, "B": 3})


def test_parse_malformed_line():
    outcome = parse_response("```\nA: 0\nwhat even is this\n```")
    assert outcome.error == MalformedBlock(detail="what even is this")


def test_parse_non_integer_start():
    outcome = parse_response("```\nA: soon\n```")
    assert outcome.error == NonIntegerStart(job="A")


def test_render_feedback_sentences():
    verdict = Verdict(
        feasible=False,
        violations=(
            PrecedenceViolation("A", "B"),
            CapacityViolation(0, 1, 2, 1),
            DeadlineViolation(9, 8),
        ),
    )
    text = render_feedback(verdict)
    lines = text.splitlines()
    assert len(lines) == 3
    assert "A" in lines[0] and "B" in lines[0]
    assert "Resource 0" in lines[1] and "time 1" in lines[1]
    assert "usage 2" in lines[1] and "capacity 1" in lines[1]
    assert "9" in lines[2] and "8" in lines[2]


def test_render_feedback_rejects_feasible():
    with pytest.raises(ValueError):
        render_feedback(Verdict(feasible=True, makespan=3))


def test_witness_round_trip():
    for tier in range(6):
        cert = generate_certified(default_tiers()[tier], 13)
        rendered = render_answer_block(cert.witness)
        outcome = parse_response("Answer below.\n" + rendered)
        assert outcome.schedule == cert.witness


def test_instance_file_round_trip(chain_instance, deadline_instance):
    for instance in (chain_instance, deadline_instance):
        text = instance_to_text(instance)
        assert instance_from_text(text) == instance
        # canonical form is stable under re-serialization
        assert instance_to_text(instance_from_text(text)) == text


def test_trace_file_round_trip(tmp_path):
    records = [
        TraceRecord("p1", "c1", 0, 1, "i1"),
        TraceRecord("p2\nwith lines", "c2", 3, 2, "i2"),
    ]
    path = tmp_path / "traces.jsonl"
    write_trace_file(records, path)
    assert read_trace_file(path) == records


@given(st.text(max_size=400))
@settings(max_examples=500, deadline=None)
def test_parser_totality(text):
    outcome = parse_response(text)
    assert outcome.ok or outcome.error is not None
