"""Demographic stratification and persona generation."""

from collections import Counter

import pytest

from uxsim.llm import LLMGateway, ScriptedStub
from uxsim.personas import (
    DEFAULT_INCOME_BINS,
    DemographicSpec,
    Persona,
    PersonaError,
    build_persona_prompt,
    CellAssignment,
    generate_batch,
    generate_persona,
    income_bin_label,
    largest_remainder_allocation,
    load_personas,
    load_seed_persona,
    parse_persona_reply,
    sample_demographics,
    save_personas,
)

UNIFORM_3X5 = {
    "count": 60,
    "age": {"min": 20, "max": 65},
    "genders": ["male", "female", "non-binary"],
    "income_bins": [[0, 30000], [30000, 58000], [58000, 94000],
                    [94000, 153000], [153000, None]],
}


def synth_gateway():
    return LLMGateway(mode="stub", stub=ScriptedStub(synthesize_personas=True))


# -- allocation ---------------------------------------------------------


def test_largest_remainder_half_half_of_five():
    assert largest_remainder_allocation([0.5, 0.5], 5) == [3, 2]


def test_largest_remainder_exact_division():
    assert largest_remainder_allocation([0.2] * 5, 60) == [12] * 5


def test_largest_remainder_sums_to_total():
    weights = [0.07, 0.13, 0.4, 0.4]
    for total in (1, 7, 13, 60, 101):
        counts = largest_remainder_allocation(weights, total)
        assert sum(counts) == total


def test_uniform_3x5_spec_yields_exactly_4_per_cell():
    spec = DemographicSpec.from_dict(UNIFORM_3X5)
    assignments = sample_demographics(spec, seed=7)
    assert len(assignments) == 60
    cells = Counter((a.gender, a.income_low, a.income_high) for a in assignments)
    assert len(cells) == 15
    assert set(cells.values()) == {4}
    assert all(spec.age_min <= a.age <= spec.age_max for a in assignments)


def test_single_cell_spec_assigns_everyone_identically():
    spec = DemographicSpec.from_dict({
        "count": 4, "age": {"min": 30, "max": 30},
        "genders": ["female"], "income_bins": [[0, 10000]],
    })
    assignments = sample_demographics(spec, seed=1)
    assert len(assignments) == 4
    assert {(a.age, a.gender, a.income_low) for a in assignments} \
        == {(30, "female", 0)}


def test_sampling_is_deterministic_under_seed():
    spec = DemographicSpec.from_dict(UNIFORM_3X5)
    assert sample_demographics(spec, 42) == sample_demographics(spec, 42)
    assert sample_demographics(spec, 42) != sample_demographics(spec, 43)


def test_count_below_mandatory_cells_rejected():
    spec = DemographicSpec.from_dict({**UNIFORM_3X5, "count": 10})
    with pytest.raises(PersonaError, match="cells"):
        sample_demographics(spec, 1)


# -- spec validation -----------------------------------------------------


def test_gender_probabilities_must_sum_to_one():
    with pytest.raises(PersonaError, match="sum"):
        DemographicSpec.from_dict({
            "count": 2, "genders": [["female", 0.6], ["male", 0.6]],
        })


def test_overlapping_income_bins_rejected():
    with pytest.raises(PersonaError, match="overlap"):
        DemographicSpec.from_dict({
            "count": 2, "income_bins": [[0, 50000], [40000, 90000]],
        })


def test_only_last_income_bin_may_be_unbounded():
    with pytest.raises(PersonaError):
        DemographicSpec.from_dict({
            "count": 2, "income_bins": [[0, None], [50000, 90000]],
        })


def test_count_must_be_positive():
    with pytest.raises(PersonaError, match="count"):
        DemographicSpec.from_dict({"count": 0}).validate()


def test_income_bin_labels_match_reporting_brackets():
    labels = [income_bin_label(lo, hi) for lo, hi in DEFAULT_INCOME_BINS]
    assert labels == ["$0-$30k", "$30k-$58k", "$58k-$94k", "$94k-$153k",
                      "$153k-"]


# -- reply parsing --------------------------------------------------------


def test_parse_labeled_reply_with_noise():
    persona = parse_persona_reply(
        "- Name: Dana Whitfield\n"
        "- Age: 41 years old\n"
        "- Gender: Female\n"
        "- Income: $72,500 per year\n"
        "- Background: Dana manages a dental office.\n"
        "  She shops on her phone during lunch breaks.\n"
    )
    assert persona.name == "Dana Whitfield"
    assert persona.age == 41
    assert persona.income == 72500
    assert "dental office. She shops" in persona.background


def test_parse_reply_missing_fields_raises():
    with pytest.raises(PersonaError, match="missing"):
        parse_persona_reply("Name: X\nAge: 30\n")


def test_seed_persona_loads_and_validates():
    seed = load_seed_persona()
    assert seed.name == "Maria Alvarez"
    assert seed.age == 34
    assert seed.income == 45000
    assert "jacket" in seed.background


# -- prompt assembly ------------------------------------------------------


def test_prompt_contains_example_and_constraints():
    example = load_seed_persona()
    assignment = CellAssignment(age=34, gender="female",
                                income_low=30000, income_high=58000)
    prompt = build_persona_prompt(assignment, example)
    assert example.describe() in prompt
    assert "Have the age of 34" in prompt
    assert "Be female" in prompt
    assert "an income between $30000 and $58000" in prompt


def test_prompt_wording_for_unbounded_bin():
    assignment = CellAssignment(age=50, gender="male",
                                income_low=153000, income_high=None)
    prompt = build_persona_prompt(assignment, load_seed_persona())
    assert "an income of $153000 and above" in prompt


# -- generation -----------------------------------------------------------


def test_generate_persona_satisfies_constraints():
    assignment = CellAssignment(age=28, gender="non-binary",
                                income_low=58000, income_high=94000)
    persona = generate_persona(assignment, load_seed_persona(), synth_gateway())
    assert persona.age == 28
    assert persona.gender == "non-binary"
    assert 58000 <= persona.income < 94000


def test_constraint_violation_reprompts_then_accepts():
    bad = "Name: A B\nAge: 99\nGender: female\nIncome: $40,000\nBackground: x."
    good = "Name: A B\nAge: 34\nGender: female\nIncome: $40,000\nBackground: x."
    gateway = LLMGateway(mode="stub", stub=ScriptedStub(replies=[bad, good]))
    assignment = CellAssignment(age=34, gender="female",
                                income_low=30000, income_high=58000)
    persona = generate_persona(assignment, load_seed_persona(), gateway)
    assert persona.age == 34
    assert len(gateway.calls) == 2
    retry_text = gateway.calls[1].rendered()
    assert "violates the constraints" in retry_text
    assert "age must be 34" in retry_text


def test_constraint_violation_twice_rejects():
    bad = "Name: A B\nAge: 99\nGender: female\nIncome: $40,000\nBackground: x."
    gateway = LLMGateway(mode="stub", stub=ScriptedStub(replies=[bad, bad]))
    assignment = CellAssignment(age=34, gender="female",
                                income_low=30000, income_high=58000)
    with pytest.raises(PersonaError, match="after one retry"):
        generate_persona(assignment, load_seed_persona(), gateway)


def test_generate_batch_counts_and_constraints():
    spec = DemographicSpec.from_dict({**UNIFORM_3X5, "count": 15})
    gateway = synth_gateway()
    personas = generate_batch(spec, gateway, seed=11, intent="buy a jacket")
    assert len(personas) == 15
    assert all(p.intent == "buy a jacket" for p in personas)
    cells = Counter((p.gender, income_bin_label(*_bin_of(p.income)))
                    for p in personas)
    assert set(cells.values()) == {1}


def _bin_of(income):
    for low, high in DEFAULT_INCOME_BINS:
        if income >= low and (high is None or income < high):
            return low, high
    raise AssertionError(f"income {income} fits no bin")


def test_generate_batch_is_deterministic():
    spec = DemographicSpec.from_dict({**UNIFORM_3X5, "count": 15})
    batch_a = generate_batch(spec, synth_gateway(), seed=5)
    batch_b = generate_batch(spec, synth_gateway(), seed=5)
    assert [p.to_dict() for p in batch_a] == [p.to_dict() for p in batch_b]


def test_first_call_uses_seed_persona_then_examples_rotate():
    spec = DemographicSpec.from_dict({
        "count": 5, "age": {"min": 25, "max": 45},
        "genders": ["female"], "income_bins": [[30000, 58000]],
    })
    gateway = synth_gateway()
    generate_batch(spec, gateway, seed=3)
    example_names = []
    for call in gateway.calls:
        text = call.rendered()
        start = text.index("Example persona:")
        name_line = text[start:].splitlines()[2]
        assert name_line.startswith("Name: ")
        example_names.append(name_line[len("Name: "):])
    assert example_names[0] == "Maria Alvarez"
    for previous, current in zip(example_names[1:], example_names[2:]):
        assert current != previous


def test_persona_round_trip_via_files(tmp_path):
    personas = [
        Persona(name="A", age=30, gender="female", income=20000,
                background="Lives in Reno.", intent="buy a jacket"),
        Persona(name="B", age=60, gender="male", income=160000,
                background="Retired engineer."),
    ]
    index = save_personas(tmp_path / "personas", personas)
    loaded = load_personas(index)
    assert [p.to_dict() for p in loaded] == [p.to_dict() for p in personas]
    loaded_from_dir = load_personas(tmp_path / "personas")
    assert [p.to_dict() for p in loaded_from_dir] \
        == [p.to_dict() for p in personas]
