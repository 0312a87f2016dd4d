import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adarec.causal import ARROW, CIRCLE, CausalFeatureSet
from adarec.errors import (
    BadLabel,
    ExhaustedRetries,
    MissingCaseProfile,
    NoJsonFound,
    UnknownBrand,
    WrongBrandCount,
)
from adarec.llm_client import MockBackend
from adarec.profiling import NarrativeProfile
from adarec.reasoning import (
    FACTOR_HEADER,
    PATTERN_HEADER,
    AblationFlags,
    Recommendation,
    TaskSpec,
    assemble_prompt,
    parse_response,
    recommend,
    render_recommendation,
)
from adarec.retrieval import NeighborSet, with_profiles

BRAND_TASK = TaskSpec(
    kind="brand_recommendation",
    description="As the Senior Marketing Manager, recommend brands for the carousel.",
    brands=(
        ("cocacola", "Grocery beverages"),
        ("nike", "Sportswear"),
        ("sony", "Consumer electronics"),
        ("lego", "Toys and construction sets"),
    ),
)
BINARY_TASK = TaskSpec(
    kind="binary_response",
    description="Decide whether the customer will respond to the promotion.",
)
PROFILE = NarrativeProfile("u_test", "An engaged shopper with steady visits.", "generated")

BRAND_JSON_FORMAT = "{'brand': 'brand1, brand2, brand3', 'confidence': confidence, 'reason': reason}"


def make_cases():
    cases = NeighborSet(
        "u_test",
        (("u1", 0.9), ("u2", 0.8)),
        "cases",
        labels={"u1": 1, "u2": 0},
    )
    return with_profiles(cases, {"u1": "Case one profile.", "u2": "Case two profile."})


def causal_set():
    return CausalFeatureSet(
        (("visits", 0.5, ARROW), ("spend", 0.25, CIRCLE)), p_used=15
    )


class TestAssemblePrompt:
    def test_brand_bundle_contains_json_instruction(self):
        bundle = assemble_prompt(BRAND_TASK, causal_set(), make_cases(), PROFILE)
        assert BRAND_JSON_FORMAT in bundle.output_instruction
        assert bundle.output_instruction in bundle.text()

    def test_block_order_fixed(self):
        bundle = assemble_prompt(BRAND_TASK, causal_set(), make_cases(), PROFILE)
        text = bundle.text()
        positions = [
            text.index(BRAND_TASK.description),
            text.index(FACTOR_HEADER),
            text.index(PATTERN_HEADER),
            text.index("Narrative Profile:"),
            text.index("Based on the information above"),
        ]
        assert positions == sorted(positions)

    def test_ablation_drops_blocks_without_residue(self):
        flags = AblationFlags(factor=False, pattern=False)
        bundle = assemble_prompt(BINARY_TASK, causal_set(), make_cases(), PROFILE, flags)
        assert bundle.factor_block == "" and bundle.pattern_block == ""
        text = bundle.text()
        assert FACTOR_HEADER not in text and PATTERN_HEADER not in text
        assert text.count("\n\n\n") == 0
        parts = text.split("\n\n")
        assert parts[0] == BINARY_TASK.description

    def test_empty_causal_keeps_header(self):
        empty = CausalFeatureSet((), p_used=15)
        bundle = assemble_prompt(BINARY_TASK, empty, make_cases(), PROFILE)
        assert bundle.factor_block == FACTOR_HEADER

    def test_factor_scores_three_decimals(self):
        bundle = assemble_prompt(BRAND_TASK, causal_set(), make_cases(), PROFILE)
        assert "1. visits (MI=0.500)" in bundle.factor_block
        assert "2. spend (MI=0.250)" in bundle.factor_block

    def test_cases_render_profile_and_outcome(self):
        bundle = assemble_prompt(BINARY_TASK, None, make_cases(), PROFILE)
        assert "Customer Profile: Case one profile." in bundle.pattern_block
        assert "Observed outcome: 1" in bundle.pattern_block
        assert "Observed outcome: 0" in bundle.pattern_block

    def test_brand_outcomes_sorted(self):
        cases = NeighborSet(
            "u_test", (("u1", 0.9),), "cases",
            labels={"u1": frozenset({"sony", "nike"})},
        )
        cases = with_profiles(cases, {"u1": "p"})
        bundle = assemble_prompt(BRAND_TASK, None, cases, PROFILE)
        assert "Observed outcome: nike, sony" in bundle.pattern_block

    def test_missing_case_profile(self):
        cases = NeighborSet("u_test", (("u1", 0.9),), "cases", labels={"u1": 1})
        with pytest.raises(MissingCaseProfile):
            assemble_prompt(BINARY_TASK, None, cases, PROFILE)

    def test_deterministic(self):
        one = assemble_prompt(BRAND_TASK, causal_set(), make_cases(), PROFILE)
        two = assemble_prompt(BRAND_TASK, causal_set(), make_cases(), PROFILE)
        assert one.text() == two.text()
        assert one.sha256() == two.sha256()

    def test_catalog_iff_brand_kind(self):
        with pytest.raises(ValueError):
            TaskSpec(kind="binary_response", description="d", brands=(("a", "x"),))
        with pytest.raises(ValueError):
            TaskSpec(kind="brand_recommendation", description="d")

    def test_top_n_defaults(self):
        assert BRAND_TASK.top_n == 3
        assert BINARY_TASK.top_n == 1


class TestParseResponse:
    def test_brand_json_example(self):
        rec = parse_response(
            "{'brand': 'cocacola, nike, sony', 'confidence': 85, "
            "'reason': 'active in beverages'}",
            BRAND_TASK,
        )
        assert rec.brands == ("cocacola", "nike", "sony")
        assert rec.confidence == pytest.approx(0.85)
        assert rec.reason == "active in beverages"

    def test_prose_around_json(self):
        wrapped = (
            "Sure! Here is my recommendation:\n"
            "{'brand': 'cocacola, nike, sony', 'confidence': 0.7, 'reason': 'fit'}\n"
            "Let me know if you need more."
        )
        bare = "{'brand': 'cocacola, nike, sony', 'confidence': 0.7, 'reason': 'fit'}"
        got_wrapped = parse_response(wrapped, BRAND_TASK)
        got_bare = parse_response(bare, BRAND_TASK)
        assert got_wrapped.brands == got_bare.brands
        assert got_wrapped.confidence == got_bare.confidence

    def test_duplicate_brand_wrong_count(self):
        with pytest.raises(WrongBrandCount) as err:
            parse_response(
                "{'brand': 'cocacola, cocacola, nike', 'confidence': 1, 'reason': 'r'}",
                BRAND_TASK,
            )
        assert err.value.got == 2 and err.value.want == 3
        assert "cocacola" in err.value.raw

    def test_unknown_brand(self):
        with pytest.raises(UnknownBrand) as err:
            parse_response(
                "{'brand': 'cocacola, nike, pepsi', 'confidence': 1, 'reason': 'r'}",
                BRAND_TASK,
            )
        assert err.value.token == "pepsi"

    def test_case_insensitive_catalog_match(self):
        rec = parse_response(
            "{'brand': 'CocaCola, NIKE, Sony', 'confidence': 0.5, 'reason': 'r'}",
            BRAND_TASK,
        )
        assert rec.brands == ("cocacola", "nike", "sony")

    def test_binary_labels(self):
        for raw, want in (("1", 1), ("0", 0), ("'yes'", 1), ("'No'", 0)):
            rec = parse_response(
                f"{{'label': {raw}, 'confidence': 0.9, 'reason': 'r'}}", BINARY_TASK
            )
            assert rec.label == want

    def test_bad_label(self):
        with pytest.raises(BadLabel):
            parse_response("{'label': 'maybe', 'confidence': 1, 'reason': 'r'}", BINARY_TASK)
        with pytest.raises(BadLabel):
            parse_response("{'confidence': 1, 'reason': 'r'}", BINARY_TASK)

    def test_no_json_found(self):
        with pytest.raises(NoJsonFound) as err:
            parse_response("no structured answer here", BINARY_TASK)
        assert err.value.raw == "no structured answer here"

    def test_double_quoted_json_accepted(self):
        rec = parse_response(
            '{"label": 1, "confidence": 0.25, "reason": "ok"}', BINARY_TASK
        )
        assert rec.label == 1 and rec.confidence == 0.25

    def test_braces_inside_strings_ignored(self):
        rec = parse_response(
            "{'label': 1, 'confidence': 0.5, 'reason': 'uses { and } inside'}",
            BINARY_TASK,
        )
        assert rec.reason == "uses { and } inside"

    def test_confidence_over_100_clamped(self):
        rec = parse_response("{'label': 1, 'confidence': 8500, 'reason': ''}", BINARY_TASK)
        assert rec.confidence == 1.0

    @settings(max_examples=60)
    @given(
        brands=st.permutations(["cocacola", "nike", "sony", "lego"]),
        confidence=st.one_of(
            st.floats(0, 1).map(lambda c: round(c, 4)),
            st.integers(0, 100),
        ),
        reason=st.text(
            alphabet=st.characters(blacklist_characters="{}'\"\\", min_codepoint=32, max_codepoint=126),
            max_size=40,
        ),
    )
    def test_render_parse_round_trip(self, brands, confidence, reason):
        rec = Recommendation(
            confidence=float(confidence), reason=reason, raw="", brands=tuple(brands[:3])
        )
        parsed = parse_response(render_recommendation(rec), BRAND_TASK)
        assert set(parsed.brands) == set(rec.brands)
        want = rec.confidence / 100 if rec.confidence > 1 else rec.confidence
        assert parsed.confidence == pytest.approx(want, abs=1e-9)
        assert parsed.reason == reason

    def test_render_parse_binary_round_trip(self):
        rec = Recommendation(confidence=0.8, reason="why", raw="", label=1)
        parsed = parse_response(render_recommendation(rec), BINARY_TASK)
        assert parsed.label == 1 and parsed.confidence == 0.8


class TestRecommend:
    def test_happy_path_single_call(self):
        backend = MockBackend(script=["{'label': 1, 'confidence': 0.9, 'reason': 'r'}"])
        rec = recommend(backend, BINARY_TASK, None, make_cases(), PROFILE)
        assert rec.label == 1
        assert backend.calls == 1

    def test_retry_then_success(self):
        backend = MockBackend(
            script=["garbage", "{'label': 0, 'confidence': 0.5, 'reason': 'r'}"]
        )
        log = []
        rec = recommend(
            backend, BINARY_TASK, None, make_cases(), PROFILE, retries=2, attempt_log=log
        )
        assert rec.label == 0
        assert backend.calls == 2
        assert log == ["garbage", "{'label': 0, 'confidence': 0.5, 'reason': 'r'}"]

    def test_exhausted_retries(self):
        backend = MockBackend(script=["junk", "junk", "junk"])
        with pytest.raises(ExhaustedRetries) as err:
            recommend(backend, BINARY_TASK, None, make_cases(), PROFILE, retries=1)
        assert backend.calls == 2
        assert isinstance(err.value.last_error, NoJsonFound)
