import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adarec.errors import KeyMismatch, WrongBrandCount
from adarec.evaluation import binary_metrics, expected_ctr


def as_maps(truths, preds):
    return (
        {f"u{i}": p for i, p in enumerate(preds)},
        {f"u{i}": t for i, t in enumerate(truths)},
    )


class TestBinaryMetrics:
    def test_perfect_predictions(self):
        preds, truths = as_maps([0, 1, 1, 0], [0, 1, 1, 0])
        m = binary_metrics(preds, truths)
        assert (m.precision, m.recall, m.f1) == (100.0, 100.0, 100.0)

    def test_all_positive_on_60_40(self):
        truths = [1] * 60 + [0] * 40
        preds, truths = as_maps(truths, [1] * 100)
        m = binary_metrics(preds, truths)
        assert m.per_class[1].precision == pytest.approx(60.0)
        assert m.per_class[1].recall == pytest.approx(100.0)
        assert m.per_class[1].f1 == pytest.approx(75.0)
        assert m.per_class[0] == m.per_class[0].__class__(0.0, 0.0, 0.0)
        assert round(m.precision, 2) == 30.00
        assert round(m.recall, 2) == 50.00
        assert round(m.f1, 2) == 37.50

    def test_complement_is_zero(self):
        truths = [0, 1, 0, 1]
        preds, truths = as_maps(truths, [1, 0, 1, 0])
        assert binary_metrics(preds, truths).f1 == 0.0

    def test_key_mismatch(self):
        with pytest.raises(KeyMismatch):
            binary_metrics({"a": 1}, {"b": 1})
        with pytest.raises(KeyMismatch):
            binary_metrics({}, {})

    def test_confusion_counts(self):
        truths = [1, 1, 0, 0, 1]
        preds, truths = as_maps(truths, [1, 0, 0, 1, 1])
        m = binary_metrics(preds, truths)
        assert m.confusion == ((1, 1), (1, 2))  # [truth][prediction]

    def test_relabeling_users_invariant(self):
        truths = {f"u{i}": i % 2 for i in range(10)}
        preds = {f"u{i}": (i + 1) % 2 if i < 3 else i % 2 for i in range(10)}
        renamed_t = {f"x_{k}": v for k, v in truths.items()}
        renamed_p = {f"x_{k}": v for k, v in preds.items()}
        assert binary_metrics(preds, truths) == binary_metrics(renamed_p, renamed_t)

    @settings(max_examples=60)
    @given(
        rows=st.lists(
            st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50
        )
    )
    def test_class_swap_symmetry(self, rows):
        preds, truths = as_maps([t for t, _ in rows], [p for _, p in rows])
        swapped_p = {k: 1 - v for k, v in preds.items()}
        swapped_t = {k: 1 - v for k, v in truths.items()}
        m = binary_metrics(preds, truths)
        s = binary_metrics(swapped_p, swapped_t)
        assert m.per_class[0] == s.per_class[1]
        assert m.per_class[1] == s.per_class[0]
        assert m.f1 == pytest.approx(s.f1)
        assert m.precision == pytest.approx(s.precision)

    def test_hand_computed_confusion_fixtures(self):
        # (truths, preds, macro P, macro R, macro F1) computed by hand
        fixtures = [
            ([1, 1, 0, 0], [1, 1, 0, 0], 100.0, 100.0, 100.0),
            ([1, 1, 0, 0], [1, 0, 0, 0], 83.33, 75.0, 73.33),
            ([1, 0, 1, 0], [1, 1, 1, 1], 25.0, 50.0, 33.33),
            ([0, 0, 0, 1], [0, 0, 0, 0], 37.5, 50.0, 42.86),
        ]
        for truths, preds, p, r, f1 in fixtures:
            pm, tm = as_maps(truths, preds)
            m = binary_metrics(pm, tm)
            assert round(m.precision, 2) == pytest.approx(p, abs=0.01)
            assert round(m.recall, 2) == pytest.approx(r, abs=0.01)
            assert round(m.f1, 2) == pytest.approx(f1, abs=0.01)


class TestExpectedCtr:
    def test_all_clicked(self):
        preds = {"u1": ["a", "b", "c"]}
        clicked = {"u1": {"a", "b", "c", "d"}}
        assert expected_ctr(preds, clicked).expected_ctr == 100.0

    def test_one_of_three(self):
        preds = {"u1": ["a", "b", "c"]}
        clicked = {"u1": {"a"}}
        assert expected_ctr(preds, clicked).expected_ctr == pytest.approx(33.33, abs=0.01)

    def test_two_user_mean(self):
        preds = {"u1": ["a", "b", "c"], "u2": ["a", "b", "c"]}
        clicked = {"u1": {"a"}, "u2": {"a", "b"}}
        assert expected_ctr(preds, clicked).expected_ctr == pytest.approx(50.0)

    def test_wrong_brand_count(self):
        with pytest.raises(WrongBrandCount):
            expected_ctr({"u1": ["a", "a", "b"]}, {"u1": {"a"}})
        with pytest.raises(WrongBrandCount):
            expected_ctr({"u1": ["a", "b"]}, {"u1": {"a"}})

    def test_key_mismatch(self):
        with pytest.raises(KeyMismatch):
            expected_ctr({"u1": ["a", "b", "c"]}, {"u2": {"a"}})

    def test_monotone_under_click_swap(self):
        clicked = {"u1": {"a", "b"}}
        low = expected_ctr({"u1": ["a", "x", "y"]}, clicked, top_n=3).expected_ctr
        high = expected_ctr({"u1": ["a", "b", "y"]}, clicked, top_n=3).expected_ctr
        assert high >= low

    def test_per_user_fractions(self):
        preds = {"u2": ["a", "b", "c"], "u1": ["x", "y", "z"]}
        clicked = {"u1": set(), "u2": {"a", "b", "c"}}
        result = expected_ctr(preds, clicked)
        assert result.per_user == (("u1", 0.0), ("u2", 1.0))
