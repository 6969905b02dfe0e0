import math

import pytest

from toolamp.errors import ConfigurationError
from toolamp.metrics import (
    Bitset,
    MetricValue,
    aggregate,
    bleu,
    exact_match,
    hashed_fingerprint,
    levenshtein,
    rouge_l,
    rouge_n,
    score_instance,
    smiles_lite_valid,
    tanimoto,
    tokenize,
    zero_scores,
)


class TestTokenize:
    def test_character_mode(self):
        assert tokenize("C1CC1", "character").tokens == ("C", "1", "C", "C", "1")

    def test_whitespace_drops_empty(self):
        assert tokenize("a b  c", "whitespace").tokens == ("a", "b", "c")

    def test_empty_input(self):
        assert tokenize("", "character").tokens == ()
        assert tokenize("", "whitespace").tokens == ()

    def test_unknown_mode(self):
        with pytest.raises(ConfigurationError):
            tokenize("x", "bytes")


class TestBleu:
    def test_identical_sequences(self):
        for toks in (["a"], ["a", "b"], list("C1CC1")):
            assert bleu(toks, toks, max_n=1, smoothing="none") == pytest.approx(1.0)

    def test_hand_counted_case(self):
        # p1 = 3/4, p2 = 2/3, BP = 1 -> sqrt(0.5); frozen from the clipped
        # precision oracle below
        got = bleu(list("abcd"), list("abce"), max_n=2, smoothing="none")
        assert got == pytest.approx(0.7071067811865475, abs=1e-12)
        assert got == pytest.approx(_bleu_oracle(list("abcd"), list("abce"), 2), abs=1e-12)

    def test_empty_candidate_scores_zero(self):
        assert bleu([], ["a"], max_n=2, smoothing="none") == 0.0
        assert bleu([], ["a"], max_n=2, smoothing="add_one") == 0.0

    def test_brevity_penalty(self):
        # candidate is a strict prefix: precisions 1, BP = exp(1 - 2/1)
        got = bleu(["a"], ["a", "b"], max_n=1, smoothing="none")
        assert got == pytest.approx(math.exp(-1.0))

    def test_bad_max_n(self):
        with pytest.raises(ConfigurationError):
            bleu(["a"], ["a"], max_n=0)


def _bleu_oracle(cand, ref, max_n):
    """Independent clipped-precision BLEU used to freeze expected values."""
    if not cand:
        return 0.0
    logs = []
    for n in range(1, max_n + 1):
        cand_ngrams = [tuple(cand[i : i + n]) for i in range(len(cand) - n + 1)]
        ref_ngrams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
        hits = 0
        remaining = list(ref_ngrams)
        for g in cand_ngrams:
            if g in remaining:
                hits += 1
                remaining.remove(g)
        if not cand_ngrams or hits == 0:
            return 0.0
        logs.append(math.log(hits / len(cand_ngrams)))
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(sum(logs) / max_n)


class TestRouge:
    def test_identical(self):
        assert rouge_n(["a", "b"], ["a", "b"], 1) == (1.0, 1.0, 1.0)
        assert rouge_l(["a", "b"], ["a", "b"]) == (1.0, 1.0, 1.0)

    def test_disjoint(self):
        assert rouge_n(["a"], ["b"], 1) == (0.0, 0.0, 0.0)

    def test_unigram_overlap(self):
        assert rouge_n(["a", "b"], ["a", "c"], 1) == (0.5, 0.5, 0.5)

    def test_lcs_case(self):
        # LCS([a,x,b], [a,b]) = 2, enumerated by hand
        precision, recall, f1 = rouge_l(["a", "x", "b"], ["a", "b"])
        assert precision == pytest.approx(2 / 3)
        assert recall == pytest.approx(1.0)
        assert f1 == pytest.approx(0.8)

    def test_empty_side(self):
        assert rouge_l([], ["a"]) == (0.0, 0.0, 0.0)
        assert rouge_l(["a"], []) == (0.0, 0.0, 0.0)


class TestLevenshtein:
    def test_identity(self):
        assert levenshtein("C1CC1", "C1CC1") == 0

    def test_single_substitution(self):
        assert levenshtein("abc", "abd") == 1

    def test_brute_forced_case(self):
        # value frozen from the naive recursive oracle
        assert levenshtein("C1CC1", "CC1(C)CC1") == 4

    def test_empty_sides(self):
        assert levenshtein("", "abc") == 3
        assert levenshtein("abc", "") == 3


class TestExactMatch:
    def test_equal(self):
        assert exact_match("C1CC1", "C1CC1")

    def test_default_normalizer_strips(self):
        assert exact_match(" C1CC1", "C1CC1")

    def test_not_equal(self):
        assert not exact_match("C1CC1", "CC1CC1")

    def test_failing_normalizer_flags_false(self):
        def bad(_):
            raise ValueError("boom")

        with pytest.warns(UserWarning):
            assert exact_match("a", "a", normalizer=bad) is False


class TestFingerprint:
    def test_deterministic(self):
        assert hashed_fingerprint("CCO") == hashed_fingerprint("CCO")

    def test_empty_text(self):
        assert hashed_fingerprint("") == Bitset(1024, frozenset())

    def test_unigram_multiset_equivalence(self):
        a = hashed_fingerprint("CCO", n_lo=1, n_hi=1)
        b = hashed_fingerprint("OCC", n_lo=1, n_hi=1)
        assert a == b

    def test_bad_params(self):
        with pytest.raises(ConfigurationError):
            hashed_fingerprint("x", n_lo=0)
        with pytest.raises(ConfigurationError):
            hashed_fingerprint("x", width=1000)


class TestTanimoto:
    def test_identical(self):
        a = Bitset(8, frozenset({1, 2, 3}))
        assert tanimoto(a, a) == 1.0

    def test_disjoint(self):
        assert tanimoto(Bitset(8, frozenset({1})), Bitset(8, frozenset({2}))) == 0.0

    def test_direct_formula(self):
        a = Bitset(8, frozenset({1, 2, 3}))
        b = Bitset(8, frozenset({2, 3, 4}))
        assert tanimoto(a, b) == 0.5

    def test_both_empty(self):
        assert tanimoto(Bitset(8, frozenset()), Bitset(8, frozenset())) == 1.0

    def test_width_mismatch(self):
        with pytest.raises(ConfigurationError):
            tanimoto(Bitset(8, frozenset()), Bitset(16, frozenset()))


class TestSmilesLiteValid:
    @pytest.mark.parametrize(
        "text",
        ["C1CC1", "CC(=O)O", "c1ccccc1", "C[C@@H](N)C(=O)O".replace("@", ""), "[NH3+]", "CC.O", "C%12CC%12"],
    )
    def test_valid(self, text):
        assert smiles_lite_valid(text)

    @pytest.mark.parametrize("text", ["C1CC", "C(C", "C)C", "C[", "C]", "Cx", "[]", "C%1C"])
    def test_invalid(self, text):
        assert not smiles_lite_valid(text)


class TestScoreInstance:
    def test_property_label_normalization(self):
        assert score_instance("property_prediction", "Yes", "yes") == {"accuracy": 1.0}
        assert score_instance("property_prediction", "no", "yes") == {"accuracy": 0.0}

    def test_design_perfect(self):
        gold = "C1CC1"
        scores = score_instance("molecule_design", gold, gold)
        assert scores["exact"] == 1.0
        assert scores["bleu2"] == pytest.approx(1.0)
        assert scores["levenshtein"] == 0.0
        assert scores["tanimoto"] == 1.0
        assert scores["validity"] == 1.0

    def test_captioning_empty_prediction(self):
        scores = score_instance("captioning", "", "the molecule is water")
        assert all(value == 0.0 for value in scores.values())

    def test_unknown_task(self):
        with pytest.raises(ConfigurationError):
            score_instance("retrosynthesis", "a", "b")

    def test_reaction_uses_design_bundle(self):
        assert set(score_instance("reaction_prediction", "C", "C")) == {
            "exact",
            "bleu2",
            "levenshtein",
            "validity",
            "tanimoto",
        }

    def test_zero_scores_distance_is_gold_length(self):
        zeros = zero_scores("molecule_design", "C1CC1")
        assert zeros["levenshtein"] == 5.0
        assert zeros["exact"] == 0.0


class TestAggregate:
    def test_mean(self):
        report = aggregate([{"accuracy": 1.0}, {"accuracy": 0.0}], "accuracy")
        assert report.fitness == 0.5
        assert report.n_instances == 2

    def test_single_instance(self):
        report = aggregate([{"accuracy": 1.0}], "accuracy")
        assert report.means == {"accuracy": 1.0}

    def test_constant_values(self):
        report = aggregate([{"bleu2": 0.25}] * 100, "bleu2")
        assert report.fitness == pytest.approx(0.25)

    def test_empty_errors(self):
        with pytest.raises(ConfigurationError):
            aggregate([], "accuracy")

    def test_heterogeneous_keys_error(self):
        with pytest.raises(ConfigurationError):
            aggregate([{"accuracy": 1.0}, {"bleu2": 1.0}], "accuracy")


class TestExternalValidator:
    def test_wraps_line_protocol_command(self):
        import sys

        from toolamp.metrics import external_validator

        check = external_validator([
            sys.executable, "-c",
            "print('valid' if input().startswith('C') else 'no')",
        ])
        assert check("C1CC1") is True
        assert check("X") is False


class TestAggregateInstances:
    def test_keep_instances_round_trip(self):
        scores = [{"accuracy": 1.0}, {"accuracy": 0.0}]
        report = aggregate(scores, "accuracy", keep_instances=True)
        assert report.per_instance == tuple(scores)
        assert aggregate(scores, "accuracy").per_instance is None


class TestMetricValue:
    def test_range_check(self):
        MetricValue("bleu2", 0.5)
        with pytest.raises(ConfigurationError):
            MetricValue("bleu2", 1.5)

    def test_levenshtein_integer(self):
        MetricValue("levenshtein", 3.0)
        with pytest.raises(ConfigurationError):
            MetricValue("levenshtein", 2.5)
        with pytest.raises(ConfigurationError):
            MetricValue("levenshtein", -1.0)
