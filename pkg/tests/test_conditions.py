import os

import numpy as np
import pytest

from pencilspec.conditions import (
    WordSpec,
    analyze,
    check_admissibility,
    check_word_condition,
    count_words,
    enumerate_words,
    realize_word,
    sample_admissible,
    verify_cycle_identity,
    verify_first_order_identity,
)
from pencilspec.charpoly import coefficient_distance, pencil_charpoly, transform_tuple_vars
from pencilspec.decomposer import extract_block_structure, unify_layers
from pencilspec.errors import IndexOutOfRange, ZeroCoefficientOnCycle
from pencilspec.instances import gen_conjugate_negative, gen_decomposable
from pencilspec.linalg import (
    HermitianTuple,
    eigendecompose_clustered,
    norm_scale,
    shift_to_invertible,
)


def diag(*vals):
    return np.diag(np.asarray(vals, dtype=np.complex128))


class TestWordSpec:
    def test_valid(self):
        w = WordSpec(letters=(2, 3), projections=(1,))
        assert w.r == 1

    def test_rejects_repeated_projection(self):
        with pytest.raises(ValueError):
            WordSpec(letters=(2, 2, 2), projections=(1, 1))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            WordSpec(letters=(2,), projections=(1,))

    def test_rejects_first_generator_as_letter(self):
        with pytest.raises(ValueError):
            WordSpec(letters=(1,), projections=())


class TestEnumeration:
    @pytest.mark.parametrize(
        "n,m,want",
        [(2, 2, 3), (3, 3, 62), (1, 2, 1), (4, 2, 1 + 4 + 12 + 24), (4, 3, 498)],
    )
    def test_mode_all_counts(self, n, m, want):
        words, truncated = enumerate_words(n, m, mode="all")
        assert len(words) == want == count_words(n, m, "all")
        assert not truncated

    def test_proof_core_count(self):
        words, _ = enumerate_words(3, 2, mode="proof_core")
        assert len(words) == 7 == count_words(3, 2, "proof_core")
        for w in words:
            assert tuple(sorted(w.projections)) == w.projections

    def test_n2_m2_explicit(self):
        words, _ = enumerate_words(2, 2, mode="all")
        got = {(w.letters, w.projections) for w in words}
        assert got == {((2,), ()), ((2, 2), (1,)), ((2, 2), (2,))}

    def test_cap_flags_truncation(self):
        words, truncated = enumerate_words(3, 3, mode="all", cap=10)
        assert len(words) == 10 and truncated

    def test_counts_match_closed_form_battery(self):
        for n in range(1, 5):
            for m in (2, 3):
                words, _ = enumerate_words(n, m, mode="all")
                assert len(words) == count_words(n, m, "all")


class TestRealizeWord:
    def test_single_letter(self):
        tup = HermitianTuple((diag(1, 2), diag(3, 4)))
        sd = eigendecompose_clustered(tup.matrices[0])
        w = WordSpec(letters=(2,), projections=())
        assert np.allclose(realize_word(tup, sd, w), diag(3, 4))

    def test_projected_square(self):
        tup = HermitianTuple((diag(1, 2), diag(3, 4)))
        sd = eigendecompose_clustered(tup.matrices[0])
        w = WordSpec(letters=(2, 2), projections=(1,))
        assert np.allclose(realize_word(tup, sd, w), diag(9, 0))

    def test_adjoint_identity(self):
        rng = np.random.default_rng(6)
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        mats = (diag(1, 2, 3, 4), (g + g.conj().T) / 2, diag(1, -1, 2, -2))
        tup = HermitianTuple(mats)
        sd = eigendecompose_clustered(tup.matrices[0])
        w = WordSpec(letters=(2, 3, 2), projections=(1, 3))
        wrev = WordSpec(letters=(2, 3, 2), projections=(3, 1))
        lhs = realize_word(tup, sd, w).conj().T
        rhs = realize_word(tup, sd, wrev)
        assert np.linalg.norm(lhs - rhs) <= 1e-10

    def test_out_of_range(self):
        tup = HermitianTuple((diag(1, 2), diag(3, 4)))
        sd = eigendecompose_clustered(tup.matrices[0])
        with pytest.raises(IndexOutOfRange):
            realize_word(tup, sd, WordSpec(letters=(3,), projections=()))
        with pytest.raises(IndexOutOfRange):
            realize_word(tup, sd, WordSpec(letters=(2, 2), projections=(5,)))


class TestWordCondition:
    def test_commuting_tuple_all_words_pass(self):
        tup = HermitianTuple((diag(1, 1, 2, 2), diag(3, 3, 4, 4)))
        sd = eigendecompose_clustered(tup.matrices[0])
        words, _ = enumerate_words(2, 2, mode="all")
        for i, w in enumerate(words):
            v = check_word_condition(tup, sd, w, k=2, n=2, seed=100 + i)
            assert v.is_kth_power

    def test_decomposable_all_words_pass(self):
        tup, _ = gen_decomposable(3, 2, 2, seed=3)
        shifted, _ = shift_to_invertible(tup)
        sd = eigendecompose_clustered(shifted.matrices[0])
        words, _ = enumerate_words(3, 2, mode="all")
        for i, w in enumerate(words):
            v = check_word_condition(shifted, sd, w, k=2, n=3, seed=i)
            assert v.is_kth_power, (w, v.failure_reason)

    def test_negative_cycle_word_fails(self):
        tup, desc = gen_conjugate_negative(seed=1)
        shifted, _ = shift_to_invertible(tup)
        sd = eigendecompose_clustered(shifted.matrices[0])
        w = WordSpec(**desc.failing_word)
        v = check_word_condition(shifted, sd, w, k=2, n=3, seed=0)
        assert not v.is_kth_power


class TestAdmissibility:
    def test_commuting_positive(self):
        ok, diagnostics = check_admissibility(
            HermitianTuple((diag(1, 1, 2, 2), diag(3, 3, 4, 4))), k=2
        )
        assert ok
        assert all(e["ok"] for e in diagnostics["generators"])

    def test_scalar_generator_fails(self):
        ok, diagnostics = check_admissibility(
            HermitianTuple((diag(1, 1, 2, 2), diag(3, 3, 3, 3))), k=2
        )
        assert not ok
        assert diagnostics["generators"][1]["ok"] is False

    def test_decomposable_instances_admissible(self):
        for seed in range(3):
            tup, _ = gen_decomposable(2, 2, 2, seed=seed)
            ok, _ = check_admissibility(tup, k=2)
            assert ok

    def test_nondividing_k(self):
        ok, diagnostics = check_admissibility(HermitianTuple((diag(1, 2, 3),)), k=2)
        assert not ok and "divide" in diagnostics["reason"]


class TestSampleAdmissible:
    def test_succeeds_and_returns_invertible(self):
        tup, _ = gen_decomposable(2, 2, 2, seed=9)
        c, mixed = sample_admissible(tup, k=2, radius=0.01, seed=4)
        assert abs(np.linalg.det(c)) > 1e-10
        ok, _ = check_admissibility(mixed, k=2)
        assert ok

    def test_transform_law_on_sample(self):
        tup, _ = gen_decomposable(2, 2, 2, seed=2)
        c, mixed = sample_admissible(tup, k=2, radius=0.05, seed=1)
        lhs = pencil_charpoly(list(mixed.matrices))
        rhs = transform_tuple_vars(pencil_charpoly(list(tup.matrices)), c)
        assert coefficient_distance(lhs, rhs) <= 1e-8

    def test_radius_validation(self):
        tup, _ = gen_decomposable(2, 2, 2, seed=2)
        with pytest.raises(ValueError):
            sample_admissible(tup, k=2, radius=0.9, seed=0)


class TestAnalyze:
    def test_decomposable_passes(self):
        tup, _ = gen_decomposable(2, 2, 2, seed=5)
        rep = analyze(tup, 2, seed=0)
        assert rep.overall == "pass"
        assert rep.precondition_ok and rep.admissible_ok
        assert rep.full_tuple.is_kth_power
        assert not rep.failing_words

    def test_negative_fails_with_failing_word(self):
        tup, _ = gen_conjugate_negative(seed=1)
        rep = analyze(tup, 2, seed=0)
        assert rep.overall == "fail"
        assert len(rep.failing_words) >= 1
        fails = {(w.letters, w.projections) for w in rep.failing_words}
        assert ((2, 2, 2), (2, 3)) in fails

    def test_simple_spectrum_violates_precondition(self):
        tup = HermitianTuple((diag(1, 2, 3), diag(1, 0, 2)))
        rep = analyze(tup, 2, seed=0)
        assert rep.overall == "precondition_violated"
        assert rep.word_results == ()

    def test_nondivisible_k(self):
        tup = HermitianTuple((diag(1, 1, 2), diag(0, 1, 2)))
        rep = analyze(tup, 2, seed=0)
        assert rep.overall == "precondition_violated"

    def test_inadmissible_tuple_reported(self):
        tup = HermitianTuple((diag(1, 1, 2, 2), diag(3, 3, 3, 3)))
        rep = analyze(tup, 2, seed=0)
        assert rep.overall == "precondition_violated"
        assert rep.precondition_ok and not rep.admissible_ok

    def test_deterministic_across_thread_counts(self):
        tup, _ = gen_decomposable(3, 2, 2, seed=11)
        old = os.environ.get("PENCIL_THREADS")
        try:
            os.environ["PENCIL_THREADS"] = "1"
            rep1 = analyze(tup, 2, seed=7)
            os.environ["PENCIL_THREADS"] = "4"
            rep2 = analyze(tup, 2, seed=7)
        finally:
            if old is None:
                os.environ.pop("PENCIL_THREADS", None)
            else:
                os.environ["PENCIL_THREADS"] = old
        assert rep1 == rep2


class TestFirstOrderIdentity:
    def test_commuting_pair_exact(self):
        tup = HermitianTuple((diag(1, 2), diag(3, 4)))
        sd = eigendecompose_clustered(tup.matrices[0])
        for i in range(2):
            assert verify_first_order_identity(tup, sd, i, 2) <= 1e-12

    def test_decomposable_within_tolerance(self):
        tup, _ = gen_decomposable(3, 2, 2, seed=8)
        shifted, _ = shift_to_invertible(tup)
        sd = eigendecompose_clustered(shifted.matrices[0])
        scale = norm_scale(shifted.matrices[1])
        for i in range(sd.n):
            assert verify_first_order_identity(shifted, sd, i, 2) <= 1e-7 * scale


class TestCycleIdentity:
    def _structure(self, tup, k):
        shifted, _ = shift_to_invertible(tup)
        sd = eigendecompose_clustered(shifted.matrices[0])
        blocks = extract_block_structure(shifted, sd)
        scales = [norm_scale(a) for a in shifted.matrices[1:]]
        return unify_layers(blocks, scales)

    def test_decomposable_three_cycle(self):
        tup, _ = gen_decomposable(3, 2, 2, seed=4)
        bs = self._structure(tup, 2)
        if all(p in bs.pairs for p in ((0, 1), (1, 2), (2, 0))):
            theta, resid = verify_cycle_identity(bs, (0, 1, 2))
            assert resid <= 1e-7

    def test_negative_cycle_far_from_scalar(self):
        tup, _ = gen_conjugate_negative(seed=1)
        bs = self._structure(tup, 2)
        theta, resid = verify_cycle_identity(bs, (0, 1, 2))
        assert resid >= 1.0
        assert resid == pytest.approx(2.0, abs=1e-9)

    def test_k1_cycles_trivially_scalar(self):
        tup, _ = gen_decomposable(3, 1, 2, seed=2)
        bs = self._structure(tup, 1)
        if all(p in bs.pairs for p in ((0, 1), (1, 2), (2, 0))):
            _, resid = verify_cycle_identity(bs, (0, 1, 2))
            assert resid <= 1e-10

    def test_missing_pair_raises(self):
        tup = HermitianTuple((diag(1, 1, 2, 2, 3, 3), diag(3, 3, 4, 4, 5, 5)))
        bs = self._structure(tup, 2)
        with pytest.raises(ZeroCoefficientOnCycle):
            verify_cycle_identity(bs, (0, 1, 2))
