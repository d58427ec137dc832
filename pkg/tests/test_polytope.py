import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_words, enumerate_vertices
from rwlp.code_model import Code, generate_regular_ldpc, random_small_code
from rwlp.decoders import OutcomeKind, bsc_lp_decode
from rwlp.errors import ParameterError, TooLargeError
from rwlp.polytope import (LinearConstraintSystem, build_feldman_polytope, build_fundamental_cone,
                           normalized_cone)


def small_codes(max_n=10):
    return st.builds(
        lambda n, m, seed: random_small_code(np.random.default_rng(seed), n, m, max_row_deg=5),
        st.integers(3, max_n), st.integers(1, 5), st.integers(0, 2**32 - 1),
    )


class TestFeldman:
    def test_single_check_constraints(self):
        system = build_feldman_polytope(Code(3, ((0, 1, 2),)))
        assert system.A_ub.shape == (4, 3)
        assert (system.lower == 0).all() and (system.upper == 1).all()

    def test_single_check_vertices_are_even_words(self):
        system = build_feldman_polytope(Code(3, ((0, 1, 2),)))
        verts = {tuple(v) for v in enumerate_vertices(system, exact=True)}
        assert verts == {(0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)}

    def test_row_count_for_ldpc_3_4(self):
        code = generate_regular_ldpc(1000, 3, 4, seed=1)
        assert build_feldman_polytope(code).A_ub.shape[0] == 8 * 750

    @settings(max_examples=40, deadline=None)
    @given(small_codes())
    def test_binary_members_are_codewords(self, code):
        system = build_feldman_polytope(code)
        words = all_words(code.n)
        inside = np.array([system.contains(w) for w in words])
        is_cw = ~((words @ code.H.T.astype(np.int64)) % 2).any(axis=1)
        assert (inside == is_cw).all()

    def test_refuses_huge_check(self):
        with pytest.raises(TooLargeError):
            build_feldman_polytope(Code(25, (tuple(range(25)),)))

    def test_lp_text_export(self):
        text = build_feldman_polytope(Code(3, ((0, 1, 2),))).to_lp_text(objective=[1, 0, -1])
        assert text.startswith("\\ system\nMinimize")
        assert text.count(" <= ") >= 4 + 3
        assert text.rstrip().endswith("End")

    def test_canonical_order(self):
        code = generate_regular_ldpc(12, 3, 4, 2)
        a = build_feldman_polytope(code)
        build_feldman_polytope.cache_clear()
        b = build_feldman_polytope(code)
        assert (a.A_ub != b.A_ub).nnz == 0 and (a.b_ub == b.b_ub).all()


class TestCone:
    def test_two_variable_case(self):
        cone = build_fundamental_cone(Code(2, ((0, 1),)))
        assert cone.contains([0.3, 0.3])
        assert not cone.contains([0.3, 0.4])
        assert not cone.contains([-1, -1])

    @settings(max_examples=40, deadline=None)
    @given(small_codes(12))
    def test_all_ones_inside(self, code):
        assert build_fundamental_cone(code).contains(np.ones(code.n))

    @pytest.mark.parametrize("seed", range(8))
    def test_polytope_vertices_inside_cone(self, seed):
        code = random_small_code(np.random.default_rng(seed), 6, 3, max_row_deg=4)
        cone = build_fundamental_cone(code)
        for v in enumerate_vertices(build_feldman_polytope(code), exact=True):
            v = np.array([float(t) for t in v])
            assert cone.contains(v, tol=1e-9)
            assert cone.contains(2 * v, tol=1e-9)

    def test_pseudocodewords_inside_cone(self):
        code = generate_regular_ldpc(20, 3, 4, 4)
        cone = build_fundamental_cone(code)
        rng = np.random.default_rng(1)
        seen = 0
        for _ in range(200):
            r = (rng.random(20) < 0.15).astype(np.int8)
            out = bsc_lp_decode(code, r)
            if out.kind is OutcomeKind.FRACTIONAL:
                seen += 1
                assert cone.contains(out.point)
        assert seen > 0

    def test_normalized_cone_equality(self):
        sys_ = normalized_cone(Code(3, ((0, 1, 2),)), support=[0, 2])
        assert sys_.A_eq.shape == (1, 3)
        assert sys_.contains([0.5, 1.0, 0.5])


class TestSystem:
    def test_from_constraints_relations(self):
        s = LinearConstraintSystem.from_constraints(
            2, [({0: 1, 1: 1}, "<=", 1), ({0: 1}, ">=", 0.25), ({1: 1}, "=", 0.5)], 0, 1)
        assert s.contains([0.5, 0.5])
        assert not s.contains([0.2, 0.5])
        assert s.violation([0.2, 0.5]) == pytest.approx(0.05)

    def test_empty_support_rejected(self):
        with pytest.raises(ParameterError):
            LinearConstraintSystem.from_constraints(2, [({0: 0}, "<=", 1)], 0, 1)

    def test_index_out_of_range(self):
        with pytest.raises(ParameterError):
            LinearConstraintSystem.from_constraints(2, [({2: 1}, "<=", 1)], 0, 1)

    def test_with_fixed(self):
        s = build_feldman_polytope(Code(3, ((0, 1, 2),))).with_fixed({0: 1.0})
        assert s.lower[0] == s.upper[0] == 1.0
        assert build_feldman_polytope(Code(3, ((0, 1, 2),))).lower[0] == 0.0
