import itertools
from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdnet.inequalities import bilocal_I, bilocal_J, s_n
from mdnet.lhv import (
    MDLhvModel,
    context_informed_model,
    context_informed_value,
    lhv_behavior,
    md_degree,
    md_degree_single_flip,
    md_report,
    paper_bilocal_model,
    paper_star_model,
    table_literal_behavior,
)
from mdnet.scenario import no_signaling_check, validate_behavior

P_GRID = [0.0, 0.25, 0.5, 0.75, 1.0]


def random_independent_model(n, sizes, seed):
    """Measurement-independent model with random tables and laws."""
    rng = np.random.default_rng(seed)
    responses = [rng.choice([-1.0, 1.0], size=(2, s)) for s in sizes]
    dists = []
    for s in sizes:
        w = rng.random(s)
        dists.append(np.broadcast_to(w / w.sum(), (2,) * n + (s,)).copy())
    central = rng.random(tuple(sizes) + (2**n,))
    central /= central.sum(axis=-1, keepdims=True)
    return MDLhvModel(n, tuple(sizes), responses, central, dists)


def branch_dependent_model(seed):
    """Source 1 looks at Alice's input only; everything else is random."""
    rng = np.random.default_rng(seed)
    m = random_independent_model(2, (2, 2), seed)
    rho = np.zeros((2, 2, 2))
    for x in (0, 1):
        q = rng.random()
        rho[x, :, :] = [1 - q, q]
    m.distributions[0] = rho
    m.dependence_pattern = [(0,), ()]
    m.validate()
    return m


class TestModelValidation:
    def test_unnormalized_rejected(self):
        m = random_independent_model(2, (2, 2), 0)
        m.distributions[0] = m.distributions[0] * 1.1
        with pytest.raises(ValueError):
            m.validate()

    def test_declared_independence_enforced(self):
        with pytest.raises(ValueError):
            m = random_independent_model(2, (2, 2), 0)
            m.distributions[0][1, 0] = [1.0, 0.0]
            m.validate()

    def test_empty_alphabet_rejected(self):
        with pytest.raises(ValueError):
            random_independent_model(2, (0, 2), 0)

    def test_json_round_trip(self):
        m = paper_star_model(0.3)
        back = MDLhvModel.from_json(m.to_json())
        np.testing.assert_allclose(lhv_behavior(back).probabilities, lhv_behavior(m).probabilities)


class TestBehavior:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_independent_models_are_local(self, seed):
        t = lhv_behavior(random_independent_model(2, (2, 2), seed))
        assert validate_behavior(t).passed
        assert no_signaling_check(t, 1e-12).passed
        assert s_n(t).aggregate_S <= 1 + 1e-9

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_three_source_independent_models(self, seed):
        t = lhv_behavior(random_independent_model(3, (2, 2, 2), seed))
        assert no_signaling_check(t, 1e-12).passed
        assert s_n(t).aggregate_S <= 2 + 1e-9

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_branch_dependence_without_central_coupling_is_no_signaling(self, seed):
        # Dependence on Alice's own input only, central rule blind to lambda_1.
        m = branch_dependent_model(seed)
        m.central_rule[:] = m.central_rule[0:1]
        t = lhv_behavior(m)
        assert validate_behavior(t).passed
        assert no_signaling_check(t, 1e-12).passed

    def test_single_hidden_value_is_deterministic_product(self):
        m = MDLhvModel(
            2,
            (1, 1),
            [np.array([[1.0], [-1.0]]), np.array([[-1.0], [-1.0]])],
            np.array([[[0, 0, 1.0, 0]]]),
            [np.ones((2, 2, 1)), np.ones((2, 2, 1))],
        )
        p = lhv_behavior(m).probabilities
        for x, z in itertools.product((0, 1), repeat=2):
            a_idx = 0 if x == 0 else 1
            assert p[x, z, a_idx, 1, 2] == 1.0
            assert p[x, z].sum() == 1.0


class TestDependence:
    def test_independent_is_zero(self):
        m = random_independent_model(2, (2, 2), 4)
        assert md_degree(m, 1) == 0.0
        assert md_degree(m, 2) == 0.0

    def test_point_masses_give_two(self):
        m = random_independent_model(2, (2, 2), 4)
        m.distributions[0] = np.zeros((2, 2, 2))
        m.distributions[0][0, :, 0] = 1
        m.distributions[0][1, :, 1] = 1
        m.dependence_pattern = [(0,), ()]
        assert md_degree(m, 1) == 2.0
        assert md_degree_single_flip(m, 1) == 2.0

    def test_any_pair_catches_dependence_on_other_inputs(self):
        # lambda_1 copies Charlie's input: flipping x alone never moves it.
        m = random_independent_model(2, (2, 2), 4)
        rho = np.zeros((2, 2, 2))
        for x, z in itertools.product((0, 1), repeat=2):
            rho[x, z, z] = 1.0
        m.distributions[0] = rho
        m.dependence_pattern = [(0, 1), ()]
        assert md_degree_single_flip(m, 1) == 0.0
        assert md_degree(m, 1) == 2.0

    def test_report_fraction(self):
        rep = md_report(paper_bilocal_model(0.3))
        assert rep.M[0] == pytest.approx(0.6, abs=1e-15)
        assert rep.F[0] == pytest.approx(0.7, abs=1e-15)
        assert all(f == 1 - m / 2 for f, m in zip(rep.F, rep.M))


class TestBilocalModel:
    @pytest.mark.parametrize("p", P_GRID)
    def test_contract_values(self, p):
        m = paper_bilocal_model(p)
        t = lhv_behavior(m)
        assert bilocal_I(t) == pytest.approx(1.0, abs=1e-12)
        assert bilocal_J(t) == pytest.approx(p, abs=1e-12)
        assert s_n(t).aggregate_S == pytest.approx(1 + sqrt(p), abs=1e-9)
        assert md_degree(m, 1) == pytest.approx(2 * p, abs=1e-15)
        assert md_degree(m, 2) == 0.0

    @pytest.mark.parametrize("a,b", [(1, 1), (1, -1), (-1, 1), (-1, -1)])
    def test_table_constants(self, a, b):
        t = lhv_behavior(paper_bilocal_model(0.5, a, b))
        assert s_n(t).aggregate_S == pytest.approx(1 + sqrt(0.5), abs=1e-12)

    def test_quantum_point(self):
        t = lhv_behavior(paper_bilocal_model((sqrt(2) - 1) ** 2))
        assert s_n(t).aggregate_S == pytest.approx(sqrt(2), abs=1e-9)

    def test_signal_equals_p(self):
        # Consequence of I + J <= 1 for no-signaling boxes with an input-free centre.
        for p in (0.1, 0.5):
            rep = no_signaling_check(lhv_behavior(paper_bilocal_model(p)))
            assert rep.max_marginal_discrepancy == pytest.approx(p, abs=1e-12)

    def test_range(self):
        with pytest.raises(ValueError):
            paper_bilocal_model(1.5)
        with pytest.raises(ValueError):
            paper_bilocal_model(0.5, a=2)


class TestStarModels:
    @pytest.mark.parametrize("p", P_GRID)
    def test_closed_form_value(self, p):
        m = paper_star_model(p)
        t = lhv_behavior(m)
        t_anti = m.distributions[1][(0, 0, 0)][1], m.distributions[2][(0, 0, 0)][1]
        assert validate_behavior(t).passed
        assert md_degree(m, 1) == pytest.approx(2 * p, abs=1e-12)
        assert md_degree(m, 2) == 0.0 and md_degree(m, 3) == 0.0
        anti = [m.distributions[0][(0, 0, 0)][1] / (1 - p) if p < 1 else 0.0, *t_anti]
        if p < 1:
            assert s_n(t).aggregate_S == pytest.approx(context_informed_value(3, p, anti), abs=1e-12)

    def test_end_points(self):
        assert s_n(lhv_behavior(paper_star_model(0.0))).aggregate_S == pytest.approx(2.0, abs=1e-9)
        assert s_n(lhv_behavior(paper_star_model(1.0))).aggregate_S == pytest.approx(4.0, abs=1e-9)

    def test_two_source_version_matches_parity_model(self):
        for p in (0.2, 0.7):
            t = lhv_behavior(context_informed_model(2, p))
            assert s_n(t).aggregate_S == pytest.approx(1 + sqrt(p), abs=1e-9)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_every_component_reaches_one_at_full_leak(self, n):
        t = lhv_behavior(context_informed_model(n, 1.0, anti=[0.5] * n))
        rep = s_n(t)
        np.testing.assert_allclose(np.abs(rep.components), 1.0, atol=1e-12)


class TestLiteralTables:
    def test_bilocal_literal_misses_contract(self):
        t = table_literal_behavior("bilocal", 0.5)
        assert validate_behavior(t).passed
        assert (bilocal_I(t), bilocal_J(t)) != pytest.approx((1.0, 0.5))
        assert not no_signaling_check(t).passed

    def test_star_literal_misses_contract(self):
        t = table_literal_behavior("star", 0.5)
        assert validate_behavior(t).passed
        assert s_n(t).aggregate_S < 2 + 2 * 0.5 ** (1 / 3)

    def test_fallback_is_logged(self, caplog):
        with caplog.at_level("INFO", logger="mdnet.lhv"):
            paper_bilocal_model(0.2)
            paper_star_model(0.2)
        text = caplog.text
        assert "bilocal selector table" in text and "star selector table" in text
