"""
Pressure, dimension brackets and the kappa machinery.

Oracles: per-word brute force with numpy.linalg.svd, closed forms for
similitudes and diagonal systems.
"""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfaffine.errors import BudgetError, DomainError, PreconditionError, ShapeError
from selfaffine.gallery import build_rotation_shear
from selfaffine.maps import MatrixTuple
from selfaffine.pressure import (
    LevelSpectra,
    LogSumExp,
    affinity_dimension,
    kappa_estimate,
    kron_projected_bound,
    level_pressure,
    log_svf,
    pressure_at_one_lower,
    pressure_at_two_upper,
    projected_exponent,
    quasimult_check,
    svf,
)

from conftest import rotation


def brute_phi(m, s):
    sv = np.linalg.svd(m, compute_uv=False)
    d = len(sv)
    if s > d:
        return float(np.prod(sv) ** (s / d))
    k = int(math.floor(s))
    out = float(np.prod(sv[:k]))
    if s > k:
        out *= sv[k] ** (s - k)
    return out


def brute_level_sum(maps, n, s, Q=None):
    total = 0.0
    for w in itertools.product(range(len(maps)), repeat=n):
        p = np.eye(maps.shape[1])
        for i in w:
            p = p @ maps[i]
        total += brute_phi(p if Q is None else Q @ p, s)
    return math.log(total)


class TestSingularValueFunction:
    def test_closed_forms(self):
        m = np.diag([3.0, 2.0, 1.0])
        assert svf(m, 0) == 1.0
        assert svf(m, 1) == pytest.approx(3.0)
        assert svf(m, 1.5) == pytest.approx(3.0 * math.sqrt(2.0))
        assert svf(m, 3) == pytest.approx(6.0)
        assert svf(m, 4.5) == pytest.approx(6.0**1.5)

    def test_negative_s(self):
        with pytest.raises(DomainError):
            svf(np.eye(2), -0.5)

    def test_zero_singular_value_vanishes_only_when_used(self):
        m = np.diag([2.0, 0.0])
        assert svf(m, 1) == pytest.approx(2.0)
        assert svf(m, 1.5) == 0.0

    def test_log_form_matches(self, rng):
        m = rng.standard_normal((4, 4))
        lsv = np.log(np.linalg.svd(m, compute_uv=False))
        for s in (0.3, 1.0, 2.7, 4.0, 5.5):
            assert math.exp(log_svf(lsv, s)) == pytest.approx(brute_phi(m, s), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 3))
    def test_submultiplicative(self, seed, s):
        a, b = np.random.default_rng(seed).standard_normal((2, 3, 3))
        assert svf(a @ b, s) <= svf(a, s) * svf(b, s) * (1 + 1e-9)


class TestLogSumExp:
    def test_matches_reduce(self, rng):
        x = rng.standard_normal(1000) * 300
        acc = LogSumExp()
        for part in np.array_split(x, 7):
            acc.add(part)
        assert acc.value == pytest.approx(np.logaddexp.reduce(x), rel=1e-13)

    def test_merge_equals_sequential(self, rng):
        x = rng.standard_normal(500) * 50 - 800
        a, b = LogSumExp().add(x[:200]), LogSumExp().add(x[200:])
        assert a.merge(b).value == pytest.approx(LogSumExp().add(x).value, rel=1e-14)

    def test_no_underflow(self):
        assert LogSumExp().add([-2000.0, -2000.0]).value == pytest.approx(-2000.0 + math.log(2.0))

    def test_minus_infinity_terms(self):
        assert LogSumExp().value == -math.inf
        assert LogSumExp().add([-math.inf]).value == -math.inf
        acc = LogSumExp().add([-math.inf, 0.0])
        assert acc.merge(LogSumExp()).value == 0.0


class TestLevelPressureVsBruteForce:
    @pytest.fixture
    def maps(self, rng):
        return rng.standard_normal((3, 3, 3)) * 0.3

    @pytest.mark.parametrize("s", [0.0, 0.4, 1.0, 1.7, 2.5, 3.0, 3.8])
    def test_level_sums(self, maps, s):
        spectra = LevelSpectra(maps, 4)
        sums = spectra.log_sums(s)
        for m in range(1, 5):
            assert sums[m - 1] == pytest.approx(brute_level_sum(maps, m, s), rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("s", [0.5, 1.0, 1.5, 2.0])
    def test_with_rank_two_q(self, maps, s):
        q = np.diag([1.0, 1.0, 0.0]) @ np.array([[1, 0.5, 0], [0, 1, 0.2], [0.1, 0, 1]])
        est = level_pressure(maps, s, 3, Q=q)
        assert est.value == pytest.approx(brute_level_sum(maps, 3, s, q) / 3, rel=1e-9)

    def test_above_rank_q_is_zero_sum(self, maps):
        est = level_pressure(maps, 2.5, 3, Q=np.diag([1.0, 1.0, 0.0]))
        assert est.value == -math.inf

    def test_envelope_is_min_of_levels(self, maps):
        est = level_pressure(maps, 1.3, 5)
        assert est.envelope == min(est.level_values)
        assert est.value == est.level_values[-1]

    @pytest.mark.parametrize("shards", [2, 3, 7, 40])
    def test_shard_count_does_not_change_values(self, maps, shards):
        ref = LevelSpectra(maps, 5).log_sums(1.2)
        np.testing.assert_allclose(LevelSpectra(maps, 5, shards=shards).log_sums(1.2), ref, rtol=1e-13)

    def test_threads_bitwise_equal_to_serial(self, maps):
        a = LevelSpectra(maps, 5, shards=4).log_sums(0.9)
        b = LevelSpectra(maps, 5, shards=4, workers=4).log_sums(0.9)
        assert a.tobytes() == b.tobytes()

    def test_smallest_singular_value_fixup(self):
        # strongly non-conformal products: sigma_2 from the iteration would lose digits
        maps = np.array([np.diag([0.9, 1e-3]), np.diag([0.8, 2e-3])])
        lsv = LevelSpectra(maps, 6).spectra[0][5]
        exact = np.log(np.array([[0.9**a * 0.8 ** (6 - a), 1e-3**a * 2e-3 ** (6 - a)] for a in range(6, -1, -1)]))
        got = np.sort(lsv[:, 1])
        assert np.allclose(np.sort(np.unique(np.round(got, 10))), np.sort(exact[:, 1]), rtol=1e-12)

    def test_budget(self, maps):
        with pytest.raises(BudgetError):
            LevelSpectra(maps, 10, budget=1000)

    def test_bad_q_shape(self, maps):
        with pytest.raises(ShapeError):
            LevelSpectra(maps, 2, Q=np.eye(2))


class TestAffinityDimension:
    def test_similitudes(self):
        maps = np.array([np.eye(2) / 3] * 4)
        br = affinity_dimension(maps, 6)
        assert br.lower <= math.log(4) / math.log(3) <= br.upper
        assert br.upper - br.lower <= 1e-4 and br.certified

    def test_rotating_similitudes(self):
        maps = np.array([rotation(0.3, 0.4), rotation(-1.1, 0.4), rotation(2.0, 0.4)])
        br = affinity_dimension(maps, 5)
        assert br.upper == pytest.approx(math.log(3) / math.log(2.5), abs=2e-4)

    def test_diagonal_above_one(self):
        br = affinity_dimension(np.array([np.diag([0.5, 0.25])] * 3), 8)
        assert br.upper == pytest.approx(1 + math.log(1.5) / math.log(4), abs=1e-3)

    def test_envelope_signs_at_ends(self):
        br = affinity_dimension(np.array([np.diag([0.5, 0.25])] * 3), 6)
        assert br.envelope_lower > 0 >= br.envelope_upper

    def test_upper_bound_decreases_with_level(self):
        maps = np.array([[[0.5, 0.2], [0.0, 0.3]], [[0.3, 0.0], [0.2, 0.5]]])
        ups = [affinity_dimension(maps, n, 1e-6).upper for n in (2, 4, 8)]
        assert ups[0] >= ups[1] >= ups[2]

    def test_preconditions(self):
        with pytest.raises(PreconditionError, match="map 1"):
            affinity_dimension(np.array([np.eye(2) * 1.5, np.eye(2) / 2]), 3)
        with pytest.raises(DomainError):
            affinity_dimension(np.array([np.eye(2) / 2] * 2), 3, tol=1e-8)

    def test_positive_envelope_at_dimension(self):
        # contracting but too many maps to have dimension <= d
        with pytest.raises(PreconditionError):
            affinity_dimension(np.array([np.eye(2) * 0.9] * 30), 1)


class TestProjectedExponent:
    def test_identity_q(self):
        maps = np.array([[[0.5, 0.2], [0.0, 0.3]], [[0.3, 0.0], [0.2, 0.5]]])
        pb = projected_exponent(maps, np.eye(2), 6)
        assert pb.empirical.upper == pb.affinity.upper
        assert not pb.empirical.certified
        assert pb.crude_bound == min(pb.affinity.upper, 2.0)

    def test_kronecker_factorisation(self):
        # the I (x) P image of the rotation system sees only the shear factor
        inst = build_rotation_shear(1.0)
        shear, _ = inst.factor_tuples
        pb = projected_exponent(inst.maps, inst.projection_i_p, 10)
        assert pb.empirical.upper == pytest.approx(affinity_dimension(shear, 10).upper, abs=1e-4)
        assert pb.rank == 2


class TestKappa:
    def test_similitude_closed_form(self):
        maps = np.array([rotation(0.4, 0.5), rotation(1.3, 0.25)])
        est = kappa_estimate(maps, np.eye(2), 1, samples=20, seed=1)
        assert est.kappa_hat == pytest.approx(0.5, rel=1e-12)

    def test_positive_and_reproducible(self):
        maps = np.array([[[0.5, 0.2], [0.0, 0.3]], [[0.3, 0.0], [0.2, 0.5]]])
        a = kappa_estimate(maps, np.eye(2), 1, samples=32, seed=7)
        b = kappa_estimate(maps, np.eye(2), 1, samples=32, seed=7)
        assert a.kappa_hat > 0 and a.kappa_hat == b.kappa_hat
        np.testing.assert_array_equal(a.witness_projection, b.witness_projection)
        assert np.linalg.matrix_rank(a.witness_projection) == 1

    def test_reducible_tuple_has_zero_kappa(self):
        # both maps preserve the x-axis; projecting onto the y-axis kills it
        maps = np.array([[[0.5, 0.1], [0.0, 0.3]], [[0.4, 0.2], [0.0, 0.2]]])
        est = kappa_estimate(maps, np.diag([0.0, 1.0]), 1, samples=200, seed=3)
        assert est.kappa_hat < 0.05

    def test_k_above_rank(self):
        with pytest.raises(DomainError):
            kappa_estimate(np.array([np.eye(2) / 2] * 2), np.diag([1.0, 0.0]), 2, 4, 0)

    def test_quasimult_similitudes_exact(self):
        maps = np.array([rotation(0.4, 0.5), rotation(1.3, 0.5)])
        rep = quasimult_check(maps, np.eye(2), 1, 1.0, trials=50, seed=2)
        assert rep.min_ratio == pytest.approx(0.5, rel=1e-9) and rep.passed

    def test_quasimult_domain(self):
        with pytest.raises(DomainError):
            quasimult_check(np.array([np.eye(2) / 2] * 2), np.eye(2), 1, 1.5, 10, 0)


class TestKroneckerAndPlanarBounds:
    def test_bound_is_scaled_factor_dimension(self, kron_example):
        p = np.array([[1.0, 0.0], [0.0, 0.0]])
        kb = kron_projected_bound(kron_example.base_a, kron_example.base_b, p, 6)
        scaled = kron_example.base_a.scaled(kb.norm_b)
        assert kb.value == affinity_dimension(scaled, 6).upper

    def test_independent_of_p(self, kron_example):
        values = set()
        for angle in np.linspace(0, np.pi, 5):
            u = np.array([np.cos(angle), np.sin(angle)])
            values.add(kron_projected_bound(kron_example.base_a, kron_example.base_b, np.outer(u, u), 5).value)
        assert len(values) == 1

    def test_rank_of_p(self, kron_example):
        with pytest.raises(DomainError):
            kron_projected_bound(kron_example.base_a, kron_example.base_b, np.eye(2), 4)

    def test_planar_bounds_closed_form(self, kron_example):
        a = kron_example.base_a.maps
        sv = np.linalg.svd(a, compute_uv=False)
        assert pressure_at_one_lower(a) == pytest.approx(math.log(sv[:, 1].sum()), rel=1e-13)
        assert pressure_at_two_upper(a) == pytest.approx(math.log((sv[:, 0] ** 2).sum()), rel=1e-13)

    def test_planar_bounds_bracket_envelopes(self, kron_example):
        a = kron_example.base_a
        assert level_pressure(a, 1.0, 6).envelope >= pressure_at_one_lower(a)
        kron_i = MatrixTuple(np.array([np.kron(m, np.eye(2)) for m in a.maps]))
        assert level_pressure(kron_i, 2.0, 6).envelope <= pressure_at_two_upper(a) + 1e-12

    def test_planar_only(self):
        with pytest.raises(ShapeError):
            pressure_at_one_lower(np.array([np.eye(3) / 2] * 2))
