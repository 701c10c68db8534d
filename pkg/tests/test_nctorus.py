import numpy as np
import pytest
from numpy.testing import assert_allclose

from cqms_lipnorms import AXIOM_TOL, QuotientLip, validate_lipnorm
from cqms_matrix import operator_norm
from cqms_nctorus import (
    FourierPolynomial,
    LengthFn,
    TorusSpec,
    afn_upper,
    cesaro_by_partial_sums,
    cesaro_mean,
    cesaro_quotient,
    clock_shift_algebra,
    fejer_bound,
    fejer_inequality_check,
    fejer_kernel,
    fejer_kernel_series,
    fourier_coeff,
    lattice_fejer_bound,
    lattice_multiplier,
    rcp_upper,
    torus_action,
    torus_lipnorm,
    total_boundedness_report,
    uniformity_probe,
)
from cqms_types import InputError


class TestModels:
    def test_clock_and_shift_satisfy_the_relations(self):
        spec = clock_shift_algebra(2, 5, 2)
        assert max(spec.relation_defects().values()) <= 1e-10
        assert spec.model == "minimal"
        assert spec.size == 5
        assert spec.block_sizes == [5]

    def test_non_coprime_phase_uses_the_full_model(self):
        spec = clock_shift_algebra(2, 4, 2)
        assert spec.model == "full"
        assert spec.size == 16
        assert spec.center_dim == 4
        assert spec.block_sizes == [2, 2, 2, 2]
        assert spec.rank == 8

    def test_three_dimensional_torus(self):
        p = [[0, 1, 1], [-1, 0, 1], [-1, -1, 0]]
        spec = clock_shift_algebra(3, 3, p)
        assert max(spec.relation_defects().values()) <= 1e-10

    def test_rational_phases_are_recovered(self):
        spec = TorusSpec.from_phases(0.4)
        assert (spec.q, int(spec.p[0, 1])) == (5, 2)
        with pytest.raises(InputError):
            TorusSpec.from_phases(np.sqrt(2) / 10)

    def test_gauge_unitaries_implement_the_lattice_action(self):
        spec = clock_shift_algebra(2, 5, 1)
        v = spec.gauge_unitary((1, 2))
        for g, s in zip(spec.generators, (1, 2)):
            assert operator_norm(v @ g @ v.conj().T - spec.omega ** s * g) <= 1e-10

    def test_coefficients_are_read_with_the_trace(self):
        spec = clock_shift_algebra(2, 5, 1)
        a = 2.0 * spec.monomial((1, 2)) + 0.5j * spec.monomial((0, -1))
        assert fourier_coeff(a, (1, 2), spec) == pytest.approx(2.0, abs=1e-12)
        assert fourier_coeff(a, (0, -1), spec) == pytest.approx(0.5j, abs=1e-12)
        assert fourier_coeff(a, (1, 0), spec) == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(InputError):
            fourier_coeff(a, (5, 0), spec)
        with pytest.raises(InputError):
            fourier_coeff(a, (1, 2))

    def test_gauge_action_on_polynomials_and_matrices(self):
        spec = clock_shift_algebra(2, 5, 1)
        u1 = spec.monomial((1, 0))
        lattice = torus_action(spec, (0.2, 0.0), u1)
        assert operator_norm(lattice - spec.omega * u1) <= 1e-10
        phase = np.exp(2j * np.pi * 0.3)
        off_lattice = torus_action(spec, (0.3, 0.1), u1)
        assert operator_norm(off_lattice - phase * u1) <= 1e-9
        poly = torus_action(spec, (0.3, 0.1), FourierPolynomial.monomial(2, (1, 0)))
        assert poly.coefficient((1, 0)) == pytest.approx(phase, abs=1e-12)
        with pytest.raises(InputError):
            torus_action(spec, (0.3,), u1)

    def test_polynomials_alias_past_the_model_size(self):
        spec = clock_shift_algebra(2, 3, 1)
        with pytest.raises(InputError):
            FourierPolynomial.monomial(2, (3, 0)).to_matrix(spec)


class TestFejer:
    def test_kernel_closed_form_matches_the_series(self):
        t = np.linspace(0.0, 1.0, 501)
        for n in range(6):
            assert_allclose(fejer_kernel(n, t), fejer_kernel_series(n, t), atol=1e-10)
        assert fejer_kernel(3, 0.0) == pytest.approx(4.0)

    def test_kernel_has_unit_mass(self):
        t = np.arange(1000) / 1000
        assert np.mean(fejer_kernel(4, t)) == pytest.approx(1.0, abs=1e-10)

    def test_multiplier_and_partial_sums_agree(self, rng):
        a = FourierPolynomial.random(2, 3, rng)
        for n in range(4):
            diff = cesaro_mean(a, n) - cesaro_by_partial_sums(a, n)
            assert max((abs(c) for c in diff.coefficients.values()), default=0.0) <= 1e-12
        assert cesaro_mean(FourierPolynomial.monomial(2, (1, 0)), 1).coefficient((1, 0)) == pytest.approx(0.5)

    def test_lattice_mean_matches_the_multiplier_without_aliasing(self):
        spec = clock_shift_algebra(2, 7, 3)
        u = spec.monomial((1, -1))
        assert_allclose(cesaro_mean(u, 2, spec), (2.0 / 3.0) ** 2 * u, atol=1e-12)
        assert lattice_multiplier(spec, 2, (1, -1)) == pytest.approx(4.0 / 9.0)
        assert_allclose(cesaro_mean(np.eye(spec.size), 2, spec), np.eye(spec.size), atol=1e-12)

    def test_bound_decreases_with_the_degree(self):
        ell = LengthFn.euclidean(2)
        bounds = [fejer_bound(n, ell, 2) for n in (1, 4, 16)]
        assert bounds[0].value > bounds[1].value > bounds[2].value > 0.0
        assert all(b.error_estimate < 1e-3 for b in bounds)

    def test_degree_zero_lattice_bound_is_the_mean_length(self):
        ell = LengthFn.sup_norm(2)
        grid = np.array([(a, b) for a in range(5) for b in range(5)], dtype=float) / 5
        assert lattice_fejer_bound(5, 2, 0, ell) == pytest.approx(float(np.mean(ell(grid))))

    def test_inequality_holds_on_random_polynomials(self):
        report = fejer_inequality_check(clock_shift_algebra(2, 8, 1), [1, 2], samples=5, seed=3)
        assert report.passed, report.message

    def test_length_functions(self):
        assert LengthFn.euclidean(2).check_axioms(samples=64).passed
        assert LengthFn.sup_norm(3).check_axioms(samples=64).passed
        with pytest.raises(InputError):
            LengthFn.by_name("taxicab", 2)


class TestCertificates:
    @pytest.fixture(scope="class")
    def lip5(self):
        return torus_lipnorm(clock_shift_algebra(2, 5, 1))

    def test_defect_is_the_lattice_bound(self, lip5):
        assert lip5.fejer_defect(2) == pytest.approx(lattice_fejer_bound(5, 2, 2, lip5.ell))

    def test_quotient_keeps_the_surviving_monomials(self, lip5):
        phi, lip_y = cesaro_quotient(lip5, 1)
        assert lip_y.system.dim == 9
        assert operator_norm(phi.unit_image - np.eye(5)) <= 1e-12

    def test_large_eps_needs_only_the_trace(self, lip5):
        certificate = rcp_upper(lip5, 10.0, net_size=4, seed=0)
        assert certificate.success
        assert (certificate.n, certificate.rank, certificate.block_sizes) == (0, 1, [1])
        assert certificate.range_dim == 1

    def test_tiny_eps_needs_the_whole_model(self, lip5):
        certificate = rcp_upper(lip5, 1e-6, verify=False)
        assert certificate.success
        assert (certificate.n, certificate.rank) == (4, 5)
        assert certificate.range_dim == 25
        assert certificate.defect < 1e-6

    def test_afn_rank_matches_its_certificate(self, lip5):
        eps = lip5.fejer_defect(2) + 0.05
        afn = afn_upper(lip5, eps, net_size=4, seed=1)
        assert afn.certificate.success
        assert afn.rank == afn.certificate.rank
        assert afn.certificate.defect < eps
        assert afn.system.dim == afn.certificate.range_dim

    def test_quotient_lipnorm_passes_its_axiom_checks(self, lip5):
        afn = afn_upper(lip5, lip5.fejer_defect(2) + 0.05, net_size=4, seed=1)
        assert afn.lip_y.evaluation_tol > AXIOM_TOL
        assert isinstance(afn.lip_y, QuotientLip)
        report = validate_lipnorm(afn.lip_y, samples=8, seed=1)
        assert report.passed, report.message

    def test_total_boundedness_rows(self):
        family = [torus_lipnorm(clock_shift_algebra(2, q, 1)) for q in (3, 4)]
        rows = total_boundedness_report(family, [10.0, 1e-6])
        assert rows[0]["all_reached"] and rows[0]["max_afn_upper"] == 1
        assert rows[1]["all_reached"] and rows[1]["max_afn_upper"] == 4

    def test_certified_defect_does_not_depend_on_the_phase(self):
        rows = uniformity_probe(4, 1, net_size=2, seed=0)
        assert [(row["q"], row["p"]) for row in rows] == [(2, 1), (3, 1), (3, 2), (4, 1), (4, 3)]
        for row in rows:
            assert row["relative_spread"] <= 1e-12
            assert row["sampled_defect"] <= row["certified_defect"] + 1e-6
