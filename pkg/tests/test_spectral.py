import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgle_feedback.spectral import (
    Field,
    ModalCoeffs,
    build_domain,
    compute_norms,
    eigen_system,
    from_modal,
    h1_seminorm_sq,
    l2_sq,
    laplacian_apply,
    to_modal,
)

from conftest import band_limited


def direct_coefficients(domain, values, K):
    """Quadrature inner products with explicitly evaluated sines/cosines (no FFT)."""
    (L,) = domain.lengths
    x = domain.axes[0]
    w = domain.weights
    out = []
    for k in range(1, K + 1):
        if domain.bc == "dirichlet":
            phi = np.sqrt(2 / L) * np.sin(k * np.pi * x / L)
        elif k == 1:
            phi = np.full_like(x, 1 / np.sqrt(L))
        else:
            phi = np.sqrt(2 / L) * np.cos((k - 1) * np.pi * x / L)
        out.append(np.sum(w * values * phi))
    return np.array(out)


class TestBuildDomain:
    def test_dirichlet_interior_grid(self):
        d = build_domain("interval", 1.0, 64, "dirichlet")
        assert d.shape == (64,)
        assert d.spacing[0] == pytest.approx(1 / 65)
        np.testing.assert_allclose(d.axes[0], np.arange(1, 65) / 65)

    def test_neumann_includes_endpoints(self):
        d = build_domain("interval", np.pi, 32, "neumann")
        x = d.axes[0]
        assert len(x) == 32
        assert x[0] == 0.0
        assert x[-1] == pytest.approx(np.pi)

    def test_neumann_rectangle_rejected(self):
        with pytest.raises(ValueError, match="Neumann"):
            build_domain("rectangle", (np.pi, np.pi), 32, "neumann")

    @pytest.mark.parametrize("L", [0.0, -1.0])
    def test_nonpositive_length(self, L):
        with pytest.raises(ValueError):
            build_domain("interval", L, 32)

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            build_domain("interval", 1.0, 8)


class TestEigenSystem:
    def test_dirichlet_interval(self):
        e = eigen_system(build_domain("interval", np.pi, 32), 3)
        np.testing.assert_allclose(e.eigenvalues, [1, 4, 9])

    def test_neumann_interval(self):
        e = eigen_system(build_domain("interval", 1.0, 32, "neumann"), 3)
        np.testing.assert_allclose(e.eigenvalues, [0, np.pi**2, 4 * np.pi**2])

    def test_rectangle_tie_break(self):
        e = eigen_system(build_domain("rectangle", (np.pi, np.pi), 32), 3)
        np.testing.assert_allclose(e.eigenvalues, [2, 5, 5])
        assert e.modes == ((1, 1), (1, 2), (2, 1))

    def test_count_exceeds_resolution(self):
        d = build_domain("interval", 1.0, 16)
        with pytest.raises(ValueError):
            eigen_system(d, 17)
        with pytest.raises(ValueError):
            eigen_system(build_domain("interval", 1.0, 16, "neumann"), 16)

    @pytest.mark.parametrize("domain", [
        build_domain("interval", np.pi, 63),
        build_domain("interval", 2.5, 65, "neumann"),
        build_domain("rectangle", (1.0, 2.0), 16),
    ])
    def test_gram_matrix_is_identity(self, domain):
        e = eigen_system(domain, domain.max_index ** domain.ndim)
        np.testing.assert_allclose(e.gram_matrix(), np.eye(len(e)), atol=1e-10)

    def test_monotone_and_divergent(self):
        for d in (build_domain("interval", 2.0, 63), build_domain("rectangle", (1.0, 3.0), 20)):
            lam = eigen_system(d, d.max_index ** d.ndim).eigenvalues
            assert np.all(np.diff(lam) >= 0)
            assert lam[-1] > 100 * max(lam[0], 1.0)


class TestTransforms:
    def test_eigenfunction_has_unit_coefficient(self, pi_dirichlet):
        e = eigen_system(pi_dirichlet, 5)
        c = to_modal(Field(pi_dirichlet, e.eigenfunction(1)), 5).coeffs
        np.testing.assert_allclose(c, [0, 1, 0, 0, 0], atol=1e-10)

    @pytest.mark.parametrize("bc,M", [("dirichlet", 63), ("neumann", 65)])
    def test_matches_direct_quadrature(self, bc, M, rng):
        d = build_domain("interval", 1.7, M, bc)
        f = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        K = 20
        np.testing.assert_allclose(to_modal(Field(d, f), K).coeffs, direct_coefficients(d, f, K), atol=1e-12)

    def test_round_trip_band_limited(self, pi_dirichlet, unit_neumann, rng):
        for d in (pi_dirichlet, unit_neumann):
            f = band_limited(d, rng, 10)
            back = from_modal(to_modal(f, 10))
            np.testing.assert_allclose(back.values, f.values, atol=1e-10)

    def test_zero_field(self, pi_dirichlet):
        assert np.all(to_modal(Field.zeros(pi_dirichlet), 8).coeffs == 0)

    def test_k_out_of_range(self, pi_dirichlet):
        with pytest.raises(ValueError):
            to_modal(Field.zeros(pi_dirichlet), 64)

    def test_rectangle_round_trip(self, rng):
        d = build_domain("rectangle", (np.pi, 2.0), 24)
        f = band_limited(d, rng, 30)
        np.testing.assert_allclose(from_modal(to_modal(f, 30)).values, f.values, atol=1e-10)


class TestLaplacian:
    def test_first_eigenfunction(self, pi_dirichlet):
        w1 = eigen_system(pi_dirichlet, 1).eigenfunction(0)
        np.testing.assert_allclose(laplacian_apply(Field(pi_dirichlet, w1)).values, -w1, atol=1e-12)

    def test_constant_neumann(self, unit_neumann):
        f = Field(unit_neumann, np.full(unit_neumann.shape, 3.0))
        np.testing.assert_allclose(laplacian_apply(f).values, 0, atol=1e-10)

    def test_combination(self, pi_dirichlet):
        e = eigen_system(pi_dirichlet, 3)
        w1, w3 = e.eigenfunction(0), e.eigenfunction(2)
        out = laplacian_apply(Field(pi_dirichlet, w1 + 2 * w3)).values
        np.testing.assert_allclose(out, -w1 - 18 * w3, atol=1e-11)

    def test_matches_second_derivative_of_smooth_sine_series(self):
        d = build_domain("rectangle", (np.pi, 2.0), 31)
        X, Y = d.mesh
        f = np.sin(2 * X) * np.sin(np.pi * Y / 2)
        expected = -(4 + np.pi**2 / 4) * f
        np.testing.assert_allclose(laplacian_apply(Field(d, f)).values, expected, atol=1e-10)


class TestNorms:
    def test_zero(self, pi_dirichlet):
        n = compute_norms(Field.zeros(pi_dirichlet), 2.0)
        assert (n.l2_sq, n.h1_seminorm_sq, n.h1_equiv_sq, n.lpp) == (0, 0, 0, 0)

    def test_orthonormal_eigenfunction(self, pi_dirichlet):
        w1 = eigen_system(pi_dirichlet, 1).eigenfunction(0)
        assert compute_norms(Field(pi_dirichlet, w1), 2.0).l2_sq == pytest.approx(1, abs=1e-8)

    def test_sine_exact_integrals(self, pi_dirichlet):
        n = compute_norms(Field.from_function(pi_dirichlet, np.sin), 2.0)
        assert n.l2_sq == pytest.approx(np.pi / 2, rel=1e-12)
        assert n.h1_seminorm_sq == pytest.approx(np.pi / 2, rel=1e-12)
        assert n.lpp == pytest.approx(3 * np.pi / 8, rel=1e-12)
        assert n.h1_equiv_sq == pytest.approx(np.pi / 2 / np.pi**2 + np.pi / 2, rel=1e-12)

    def test_rejects_nonpositive_power(self, pi_dirichlet):
        with pytest.raises(ValueError):
            compute_norms(Field.zeros(pi_dirichlet), 0.0)


coeff_lists = st.lists(
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=20
)


@settings(max_examples=60, deadline=None)
@given(coeffs=coeff_lists, bc=st.sampled_from(["dirichlet", "neumann"]))
def test_parseval(coeffs, bc):
    d = build_domain("interval", 2.0, 63 if bc == "dirichlet" else 65, bc)
    c = np.array([a + 1j * b for a, b in coeffs])
    f = from_modal(ModalCoeffs(c, eigen_system(d, len(c))))
    assert abs(np.sum(np.abs(c) ** 2) - l2_sq(d, f.values)) <= 1e-10 * max(1.0, np.sum(np.abs(c) ** 2))


@settings(max_examples=60, deadline=None)
@given(coeffs=coeff_lists, N=st.integers(0, 19))
def test_poincare_and_tail_poincare(coeffs, N):
    d = build_domain("interval", 3.0, 63)
    c = np.array([a + 1j * b for a, b in coeffs])
    eig = eigen_system(d, 21)
    f = from_modal(ModalCoeffs(c, eigen_system(d, len(c))))
    l2 = l2_sq(d, f.values)
    h1 = h1_seminorm_sq(d, f.values)
    assert h1 >= eig.eigenvalues[0] * l2 - 1e-8 * max(1.0, l2)
    tail = np.sum(np.abs(to_modal(f, 20).coeffs[N:]) ** 2)
    assert tail <= h1 / eig.eigenvalues[N] + 1e-10 * max(1.0, h1)
