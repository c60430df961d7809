import numpy as np
import pytest
from hypothesis import given, settings

from fermirg.checks.samples import any_element, even_element, random_antisymmetric, random_kernel, tiny_lattice
from fermirg.errors import DomainError, UsageError
from fermirg.grassmann import (
    CovarianceMatrix,
    GeneratorSet,
    GrassmannElement,
    LambdaSeries,
    gaussian_integral,
    gr_from_kernel,
    grexp,
    grlog,
    integrate_partial,
    kernel_from_gr,
    n_functional,
    omega,
    omega_series,
    pfaffian,
    product,
    s_empirical,
    shift_convolve,
    shift_convolve_doubled,
    wick_order,
)
from fermirg.kernels import Kernel, antisymmetrize, seminorm_1inf
from fermirg.norm_domain import NormElement, SaturatedSet

from .strategies import seeds

LATTICE = tiny_lattice(2, 1)
DOMAIN = SaturatedSet.box(1, 1, 1)


def internal_gens(count):
    return GeneratorSet(LATTICE, (), tuple(range(count)))


def psi(gens, point):
    return GrassmannElement.internal(gens, point)


def c12(value):
    return CovarianceMatrix(np.array([[0.0, value], [-value, 0.0]]))


# ---------- products and series ----------
def test_product_signs():
    gens = internal_gens(2)
    p1, p2 = psi(gens, 0), psi(gens, 1)
    assert (p1 * p2).terms == {0b11: 1.0}
    assert (p1 * p1).terms == {}
    assert (p2 * p1).terms == {0b11: -1.0}


def test_mismatched_generators():
    with pytest.raises(UsageError):
        product(psi(internal_gens(2), 0), psi(internal_gens(3), 0))


def test_exp_examples():
    gens = internal_gens(2)
    assert grexp(GrassmannElement.zero(gens)).terms == {0: 1.0}
    pair = (psi(gens, 0) * psi(gens, 1)).scale(0.75)
    assert grexp(pair).is_close(pair + 1.0, rtol=0, atol=0)


def test_log_of_zero_body():
    with pytest.raises(DomainError):
        grlog(psi(internal_gens(2), 0))


@settings(max_examples=20, deadline=None)
@given(seeds())
def test_log_inverts_exp(seed):
    rng = np.random.default_rng(seed)
    F = even_element(rng, internal_gens(6), scale=0.5) + 0.25
    assert grlog(grexp(F)).is_close(F, rtol=1e-12, atol=1e-14)


# ---------- Pfaffians ----------
def test_pfaffian_examples():
    assert pfaffian(np.zeros((0, 0))) == 1.0
    assert pfaffian(np.array([[0.0, 2.5], [-2.5, 0.0]])) == 2.5


def test_four_by_four_pfaffian(rng):
    a = random_antisymmetric(rng, 4)
    expected = a[0, 1] * a[2, 3] - a[0, 2] * a[1, 3] + a[0, 3] * a[1, 2]
    assert pfaffian(a) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("size", [2, 6, 10, 12])
def test_pfaffian_squares_to_determinant(rng, size):
    a = random_antisymmetric(rng, size)
    assert pfaffian(a) ** 2 == pytest.approx(np.linalg.det(a), rel=1e-9)


def test_odd_moments_vanish(rng):
    C = CovarianceMatrix(random_antisymmetric(rng, 4))
    assert C.moment([0, 1, 2]) == 0
    assert C.moment([0, 0]) == 0


# ---------- Gaussian calculus ----------
def test_gaussian_integral_examples():
    gens = internal_gens(3)
    C = CovarianceMatrix(np.array([[0, 0.5, 0.25], [-0.5, 0, 2.0], [-0.25, -2.0, 0]]))
    assert gaussian_integral(psi(gens, 0) * psi(gens, 1), C).terms == {0: 0.5}
    assert gaussian_integral(GrassmannElement.constant(gens, 1.0), C).terms == {0: 1.0}
    triple = psi(gens, 0) * psi(gens, 1) * psi(gens, 2)
    assert gaussian_integral(triple, C).terms == {}


def test_shift_convolve_pair():
    gens = internal_gens(2)
    pair = psi(gens, 0) * psi(gens, 1)
    assert shift_convolve(pair, c12(0.5)).terms == {0b11: 1.0, 0: 0.5}
    assert wick_order(pair, c12(0.5)).terms == {0b11: 1.0, 0: -0.5}
    assert wick_order(GrassmannElement.constant(gens, 1.0), c12(0.5)).terms == {0: 1.0}


def test_shift_convolve_ignores_externals():
    gens = GeneratorSet(LATTICE, (0, 1), (2, 3))
    F = GrassmannElement.external(gens, 0) * GrassmannElement.external(gens, 1)
    assert shift_convolve(F, c12(2.0)).terms == F.terms


def test_covariance_size_mismatch():
    with pytest.raises(UsageError):
        shift_convolve(GrassmannElement.constant(internal_gens(3), 1.0), c12(1.0))


@settings(max_examples=15, deadline=None)
@given(seeds())
def test_wick_order_inverts_convolution(seed):
    rng = np.random.default_rng(seed)
    gens = GeneratorSet(LATTICE, (0, 1), tuple(range(2, 8)))
    F = any_element(rng, gens)
    C = CovarianceMatrix(random_antisymmetric(rng, gens.I, 0.5))
    assert shift_convolve(wick_order(F, C), C).is_close(F, rtol=1e-12, atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(seeds())
def test_convolution_matches_doubled_generators(seed):
    rng = np.random.default_rng(seed)
    gens = GeneratorSet(LATTICE, (0, 1), tuple(range(2, 8)))
    F = any_element(rng, gens)
    C = CovarianceMatrix(random_antisymmetric(rng, gens.I))
    assert shift_convolve(F, C).is_close(shift_convolve_doubled(F, C), rtol=1e-12, atol=1e-14)


# ---------- the renormalization group map ----------
def test_omega_of_zero():
    gens = internal_gens(4)
    C = CovarianceMatrix(random_antisymmetric(np.random.default_rng(3), 4))
    assert omega(GrassmannElement.zero(gens), C).terms == {}


def test_omega_needs_even_elements():
    gens = internal_gens(2)
    with pytest.raises(UsageError):
        omega(psi(gens, 0), c12(1.0))


def test_omega_of_a_pair():
    gens = internal_gens(2)
    W = (psi(gens, 0) * psi(gens, 1)).scale(0.5)
    out = omega(W, c12(1.0))
    assert out.body == 0
    assert out.part(0, 2).terms[0b11] == pytest.approx(0.5 / 1.5)


def test_semigroup(rng):
    gens = GeneratorSet(LATTICE, (0, 1), tuple(range(2, 8)))
    W = even_element(rng, gens, scale=0.2)
    c1 = CovarianceMatrix(random_antisymmetric(rng, gens.I, 0.3))
    c2 = CovarianceMatrix(random_antisymmetric(rng, gens.I, 0.3))
    assert omega(W, c1 + c2).is_close(omega(omega(W, c2), c1), rtol=1e-9, atol=1e-12)


def test_lambda_series_matches_exact_map(rng):
    gens = internal_gens(6)
    V = even_element(rng, gens, degrees=(2, 4), count=6)
    C = CovarianceMatrix(random_antisymmetric(rng, 6, 0.5))
    series = omega_series(V, C, 2, degree_cap=None)
    lam = 1e-4
    exact = omega(V.scale(lam), C)
    assert series.evaluate(lam).is_close(exact, rtol=1e-4, atol=1e-14)


def test_lambda_series_scalar_inverse():
    gens = internal_gens(2)
    z = LambdaSeries(tuple(GrassmannElement.constant(gens, c) for c in (2.0, 1.0, 0.0)))
    inverse = z.scalar_inverse()
    assert inverse.bodies() == [0.5, -0.25, 0.125]


# ---------- kernels and elements ----------
def test_zero_kernel_gives_zero_element():
    gens = internal_gens(4)
    assert gr_from_kernel(Kernel.zero(0, 2, LATTICE), gens).terms == {}


def test_kernel_round_trip_antisymmetrizes(rng):
    gens = internal_gens(8)
    f = random_kernel(rng, LATTICE, 0, 3, nnz=10)
    back = kernel_from_gr(gr_from_kernel(f, gens), 0, 3)
    gap = (back - antisymmetrize(f)).max_abs()
    assert gap <= 1e-12


def test_kernel_needs_generators_for_its_points():
    gens = internal_gens(2)
    f = Kernel(0, 2, LATTICE, [[0, 5]], [1.0])
    with pytest.raises(UsageError):
        gr_from_kernel(f, gens)


def test_integrate_partial_pair():
    f = Kernel(1, 2, LATTICE, [[4, 0, 1]], [1.0])
    dense = np.zeros((LATTICE.n_points, LATTICE.n_points))
    dense[0, 1], dense[1, 0] = 0.5, -0.5
    out = integrate_partial(f, dense, 2)
    assert out.as_dict() == {(4,): 0.5 * LATTICE.vol**2}
    with pytest.raises(UsageError):
        integrate_partial(f, dense, 3)


# ---------- covariance constants ----------
def test_s_empirical_examples():
    assert s_empirical(c12(4.0), 2).value == 2.0
    zero = s_empirical(CovarianceMatrix(np.zeros((4, 4))), 4)
    assert zero.value == 0.0
    assert zero.exhaustive


def test_s_empirical_sampling_is_seeded(rng):
    C = CovarianceMatrix(random_antisymmetric(rng, 12))
    a = s_empirical(C, 6, np.random.default_rng(5), samples=200)
    b = s_empirical(C, 6, np.random.default_rng(5), samples=200)
    assert not a.exhaustive
    assert a.value == b.value


def test_s_empirical_order_limit():
    with pytest.raises(UsageError):
        s_empirical(c12(1.0), 4)


def test_n_functional_of_zero():
    gens = internal_gens(4)
    c = NormElement.one(DOMAIN)
    assert n_functional(GrassmannElement.zero(gens), c, 1.0, 2.0, DOMAIN) == NormElement.zero(DOMAIN)


def test_n_functional_of_a_quartic(rng):
    gens = internal_gens(8)
    f = antisymmetrize(random_kernel(rng, LATTICE, 0, 4, nnz=6))
    W = gr_from_kernel(f, gens)
    c = NormElement.constant(DOMAIN, 0.5)
    value = n_functional(W, c, 2.0, 3.0, DOMAIN, delta_max=2)
    expected = seminorm_1inf(kernel_from_gr(W, 0, 4), DOMAIN, 2) * (0.5 * 6.0**4 / 4.0)
    assert value.coefficients == pytest.approx(expected.coefficients, rel=1e-12)


def test_n_functional_needs_positive_scales():
    gens = internal_gens(2)
    with pytest.raises(UsageError):
        n_functional(GrassmannElement.zero(gens), NormElement.one(DOMAIN), 0.0, 2.0, DOMAIN)
