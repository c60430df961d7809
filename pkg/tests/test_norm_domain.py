import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermirg.errors import DomainError, UsageError
from fermirg.norm_domain import (
    Geometric,
    NormElement,
    SaturatedSet,
    apply_analytic,
    combine,
    derive,
    frak_c,
    frak_e,
    geom_inverse,
    leq,
    n_of,
    nilpotency_order,
    power,
    ratio,
    rational_majorant,
    scale,
    t_mu,
)

from .strategies import domain_with_elements, grid_floats, norm_elements, saturated_sets

BOX = SaturatedSet.box(1, 1, 1)
TIME_ONLY = SaturatedSet.box(1, 2, 0)


def element(domain, mapping):
    return NormElement.from_mapping(domain, mapping)


def coefficients(x):
    return dict(x.items())


# ---------- saturated sets ----------
def test_box_members():
    assert BOX.members == ((0, 0), (0, 1), (1, 0), (1, 1))


def test_not_downward_closed():
    with pytest.raises(UsageError):
        SaturatedSet(1, ((0, 0), (1, 1)))


@pytest.mark.parametrize(
    "domain, expected",
    [
        (SaturatedSet.box(1, 2, 3), 4),
        (SaturatedSet.box(2, 3, 1), 4),
        (SaturatedSet.origin(2), 1),
        (SaturatedSet.total_degree(1, 2), 3),
    ],
)
def test_n_of(domain, expected):
    assert n_of(domain) == expected


def test_nilpotency_order_exceeds_single_index_order():
    domain = SaturatedSet.box(1, 3, 3)
    x = element(domain, {(1, 0): 1.0, (0, 1): 1.0})
    assert n_of(domain) == 4
    assert nilpotency_order(domain) == 7
    assert power(x, 4)[(3, 1)] == 4.0
    assert not np.any(power(x, 7).coefficients)


# ---------- combine and order ----------
def test_add_example():
    x = element(BOX, {(0, 0): 1.0, (1, 0): 2.0})
    y = element(BOX, {(0, 1): 3.0})
    assert coefficients(x + y) == {(0, 0): 1.0, (0, 1): 3.0, (1, 0): 2.0, (1, 1): 0.0}


def test_zero_times_infinity_is_infinity():
    x = NormElement.zero(BOX)
    y = element(BOX, {(0, 0): math.inf})
    assert math.isinf((x * y).body)


def test_binomial_square():
    x = element(TIME_ONLY, {(0, 0): 1.0, (1, 0): 1.0})
    assert (x * x).coefficients.tolist() == [1.0, 2.0, 1.0]


def test_max_and_min():
    x = element(BOX, {(0, 0): 1.0, (1, 1): 3.0})
    y = element(BOX, {(0, 0): 2.0, (0, 1): 1.0})
    assert combine(x, y, "max").coefficients.tolist() == [2.0, 1.0, 0.0, 3.0]
    assert combine(x, y, "min").coefficients.tolist() == [1.0, 0.0, 0.0, 0.0]


def test_leq_examples():
    x = element(BOX, {(0, 0): 1.0, (1, 0): 1.0})
    assert leq(x, x)
    assert leq(x, x + element(BOX, {(0, 1): 1.0}))
    assert leq(x, NormElement.infinite(BOX))
    assert not leq(NormElement.infinite(BOX), x)


def test_domain_mismatch():
    with pytest.raises(UsageError):
        NormElement.one(BOX) + NormElement.one(TIME_ONLY)


def test_negative_coefficient_rejected():
    with pytest.raises(DomainError):
        NormElement(BOX, [1.0, -1.0, 0.0, 0.0])


def test_out_of_domain_reads_infinity():
    assert math.isinf(NormElement.one(BOX)[(2, 0)])


@settings(max_examples=50, deadline=None)
@given(domain_with_elements(count=3))
def test_semiring_laws_are_exact_on_the_grid(case):
    domain, x, y, z = case
    assert x + y == y + x
    assert x * y == y * x
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x * NormElement.one(domain) == x


@settings(max_examples=50, deadline=None)
@given(domain_with_elements(count=3, high=1.0))
def test_multiplication_is_monotone(case):
    _, x, y, z = case
    assert x * z <= (x + y) * z


# ---------- geometric inverse ----------
def test_geom_inverse_examples():
    t0 = element(TIME_ONLY, {(1, 0): 1.0})
    assert geom_inverse(1.0, t0).coefficients.tolist() == [1.0, 1.0, 1.0]
    assert geom_inverse(2.0, t0 + NormElement.one(TIME_ONLY)).coefficients.tolist() == [1.0, 1.0, 1.0]


def test_geom_inverse_outside_domain():
    with pytest.raises(DomainError):
        geom_inverse(1.0, NormElement.one(TIME_ONLY) + element(TIME_ONLY, {(1, 0): 1.0}))
    with pytest.raises(DomainError):
        geom_inverse(1.0, NormElement.infinite(TIME_ONLY))


@settings(max_examples=40, deadline=None)
@given(saturated_sets(), st.data())
def test_geom_inverse_is_monotone(domain, data):
    x = data.draw(norm_elements(domain, high=1.0, body=0.25))
    y = x + data.draw(norm_elements(domain, high=0.5, body=0.0))
    left, right = geom_inverse(1.0, x), geom_inverse(1.0, y)
    assert np.all(left.coefficients <= right.coefficients * (1 + 1e-12))


def test_apply_geometric_matches_geom_inverse(rng):
    domain = SaturatedSet.box(2, 2, 2)
    x = NormElement(domain, rng.integers(0, 9, len(domain)) / 16)
    assert apply_analytic("geometric", x).coefficients == pytest.approx(geom_inverse(1.0, x).coefficients, rel=1e-12)


def test_apply_exp_of_constant():
    x = NormElement.constant(BOX, 0.5)
    assert apply_analytic("exp", x).coefficients == pytest.approx([math.exp(0.5), 0.0, 0.0, 0.0])


# ---------- derivatives and T_mu ----------
def test_derive_power_rule():
    x = element(TIME_ONLY, {(2, 0): 1.0})
    out = derive(x, 0)
    assert out[(0, 0)] == 0.0
    assert out[(1, 0)] == 2.0
    assert math.isinf(out[(2, 0)])


def test_derive_across_axes():
    assert derive(element(BOX, {(1, 0): 1.0}), 1).body == 0.0


def test_derive_bad_axis():
    with pytest.raises(UsageError):
        derive(NormElement.one(BOX), 2)


def test_t_mu_of_mixed_monomial():
    domain = SaturatedSet.total_degree(1, 6)
    out = t_mu(element(domain, {(2, 1): 1.0}), 2.0)
    assert out.body == 2.0
    assert out[(2, 1)] == 0.25
    for delta in domain:
        if 0 < sum(delta) <= 3 and delta != (2, 1):
            assert out[delta] == 0.0


def test_t_mu_keeps_bilinear_monomial():
    domain = SaturatedSet.total_degree(1, 6)
    x = element(domain, {(1, 1): 1.0})
    out = t_mu(x, 1.0)
    for delta in domain:
        if sum(delta) <= 3:
            assert out[delta] == x[delta]


def test_t_mu_needs_positive_mu():
    with pytest.raises(DomainError):
        t_mu(NormElement.one(BOX), 0.0)


# ---------- closed forms ----------
def test_frak_c_examples():
    assert frak_c(1, 1, 1.0, 1.0, 1).coefficients.tolist() == [1.0, 1.0, 1.0, 1.0]
    assert frak_c(1, 1, 2.0, 3.0, 1)[(1, 1)] == 6.0
    origin = frak_c(0, 0, 2.0, 3.0, 1)
    assert origin.domain == SaturatedSet.origin(1)
    assert origin.body == 1.0


def test_frak_e_examples():
    c = element(BOX, {(0, 0): 1.0, (1, 1): 0.5})
    assert frak_e(NormElement.zero(BOX), 1.0, c) == c
    assert frak_e(NormElement.constant(BOX, 0.5), 1.0, NormElement.one(BOX)).body == 2.0
    with pytest.raises(DomainError):
        frak_e(NormElement.constant(BOX, 1.0), 1.0, c)


def test_geometric_majorant_coefficients():
    domain = SaturatedSet.box(2, 2, 2)
    out = rational_majorant(Geometric(0.5), domain)
    for delta, value in out.items():
        assert value == pytest.approx(0.5 ** sum(delta), rel=1e-15)


def test_ratio():
    x = element(BOX, {(0, 0): 1.0, (1, 0): 2.0})
    assert ratio(scale(x, 3.0), x) == 3.0
    assert ratio(x, NormElement.one(BOX)) == math.inf


@given(grid_floats())
def test_scale_by_zero_keeps_infinity(s):
    out = scale(NormElement.infinite(BOX), s)
    assert np.all(np.isinf(out.coefficients))


def test_negative_scale_rejected():
    with pytest.raises(DomainError):
        scale(NormElement.one(BOX), -1.0)
