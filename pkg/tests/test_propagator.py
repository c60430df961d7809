import math
from dataclasses import replace

import numpy as np
import pytest

from fermirg.config import FermiRGConfig
from fermirg.errors import DomainError, UsageError
from fermirg.insulator import propagator_from_config
from fermirg.kernels import Lattice, lattice_delta, translate
from fermirg.norm_domain import SaturatedSet
from fermirg.propagator import (
    CutoffSpec,
    DispersionSpec,
    MomentumGrid,
    Plateau,
    PropagatorSpec,
    _sample_offsets,
    c_position,
    c_time_kernel,
    check_norms,
    contraction_element,
    counterterm_derivative,
    counterterm_series,
    delta_e_hat,
    g1_g2,
    gamma_constant,
    gram_bound,
    gram_bound_partitioned,
    gram_bound_truncated,
    pointwise_check,
    s_bound_gapped,
    time_kernel,
    zone_gram_constant,
)

LATTICE = Lattice(1, 4, 4)
BOX = SaturatedSet.box(1, 1, 1)


@pytest.fixture(scope="module")
def band():
    return PropagatorSpec(DispersionSpec("cosine", (2.0, 1.0), d=1, mu=1.0), LATTICE)


# ---------- specs ----------
def test_cosine_parameters_are_shared_by_axes():
    assert DispersionSpec("cosine", (1.0, 0.5), d=2).parameters == (1.0, 0.5, 0.5)


def test_dispersion_parameter_count():
    with pytest.raises(UsageError):
        DispersionSpec("cosine", (1.0, 2.0, 3.0), d=1)
    with pytest.raises(UsageError):
        DispersionSpec("sine", (1.0,), d=1)


def test_gap_condition_is_enforced():
    with pytest.raises(DomainError):
        PropagatorSpec(DispersionSpec("cosine", (0.5, 1.0), d=1, mu=0.5), LATTICE)


def test_plateau_profile():
    plateau = Plateau(1.0, 2.0, 2)
    values = plateau(np.array([0.0, 1.0, 1.5, 2.0, -1.5, 3.0]))
    assert values.tolist() == pytest.approx([1.0, 1.0, 0.5, 0.0, 0.5, 0.0])
    with pytest.raises(UsageError):
        Plateau(2.0, 1.0)


def test_energy_scale(band):
    assert band.E == 3.0


# ---------- closed-form constants ----------
def test_g1_g2_oracle(band):
    g1, g2 = g1_g2(band)
    assert g1 == pytest.approx(2 * math.pi / math.sqrt(3), abs=1e-8)
    assert g2 == pytest.approx(4 * math.pi / 3**1.5, abs=1e-8)


def test_gamma_is_at_least_one(band):
    assert gamma_constant(band) >= 1.0


# ---------- time and position kernels ----------
def test_time_kernel_case_split(band):
    kvec = band.dual_momenta
    e = band.dispersion.value(kvec)
    assert c_time_kernel(band, 0.5, kvec) == pytest.approx(-np.exp(-e * 0.5))
    assert not np.any(c_time_kernel(band, 0.0, kvec))
    assert not np.any(c_time_kernel(band, -1.0, kvec))


def test_filled_band_lives_at_negative_times():
    spec = PropagatorSpec(DispersionSpec("cosine", (-2.0, -1.0), d=1, mu=1.0), LATTICE)
    kvec = spec.dual_momenta
    e = spec.dispersion.value(kvec)
    assert c_time_kernel(spec, -0.5, kvec) == pytest.approx(np.exp(e * 0.5))
    assert c_time_kernel(spec, 0.0, kvec) == pytest.approx(np.ones(len(kvec)))
    assert not np.any(c_time_kernel(spec, 1.0, kvec))


def test_closed_kernel_refuses_frequency_cutoffs(band):
    spec = replace(band, cutoff=CutoffSpec(chi=Plateau(1.0, 2.0)))
    with pytest.raises(UsageError):
        c_time_kernel(spec, 1.0, spec.dual_momenta)


def test_quadrature_path_matches_closed_form(band):
    kvec = band.dual_momenta
    for tau in (-1.0, 0.5, 2.0):
        closed = time_kernel(band, tau, kvec, "closed")
        quad = time_kernel(band, tau, kvec, "quadrature")
        assert np.abs(closed - quad).max() <= 1e-6


def test_unknown_time_kernel_method(band):
    with pytest.raises(UsageError):
        time_kernel(band, 1.0, band.dual_momenta, "fft")


def test_position_kernel_is_antisymmetric(band):
    dense = c_position(band).to_dense()
    assert np.abs(dense + dense.T).max() <= 1e-14
    assert np.abs(dense).max() > 0


def test_position_kernel_is_periodic_in_time(band):
    kernel = c_position(band)
    dense = kernel.to_dense()
    for shift in ((1, 0), (3, 0), (2, 1)):
        assert np.abs(translate(kernel, shift).to_dense() - dense).max() <= 1e-14


def test_position_kernel_uses_minimal_image_times(band):
    # t - t' = -3 on T = 4 is the offset +1, where the empty band propagates
    dense = c_position(band).to_dense()
    p = LATTICE.encode(0, [0], 0, 0)
    q = LATTICE.encode(3, [0], 0, 1)
    block = c_time_kernel(band, 1.0, band.dual_momenta)
    assert dense[p, q] == pytest.approx(band.dual_weight * block.sum(), abs=1e-14)
    assert abs(dense[p, q]) > 0


# ---------- Gram and S bounds ----------
def test_gram_bound_diverges_for_unit_cutoff(band):
    assert gram_bound(band) == math.inf
    assert gram_bound_partitioned(band, [None]) == math.inf


def test_gram_bound_truncated_grows_with_the_cut(band):
    assert gram_bound_truncated(band, 10.0) < gram_bound_truncated(band, 100.0) < math.inf


def test_partition_window_is_below_its_truncation(band):
    window = Plateau(1.0, 2.0)
    assert gram_bound_partitioned(band, [window]) <= gram_bound_truncated(band, window.outer) * (1 + 1e-9)


def test_zone_gram_constant_is_the_zone_volume(band):
    assert zone_gram_constant(band) == pytest.approx(1 / math.sqrt(LATTICE.dx[0]))


def test_s_bound_gapped_dominates_the_first_term(band):
    assert s_bound_gapped(band) > 9.0 * zone_gram_constant(band) ** 2


# ---------- momentum norms and contraction elements ----------
def test_check_norms_modes(band):
    grid = MomentumGrid.for_spec(band, nodes=8)
    jet = band.jet(BOX, grid.points)
    sup = check_norms(jet, grid, "sup")
    assert sup.body == pytest.approx(np.abs(band.momentum(grid.points)).max())
    assert check_norms(jet, grid, "integral", budget=(0, 0))[(1, 0)] == math.inf
    with pytest.raises(UsageError):
        check_norms(jet, grid, "median")


def test_contraction_element_with_no_decay_room():
    spec = PropagatorSpec(DispersionSpec("cosine", (2.0, 1.0), d=1, mu=1.0, r=1), LATTICE)
    out = contraction_element(spec, BOX, "gapped")
    assert out.body == pytest.approx(g1_g2(spec)[0])
    assert np.all(np.isinf(out.coefficients[1:]))
    assert np.all(np.isinf(contraction_element(spec, BOX, "cutoff").coefficients[1:]))


def test_contraction_element_variant(band):
    with pytest.raises(UsageError):
        contraction_element(band, BOX, "sharp")


def test_pointwise_inequality_on_the_band(band, rng):
    report = pointwise_check(band, BOX, samples=40, rng=rng)
    assert report.checked > 0
    assert report.passed


def test_sampled_offsets_are_distinct(band, rng):
    offsets = _sample_offsets(band, 1000, 3, rng)
    assert len(np.unique(offsets, axis=0)) == len(offsets) == 1000
    assert np.abs(offsets[:, 1:]).max() <= 3


def test_pointwise_check_reaches_the_configured_sample_count(rng):
    cfg = FermiRGConfig()
    spec = propagator_from_config(cfg)
    report = pointwise_check(spec, BOX, samples=cfg.checks.pointwise_samples, rng=rng)
    assert report.samples >= 1000
    assert report.passed, report.to_record()


# ---------- counterterms ----------
def test_constant_counterterm_is_a_lattice_delta():
    lattice = Lattice(1, 4, 2, 0.5, 0.5)
    got = delta_e_hat(DispersionSpec("constant", (0.5,), d=1), lattice).to_dense()
    assert got == pytest.approx(lattice_delta(lattice).scale(0.5).to_dense(), abs=1e-12)


def test_missing_counterterm_is_zero():
    assert delta_e_hat(None, LATTICE).nnz == 0
    assert delta_e_hat(DispersionSpec("constant", (0.0,), d=1), LATTICE).nnz == 0


def test_zero_counterterm_series_is_exact(band):
    spec = replace(band, counterterm=DispersionSpec("constant", (0.0,), d=1))
    series = counterterm_series(spec, 3)
    assert series.errors == [0.0, 0.0, 0.0, 0.0]
    assert series.ratio == 0.0


def test_counterterm_series_converges(band):
    spec = replace(band, counterterm=DispersionSpec("constant", (0.2,), d=1))
    series = counterterm_series(spec, 20)
    assert series.ratio == pytest.approx(0.2)
    assert series.errors[-1] <= 1e-10
    assert series.errors[-1] < series.errors[0]


def test_counterterm_series_needs_small_ratio(band):
    spec = replace(band, counterterm=DispersionSpec("constant", (1.5,), d=1, mu=1.0))
    with pytest.raises(DomainError):
        counterterm_series(spec, 5)


def test_counterterm_series_needs_a_counterterm(band):
    with pytest.raises(UsageError):
        counterterm_series(band, 5)


def test_counterterm_derivative_matches_differences(band):
    spec = replace(band, counterterm=DispersionSpec("constant", (0.2,), d=1))
    derivative = DispersionSpec("cosine", (0.1, 0.05), d=1)
    points = MomentumGrid.for_spec(spec, nodes=6).points
    analytic, numeric = counterterm_derivative(spec, derivative, points)
    assert np.abs(analytic - numeric).max() <= 1e-6 * np.abs(analytic).max()
