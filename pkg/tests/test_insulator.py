import math

import numpy as np
import pytest

from fermirg.config import FermiRGConfig
from fermirg.errors import NumericError, UsageError
from fermirg.grassmann import GrassmannElement
from fermirg.insulator import (
    CHANNELS,
    CONVENTIONS,
    antisymmetrize_pairs,
    build_model,
    deviation_norms,
    deviations,
    exact_backend_agreement,
    extract_greens,
    first_order_checks,
    fit_slope,
    g_gamma_E,
    greens,
    greens_roundtrip,
    k_kernel,
    potential,
    scaling_study,
    smallness_check,
    spin_flip_defect,
    upsilon,
    wick_shift_identity,
)
from fermirg.kernels import Lattice


# ---------- model assembly ----------
def test_potentials():
    r = np.array([[0.0], [1.0], [2.0]])
    assert potential("exponential", [2.0, 1.0])(r).tolist() == pytest.approx([2.0, 2 * math.exp(-1), 2 * math.exp(-2)])
    assert potential("onsite", [3.0])(r).tolist() == [3.0, 0.0, 0.0]
    assert not np.any(potential("zero", [])(r))
    with pytest.raises(UsageError):
        potential("yukawa", [1.0])


def test_desk_model_shape(desk_model):
    assert desk_model.lattice.n_points == 64
    assert desk_model.gens.size == 64
    assert desk_model.coupling == 0.05
    assert desk_model.v0.n == 4


def test_v0_is_pair_antisymmetric(desk_model):
    v0 = desk_model.v0
    assert (antisymmetrize_pairs(v0) - v0).max_abs() <= 1e-12 * v0.max_abs()


def test_pair_antisymmetrization_needs_four_points(desk_model):
    with pytest.raises(UsageError):
        antisymmetrize_pairs(desk_model.covariance)


def test_zero_interaction_gives_zero_functions():
    cfg = FermiRGConfig(interaction={"type": "zero", "params": []})
    model = build_model(cfg)
    assert model.v0.nnz == 0
    assert k_kernel(model.v0, model.covariance).nnz == 0
    assert upsilon(model.v0, 1.0, model.r, model.r0, model.delta_max) == 0.0
    for orders in greens(model).kernels.values():
        assert all(f.nnz == 0 for f in orders)


# ---------- smallness ----------
def test_smallness_boundary():
    at = smallness_check(0.5, 0.5, g=2.0, gamma=1.0, mu=1.0, d=1, epsilon=1.0)
    assert at.threshold == 0.5
    assert at.passed
    above = smallness_check(0.5 + 1e-9, 0.1, g=2.0, gamma=1.0, mu=1.0, d=1, epsilon=1.0)
    assert not above.part_i
    assert above.part_ii
    assert not above.passed


# ---------- Green's functions ----------
def test_first_order_terms_are_k_and_v0(desk_greens, desk_k, desk_model):
    gaps = first_order_checks(desk_greens, desk_k, desk_model.v0)
    assert all(gap <= 1e-8 for gap in gaps.values()), gaps


def test_zeroth_order_vanishes(desk_greens):
    assert all(orders[0].nnz == 0 for orders in desk_greens.kernels.values())


def test_greens_record(desk_greens):
    record = desk_greens.to_record()
    assert sorted(record["entries"]) == ["G2", "G4", "G6"]
    assert record["convention"] == "amputated"


def test_unknown_convention(desk_model):
    with pytest.raises(UsageError):
        extract_greens(GrassmannElement.zero(desk_model.gens), 1, "physics")


@pytest.mark.parametrize("convention", CONVENTIONS)
def test_round_trip(desk_model, desk_series, convention):
    ok, worst = greens_roundtrip(greens(desk_model, convention, desk_series), desk_series)
    assert ok, worst


def test_spin_flip_symmetry(desk_greens, desk_k, desk_model):
    assert spin_flip_defect(desk_k) <= 1e-12
    for n in (1, 2):
        assert spin_flip_defect(desk_greens.at(n, desk_model.coupling)) <= 1e-12


def test_wick_shift_identity(desk_model):
    record = wick_shift_identity(desk_model)
    assert record["wick_inverse"]
    assert record["quadratic_is_k"]


def test_degree_cap_is_exact_on_a_small_lattice(desk_config):
    model = build_model(desk_config, lattice=Lattice(1, 2, 2))
    assert exact_backend_agreement(model) <= 1e-9


def test_exact_backend_size_limit(desk_model):
    with pytest.raises(UsageError):
        exact_backend_agreement(desk_model)


# ---------- deviations and scaling ----------
def test_deviation_channels(desk_greens, desk_k, desk_model):
    assert sorted(deviations(desk_greens, desk_k, desk_model.v0, 0.01)) == sorted(CHANNELS)


def test_deviation_rows(desk_greens, desk_k, desk_model):
    g, gamma, _ = g_gamma_E(desk_model.spec)
    ups = upsilon(desk_model.v0.scale(desk_model.coupling), 1.0, desk_model.r, desk_model.r0, desk_model.delta_max)
    rows = deviation_norms(
        desk_greens, desk_k, desk_model.v0, desk_model.domain, desk_model.coupling, g, gamma, ups, 1.0
    )
    assert {row["channel"] for row in rows} == set(CHANNELS)
    assert all(row["norm"] >= 0 and row["bound_shape"] > 0 for row in rows)


def test_fit_slope_of_a_power_law():
    assert fit_slope([1.0, 2.0, 4.0], [3.0, 12.0, 48.0]) == pytest.approx(2.0)


@pytest.mark.parametrize("lambdas, values", [([0.1], [1.0]), ([0.1, 0.2], [1.0, 0.0]), ([0.1, 0.1], [1.0, 2.0])])
def test_fit_slope_degenerate(lambdas, values):
    with pytest.raises(NumericError):
        fit_slope(lambdas, values)


def test_deviations_scale_quadratically(desk_model, desk_greens, desk_k, desk_config):
    report = scaling_study(desk_model, desk_config.run.lambdas, desk_greens, desk_k)
    for channel in CHANNELS:
        assert report.slopes[channel] == pytest.approx(2.0, abs=0.05)
    assert report.slope_fixed_by_truncation
    assert report.to_record()["lambda_order"] == 2


def test_third_order_terms_move_the_measured_slope():
    model = build_model(FermiRGConfig(truncation={"lambda_order": 3}), lattice=Lattice(1, 2, 2))
    lambdas = [1e-3, 3e-3, 1e-2]
    report = scaling_study(model, lambdas)
    assert not report.slope_fixed_by_truncation
    assert all(abs(slope - 2.0) <= 0.1 for slope in report.slopes.values())
    curvature = [
        abs(values[-1] / lambdas[-1] ** 2 - values[0] / lambdas[0] ** 2) / (values[0] / lambdas[0] ** 2)
        for values in report.norms.values()
    ]
    assert max(curvature) > 1e-9
