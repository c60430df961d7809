"""Insulator pipeline: leading terms, scaling and structural identities.

Everything runs on the configured lattice except the comparison with the
uncapped backend, which uses a 2 x 2 lattice.
"""

import math

from ..grassmann import kernel_from_gr, n_functional
from ..insulator import (
    CHANNELS,
    CONVENTIONS,
    build_model,
    compute_bounds,
    exact_backend_agreement,
    first_order_checks,
    greens,
    greens_roundtrip,
    interaction_element,
    k_kernel,
    omega_expansion,
    scaling_study,
    spin_flip_defect,
    wick_shift_identity,
)
from ..kernels import Lattice, contraction_bound, seminorm_1inf
from ..norm_domain import NormElement, scale
from ..propagator import s_bound_gapped
from . import SuiteResult, suite_rng
from .samples import dominated

NAME = "insulator"
EXACT_LATTICE = Lattice(1, 2, 2)
FIRST_ORDER_TOL = 1e-8
SLOPE = 2.0
SLOPE_TOL = 0.05
EXACT_TOL = 1e-9
SPIN_TOL = 1e-12
N_ALPHAS = (2.0, 16.0)


def _first_order(greens_set, K, v0):
    gaps = first_order_checks(greens_set, K, v0)
    return all(v <= FIRST_ORDER_TOL for v in gaps.values()), gaps


def _slopes(model, lambdas, greens_set, K):
    report = scaling_study(model, lambdas, greens_set, K)
    ok = all(abs(report.slopes[c] - SLOPE) <= SLOPE_TOL for c in CHANNELS)
    return ok, report.to_record()


def _wick_shift(model):
    record = wick_shift_identity(model)
    return record["wick_inverse"] and record["quadratic_is_k"], record


def _roundtrip(model, series, convention):
    ok, worst = greens_roundtrip(greens(model, convention, series), series)
    return ok, {"max_relative_gap": worst}


def _spin_symmetry(greens_set, lam):
    defects = {f"G{2 * n}": spin_flip_defect(greens_set.at(n, lam)) for n in (1, 2)}
    return all(v <= SPIN_TOL for v in defects.values()), defects


def _exact_backend(model):
    gap = exact_backend_agreement(model)
    return gap <= EXACT_TOL, {"max_relative_gap": gap}


def _n_assembly(model):
    domain = model.domain
    V = interaction_element(model, 1.0)
    c = contraction_bound(model.covariance, domain, model.delta_max)
    b = 2.0 * math.sqrt(s_bound_gapped(model.spec))
    extracted = seminorm_1inf(kernel_from_gr(V, 0, 4), domain, model.delta_max)
    direct = seminorm_1inf(model.v0, domain, model.delta_max)
    rows = []
    for alpha in N_ALPHAS:
        value = n_functional(V, c, b, alpha, domain, delta_max=model.delta_max)
        weight = alpha**4 * b**2
        exact, detail = dominated(value, scale(c * extracted, weight), rtol=1e-10)
        reverse, _ = dominated(scale(c * extracted, weight), value, rtol=1e-10)
        bounded, _ = dominated(value, scale(c * direct, weight), rtol=1e-10)
        rows.append({"alpha": alpha, "matches": exact and reverse, "below_v0_norm": bounded, **detail})
    return all(r["matches"] and r["below_v0_norm"] for r in rows), {"alphas": rows}


def _bounds_nonnegative(model, epsilon, rng):
    report = compute_bounds(model, epsilon, rng)
    scalars = {
        "g": report.g,
        "gamma": report.gamma,
        "E": report.E,
        "upsilon": report.upsilon,
        "b": report.b,
        **report.s_bounds,
        **report.measured,
    }
    elements_ok = all(
        isinstance(x, NormElement) and (x.coefficients >= 0).all()
        for x in [report.contraction, *report.n_values.values()]
    )
    ok = elements_ok and all(v >= 0 for v in scalars.values())
    return ok, {"scalars": scalars, "smallness": report.smallness.to_record()}


def main(config, seed):
    rng = suite_rng(seed, NAME)
    result = SuiteResult(NAME)
    model = build_model(config)
    series = omega_expansion(model)
    greens_set = greens(model, "amputated", series)
    K = k_kernel(model.v0, model.covariance)
    lambdas = config.run.lambdas
    result.check("order-lambda Green's functions", lambda: _first_order(greens_set, K, model.v0))
    result.check("deviations scale like lambda^2", lambda: _slopes(model, lambdas, greens_set, K))
    result.check("wick ordering and tadpole shift", lambda: _wick_shift(model))
    for convention in CONVENTIONS:
        result.check(f"Green's round trip ({convention})", lambda c=convention: _roundtrip(model, series, c))
    result.check("spin flip symmetry", lambda: _spin_symmetry(greens_set, model.coupling))
    result.check("degree cap is exact", lambda: _exact_backend(build_model(config, lattice=EXACT_LATTICE)))
    result.check("N functional of the interaction", lambda: _n_assembly(model))
    result.check("bounds are nonnegative", lambda: _bounds_nonnegative(model, config.run.epsilon, rng))
    return result.to_record()
