"""Norm bounds on the renormalization group map and on its derivative along a family of covariances.

Both checks run on two external and six internal generators, small enough for
exhaustive moment estimates and the exact Grassmann backend.
"""

from ..grassmann import (
    CovarianceMatrix,
    GeneratorSet,
    n_functional,
    omega,
    s_empirical,
    shift_convolve,
    wick_order,
)
from ..kernels import contraction_bound
from ..norm_domain import NormElement, SaturatedSet, geom_inverse, scale
from . import SuiteResult, suite_rng
from .samples import covariance_kernel, dominated, embed, even_element, random_antisymmetric, tiny_lattice

NAME = "rg_map"
LATTICE = tiny_lattice(2, 1)
EXTERNALS = (0, 1)
INTERNALS = (2, 3, 4, 5, 6, 7)
DOMAIN = SaturatedSet.box(1, 1, 1)
DELTA_MAX = 2
ALPHA = 2.0
FILL = 0.5
FAMILIES = 5
STEP = 1e-4


def _gens():
    return GeneratorSet(LATTICE, EXTERNALS, INTERNALS)


def _moment_bound(matrix):
    return s_empirical(CovarianceMatrix(matrix), len(INTERNALS)).value


def _contraction(matrix):
    return contraction_bound(covariance_kernel(embed(matrix, LATTICE, INTERNALS), LATTICE), DOMAIN, DELTA_MAX)


def _norm(W, c, b, alpha):
    return n_functional(W, c, b, alpha, DOMAIN, delta_max=DELTA_MAX)


def _fill(W, c, b, alpha, target):
    """Rescale W so that N(W; c, b, alpha) has body ``target``."""
    body = _norm(W, c, b, alpha).body
    if body == 0:
        return W
    return W.scale(target / body)


def _rg_map_sample(rng):
    gens = _gens()
    matrix = random_antisymmetric(rng, len(INTERNALS), 0.5)
    C = CovarianceMatrix(matrix)
    c = _contraction(matrix)
    b = 2.0 * _moment_bound(matrix)
    W = _fill(even_element(rng, gens), c, b, 8 * ALPHA, FILL * ALPHA**2 / 4)
    n8 = _norm(W, c, b, 8 * ALPHA)
    lhs = _norm(omega(wick_order(W, C), C) - W, c, b, ALPHA)
    rhs = scale(n8 * n8, 2 / ALPHA**2) * geom_inverse(1.0, scale(n8, 4 / ALPHA**2))
    return dominated(lhs, rhs)


def _rg_map(rng, count):
    worst = 0.0
    for _ in range(count):
        ok, detail = _rg_map_sample(rng)
        worst = max(worst, detail["max_ratio"])
        if not ok:
            return False, detail
    return True, {"max_ratio": worst, "samples": count, "alpha": ALPHA}


def _dressed(W, C, D):
    """W~ with :W~:_D = Omega_C(:W:_{C + D})."""
    return shift_convolve(omega(wick_order(W, C + D), C), D)


def _derivative_family(rng, mu):
    gens = _gens()
    size = len(INTERNALS)
    c0, c1, d0, d1 = (random_antisymmetric(rng, size, 0.3) for _ in range(4))
    c = _contraction(c0)
    b = 4.0 * max(_moment_bound(c0), _moment_bound(d0))
    c_prime = _contraction(c1)
    b_prime = 4.0 * _moment_bound(d1)
    mu = c.body if mu is None else mu
    hypothesis, _ = dominated(c, scale(c * c, 1.0 / mu))
    w0 = _fill(even_element(rng, gens), c, b, 32 * ALPHA, FILL * ALPHA**2)
    w1 = even_element(rng, gens, scale=0.1)

    def image(kappa):
        C = CovarianceMatrix(c0 + kappa * c1)
        D = CovarianceMatrix(d0 + kappa * d1)
        W = w0 + w1.scale(kappa)
        return _dressed(W, C, D) - W

    derivative = (image(STEP) - image(-STEP)).scale(1.0 / (2 * STEP))
    lhs = _norm(derivative, c, b, ALPHA)
    n32 = _norm(w0, c, b, 32 * ALPHA)
    resolvent = geom_inverse(1.0, scale(n32, 1 / ALPHA**2))
    first = scale(n32 * resolvent * _norm(w1, c, b, 8 * ALPHA), 1 / (2 * ALPHA**2))
    bracket = scale(c_prime, 1 / (4 * mu)) + NormElement.constant(DOMAIN, (b_prime / b) ** 2)
    second = scale(n32 * n32 * resolvent, 1 / (2 * ALPHA**2)) * bracket
    ok, detail = dominated(lhs, first + second)
    return hypothesis, ok, {"mu": mu, **detail}


def _derivative_bound(rng, mu, result):
    rows = []
    for k in range(FAMILIES):
        hypothesis, ok, detail = _derivative_family(rng, mu)
        if not hypothesis:
            result.skip(f"family {k}", f"c <= c^2/mu fails for mu={detail['mu']}")
            continue
        rows.append({"family": k, "passed": ok, **detail})
    worst = max((r["max_ratio"] for r in rows), default=0.0)
    return all(r["passed"] for r in rows), {"families": rows, "max_ratio": worst}


def main(config, seed):
    rng = suite_rng(seed, NAME)
    result = SuiteResult(NAME)
    result.check("renormalization group map bound", lambda: _rg_map(rng, config.checks.rg_samples))
    result.check(
        "derivative bound along covariance families",
        lambda: _derivative_bound(rng, config.checks.rg_mu, result),
    )
    return result.to_record()
