"""Grassmann engine: Pfaffians, Gaussian convolution and the exact renormalization group map."""

import numpy as np

from ..grassmann import (
    CovarianceMatrix,
    GeneratorSet,
    gr_from_kernel,
    grexp,
    grlog,
    kernel_from_gr,
    omega,
    pfaffian,
    s_empirical,
    shift_convolve,
    shift_convolve_doubled,
    wick_order,
)
from ..kernels import antisymmetrize
from . import SuiteResult, suite_rng
from .samples import any_element, even_element, random_antisymmetric, random_kernel, tiny_lattice

NAME = "grassmann"
LATTICE = tiny_lattice(4, 1)
PAIRS = 50


def _gens(externals, internals):
    points = list(range(LATTICE.n_points))
    return GeneratorSet(LATTICE, tuple(points[:externals]), tuple(points[externals : externals + internals]))


def _pfaffian_squares(rng):
    worst = 0.0
    for size in (2, 4, 6, 8, 10):
        a = random_antisymmetric(rng, size)
        pf = pfaffian(a)
        det = np.linalg.det(a)
        worst = max(worst, abs(pf * pf - det) / max(1.0, abs(det)))
    return worst <= 1e-10, {"max_relative_gap": worst}


def _four_point(rng, count):
    worst = 0.0
    for _ in range(count):
        c = CovarianceMatrix(random_antisymmetric(rng, 4)).matrix
        pairings = c[0, 1] * c[2, 3] - c[0, 2] * c[1, 3] + c[0, 3] * c[1, 2]
        worst = max(worst, abs(CovarianceMatrix(c).moment([0, 1, 2, 3]) - pairings))
    return worst <= 1e-12, {"max_gap": worst}


def _wick_inversion(rng, count):
    gens = _gens(2, 8)
    for _ in range(count):
        F = any_element(rng, gens)
        C = CovarianceMatrix(random_antisymmetric(rng, gens.I, 0.5))
        if not shift_convolve(wick_order(F, C), C).is_close(F, rtol=1e-12, atol=1e-14):
            return False, {}
    return True, {"samples": count}


def _semigroup(rng, count):
    gens = _gens(2, 6)
    for _ in range(count):
        W = even_element(rng, gens, scale=0.2)
        c1 = CovarianceMatrix(random_antisymmetric(rng, gens.I, 0.3))
        c2 = CovarianceMatrix(random_antisymmetric(rng, gens.I, 0.3))
        once = omega(W, c1 + c2)
        twice = omega(omega(W, c2), c1)
        if not once.is_close(twice, rtol=1e-9, atol=1e-12):
            return False, {"gap": (once - twice).max_abs()}
    return True, {"samples": count}


def _subadditivity(rng, count):
    worst = 0.0
    for _ in range(count):
        c1 = CovarianceMatrix(random_antisymmetric(rng, 6))
        c2 = CovarianceMatrix(random_antisymmetric(rng, 6))
        both = s_empirical(c1 + c2, 6).value
        apart = s_empirical(c1, 6).value + s_empirical(c2, 6).value
        worst = max(worst, both / apart)
        if both > apart * (1 + 1e-12):
            return False, {"sum": both, "bound": apart}
    return True, {"max_ratio": worst}


def _doubled_generators(rng, count):
    gens = _gens(2, 6)
    for _ in range(count):
        F = any_element(rng, gens)
        C = CovarianceMatrix(random_antisymmetric(rng, gens.I))
        if not shift_convolve(F, C).is_close(shift_convolve_doubled(F, C), rtol=1e-12, atol=1e-14):
            return False, {}
    return True, {"samples": count}


def _log_exp(rng, count):
    gens = _gens(2, 6)
    for _ in range(count):
        F = even_element(rng, gens, scale=0.5) + 0.25
        if not grlog(grexp(F)).is_close(F, rtol=1e-12, atol=1e-14):
            return False, {}
    return True, {"samples": count}


def _kernel_round_trip(rng, count):
    gens = _gens(4, 4)
    worst = 0.0
    for _ in range(count):
        f = random_kernel(rng, LATTICE, 1, 2, nnz=8)
        rows = [[gens.externals[e % 4], gens.internals[p % 4], gens.internals[q % 4]] for e, p, q in f.points.tolist()]
        f = f.with_entries(np.asarray(rows, dtype=np.int64), f.values)
        back = kernel_from_gr(gr_from_kernel(f, gens), 1, 2)
        expected = antisymmetrize(antisymmetrize(f, "external"), "internal")
        gap = (back - expected).max_abs()
        worst = max(worst, gap)
    return worst <= 1e-12, {"max_gap": worst}


def main(config, seed):
    rng = suite_rng(seed, NAME)
    result = SuiteResult(NAME)
    pairs = min(PAIRS, config.checks.pairs)
    result.check("pfaffian squares to determinant", lambda: _pfaffian_squares(rng))
    result.check("four-point moment pairings", lambda: _four_point(rng, 10))
    result.check("wick ordering inverts convolution", lambda: _wick_inversion(rng, 5))
    result.check("renormalization group semigroup", lambda: _semigroup(rng, config.checks.semigroup_samples))
    result.check("integral bound subadditivity", lambda: _subadditivity(rng, pairs))
    result.check("convolution matches doubled generators", lambda: _doubled_generators(rng, 5))
    result.check("logarithm inverts exponential", lambda: _log_exp(rng, 5))
    result.check("kernel round trip", lambda: _kernel_round_trip(rng, 5))
    return result.to_record()
