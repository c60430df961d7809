"""Integral and contraction bounds for random covariances on a tiny lattice."""

from ..grassmann import CovarianceMatrix, integrate_partial, s_empirical
from ..kernels import antisymmetrize, contract, contraction_bound, seminorm_1inf, tensor
from ..norm_domain import SaturatedSet, scale
from . import SuiteResult, suite_rng
from .samples import covariance_kernel, dominated, random_antisymmetric, random_kernel, tiny_lattice

NAME = "bounds"
LATTICE = tiny_lattice(2, 1)
DELTA_MAX = 2
DOMAIN = SaturatedSet.total_degree(1, DELTA_MAX)
M_MAX = 6


def _seminorm(f):
    return seminorm_1inf(f, DOMAIN, DELTA_MAX)


def _integral_bound(rng, count):
    worst = 0.0
    exhaustive = True
    for _ in range(count):
        dense = random_antisymmetric(rng, LATTICE.n_points, 0.5)
        estimate = s_empirical(CovarianceMatrix(dense), M_MAX)
        exhaustive = exhaustive and estimate.exhaustive
        half_b = estimate.value
        m = int(rng.integers(0, 2))
        n = int(rng.integers(2, 7))
        f = random_kernel(rng, LATTICE, m, n, nnz=16)
        for n_prime in range(1, min(4, n - 1) + 1):
            lhs = _seminorm(integrate_partial(f, dense, n_prime))
            ok, detail = dominated(lhs, scale(_seminorm(f), half_b**n_prime))
            worst = max(worst, detail["max_ratio"])
            if not ok:
                return False, {"n": n, "n_prime": n_prime, **detail}
    return True, {"max_ratio": worst, "exhaustive": exhaustive}


def _contraction_bound(rng, count):
    worst = 0.0
    for _ in range(count):
        dense = random_antisymmetric(rng, LATTICE.n_points, 0.5)
        C = covariance_kernel(dense, LATTICE)
        c = contraction_bound(C, DOMAIN, DELTA_MAX)
        m, mp = (int(x) for x in rng.integers(0, 2, size=2))
        n, np_ = (int(x) for x in rng.integers(1, 4, size=2))
        f = random_kernel(rng, LATTICE, m, n, nnz=10)
        fp = random_kernel(rng, LATTICE, mp, np_, nnz=10)
        joined = antisymmetrize(tensor(f, fp), "external")
        rhs = c * (_seminorm(f) * _seminorm(fp))
        for i in range(n):
            for j in range(np_):
                ok, detail = dominated(_seminorm(contract(C, joined, i, n + j)), rhs)
                worst = max(worst, detail["max_ratio"])
                if not ok:
                    return False, {"arities": [m, n, mp, np_], "slots": [i, j], **detail}
    return True, {"max_ratio": worst}


def main(config, seed):
    rng = suite_rng(seed, NAME)
    result = SuiteResult(NAME)
    result.check("integral bound from moments", lambda: _integral_bound(rng, 10))
    result.check("contraction bound", lambda: _contraction_bound(rng, 10))
    return result.to_record()
