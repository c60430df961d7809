"""Kernel calculus: Leibniz rule, convolution bounds and seminorm symmetries."""

import itertools
import math

import numpy as np

from ..kernels import (
    DecayOperator,
    Kernel,
    Lattice,
    antisymmetrize,
    apply_decay,
    contract,
    partial_convolution,
    permute_internal,
    seminorm_1inf,
    translate,
)
from ..norm_domain import SaturatedSet, scale
from . import SuiteResult, suite_rng
from .samples import dominated, multiindices_below, random_kernel

NAME = "kernels"
LATTICE = Lattice(1, 8, 8)
EXTENT = 4
DELTA_MAX = 2
DOMAIN = SaturatedSet.total_degree(1, DELTA_MAX)
# points stay in [0, EXTENT) so convolved differences never wrap on L = 8
LEIBNIZ_ORDER = 3
LEIBNIZ_DOMAIN = SaturatedSet.total_degree(1, LEIBNIZ_ORDER)


def _local(rng, n, nnz=10):
    return random_kernel(rng, LATTICE, 0, n, nnz=nnz, extent=EXTENT)


def _seminorm(f):
    return seminorm_1inf(f, DOMAIN, DELTA_MAX)


def _relative_gap(a, b):
    a, b = a.to_dense(), b.to_dense()
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


def _leibniz(rng, count):
    worst = 0.0
    for _ in range(count):
        f, g = _local(rng, 2), _local(rng, 2)
        h = partial_convolution(f, 1, g, 0)
        for delta in LEIBNIZ_DOMAIN:
            lhs = apply_decay(DecayOperator.single(delta, 0, 1), h)
            rhs = Kernel.zero(0, 2, LATTICE)
            for beta in multiindices_below(delta):
                rest = tuple(x - y for x, y in zip(delta, beta))
                weight = math.prod(math.comb(x, y) for x, y in zip(delta, beta))
                term = partial_convolution(
                    apply_decay(DecayOperator.single(beta, 0, 1), f),
                    1,
                    apply_decay(DecayOperator.single(rest, 0, 1), g),
                    0,
                )
                rhs = rhs + term.scale(weight)
            worst = max(worst, _relative_gap(lhs, rhs))
    detail = {"pairs": count, "max_order": max(sum(delta) for delta in LEIBNIZ_DOMAIN), "max_relative_gap": worst}
    return worst <= 1e-12, detail


def _convolution_bound(rng, count):
    worst = 0.0
    for _ in range(count):
        n, n_prime = (int(x) for x in rng.integers(2, 4, size=2))
        f, g = _local(rng, n), _local(rng, n_prime)
        mu, nu = int(rng.integers(0, n)), int(rng.integers(0, n_prime))
        ok, detail = dominated(_seminorm(partial_convolution(f, mu, g, nu)), _seminorm(f) * _seminorm(g))
        worst = max(worst, detail["max_ratio"])
        if not ok:
            return False, detail
    return True, {"max_ratio": worst}


def _multi_line_bound(rng, count):
    """Two extra lines between f and f' cost sup |C_2| sup |C_3|."""
    worst = 0.0
    for _ in range(count):
        f, fp = _local(rng, 4, nnz=8), _local(rng, 4, nnz=8)
        c2 = random_kernel(rng, LATTICE, 0, 2, nnz=60, extent=EXTENT)
        c3 = random_kernel(rng, LATTICE, 0, 2, nnz=60, extent=EXTENT)
        g = partial_convolution(f, 0, fp, 0)
        h = contract(c3, contract(c2, g, 0, 3), 0, 2)
        rhs = scale(_seminorm(f) * _seminorm(fp), c2.max_abs() * c3.max_abs())
        ok, detail = dominated(_seminorm(h), rhs)
        worst = max(worst, detail["max_ratio"])
        if not ok:
            return False, detail
    return True, {"max_ratio": worst}


def _permutation_symmetry(rng, count):
    for _ in range(count):
        f = _local(rng, 3)
        base = _seminorm(f)
        for perm in itertools.permutations(range(3)):
            other = _seminorm(permute_internal(f, perm))
            if not (dominated(other, base)[0] and dominated(base, other)[0]):
                return False, {"permutation": list(perm)}
    return True, {"samples": count}


def _factor_order(rng, count):
    worst = 0.0
    for _ in range(count):
        f = _local(rng, 3)
        a = DecayOperator.single((1, 0), 0, 1)
        b = DecayOperator.single((0, 1), 2, 1)
        if apply_decay(a.compose(b), f).as_dict() != apply_decay(b.compose(a), f).as_dict():
            return False, {"reason": "composition depends on factor order"}
        worst = max(worst, _relative_gap(apply_decay(a, apply_decay(b, f)), apply_decay(a.compose(b), f)))
    return worst <= 1e-12, {"max_relative_gap": worst}


def _translation(rng, count):
    for _ in range(count):
        f = random_kernel(rng, LATTICE, 0, 2, nnz=10)
        shift = rng.integers(0, 8, size=LATTICE.d + 1)
        moved, base = _seminorm(translate(f, shift)), _seminorm(f)
        if not (dominated(moved, base)[0] and dominated(base, moved)[0]):
            return False, {"shift": shift.tolist()}
    return True, {"samples": count}


def _antisymmetrize_contracts(rng, count):
    worst = 0.0
    for _ in range(count):
        f = _local(rng, 3)
        ok, detail = dominated(_seminorm(antisymmetrize(f)), _seminorm(f))
        worst = max(worst, detail["max_ratio"])
        if not ok:
            return False, detail
    return True, {"max_ratio": worst}


def _antisymmetrize_examples():
    p, q = 3, 17
    f = Kernel(0, 2, LATTICE, [[p, q]], [1.0])
    got = antisymmetrize(f).as_dict()
    expected = {(p, q): 0.5, (q, p): -0.5}
    twice = antisymmetrize(antisymmetrize(f)).as_dict()
    diagonal = antisymmetrize(Kernel(0, 2, LATTICE, [[p, p]], [1.0])).nnz
    ok = got == expected and twice == expected and diagonal == 0
    return ok, {"entries": {str(k): v.real for k, v in got.items()}, "diagonal_nnz": diagonal}


def main(config, seed):
    rng = suite_rng(seed, NAME)
    result = SuiteResult(NAME)
    result.check("leibniz rule for decay operators", lambda: _leibniz(rng, config.checks.leibniz_pairs))
    result.check("partial convolution bound", lambda: _convolution_bound(rng, 10))
    result.check("multi-line convolution bound", lambda: _multi_line_bound(rng, 5))
    result.check("seminorm permutation symmetry", lambda: _permutation_symmetry(rng, 5))
    result.check("decay operator factor order", lambda: _factor_order(rng, 5))
    result.check("seminorm translation invariance", lambda: _translation(rng, 5))
    result.check("antisymmetrization contracts the seminorm", lambda: _antisymmetrize_contracts(rng, 5))
    result.check("antisymmetrization examples", _antisymmetrize_examples)
    return result.to_record()
