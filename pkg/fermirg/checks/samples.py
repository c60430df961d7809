"""Seeded random inputs shared by the verify suites.

Coefficients are drawn from the grid k/16 wherever the property is claimed
exactly, so sums and products of draws stay representable.
"""

import itertools

import numpy as np

from ..grassmann import CovarianceMatrix, GrassmannElement
from ..kernels import Kernel, Lattice
from ..norm_domain import NormElement, SaturatedSet

GRID = 16


def grid_values(rng, size, high=2.0, low=0.0):
    return rng.integers(int(low * GRID), int(high * GRID) + 1, size=size) / GRID


def norm_element(rng, domain, high=2.0, body=None):
    coeffs = grid_values(rng, len(domain), high)
    if body is not None:
        coeffs[0] = body
    return NormElement(domain, coeffs)


def small_body_pair(rng, domain, limit):
    """Two elements whose bodies sum to less than ``limit``."""
    ceiling = int(limit * GRID) - 1
    a = int(rng.integers(0, ceiling + 1))
    b = int(rng.integers(0, ceiling - a + 1))
    return norm_element(rng, domain, 1.0, a / GRID), norm_element(rng, domain, 1.0, b / GRID)


def domains(d_values=(1, 2), r0=3, r=3):
    return [SaturatedSet.box(d, r0, r) for d in d_values]


def local_points(rng, lattice, count, arity, extent):
    """Base points with time and spatial indices in [0, extent); no wrap-around for extent <= L / 2."""
    t = rng.integers(0, min(extent, lattice.T), size=(count, arity))
    xs = rng.integers(0, min(extent, lattice.L), size=(count, arity, lattice.d))
    sigma = rng.integers(0, 2, size=(count, arity))
    a = rng.integers(0, 2, size=(count, arity))
    return np.asarray(lattice.encode(t, xs, sigma, a), dtype=np.int64)


def random_kernel(rng, lattice, m, n, nnz=12, extent=None, exact=True):
    """Sparse kernel; ``extent`` localizes the support, ``exact`` keeps values on the k/16 grid."""
    if extent is None:
        points = rng.integers(0, lattice.n_points, size=(nnz, m + n))
    else:
        points = local_points(rng, lattice, nnz, m + n, extent)
    if exact:
        values = (rng.integers(-2 * GRID, 2 * GRID + 1, size=nnz) + 1j * rng.integers(-GRID, GRID + 1, size=nnz)) / GRID
    else:
        values = rng.normal(size=nnz) + 1j * rng.normal(size=nnz)
    return Kernel(m, n, lattice, points, values)


def random_antisymmetric(rng, size, scale=1.0, complex_entries=True):
    a = rng.normal(size=(size, size))
    if complex_entries:
        a = a + 1j * rng.normal(size=(size, size))
    a = np.triu(a, 1) * scale
    return a - a.T


def covariance_kernel(dense, lattice):
    kernel = Kernel.from_dense(dense, lattice, 0, 2)
    return kernel.with_entries(kernel.points, kernel.values, antisymmetric_internal=True)


def embed(small, lattice, internals):
    """Dense lattice matrix carrying ``small`` on the given base points."""
    P = lattice.n_points
    dense = np.zeros((P, P), dtype=complex)
    dense[np.ix_(internals, internals)] = small
    return dense


def embedded_covariance(rng, lattice, internals, scale=0.5):
    """A covariance living on the given base points, as a dense lattice matrix and a CovarianceMatrix."""
    small = random_antisymmetric(rng, len(internals), scale)
    return embed(small, lattice, internals), CovarianceMatrix(small)


def even_element(rng, gens, degrees=(2, 4), count=10, scale=1.0):
    """Random even element built from monomials of the given degrees."""
    terms = {}
    for _ in range(count):
        k = int(rng.choice(degrees))
        bits = rng.choice(gens.size, size=k, replace=False)
        mask = int(sum(1 << int(b) for b in bits))
        terms[mask] = terms.get(mask, 0) + scale * (rng.normal() + 1j * rng.normal())
    return GrassmannElement(gens, terms)


def any_element(rng, gens, count=12):
    terms = {}
    for _ in range(count):
        k = int(rng.integers(0, gens.size + 1))
        bits = rng.choice(gens.size, size=k, replace=False)
        terms[int(sum(1 << int(b) for b in bits))] = rng.normal() + 1j * rng.normal()
    return GrassmannElement(gens, terms)


def tiny_lattice(sites=2, slices=1):
    """1d lattice with ``4 * sites * slices`` base points."""
    return Lattice(1, sites, slices)


def multiindices_below(delta):
    return itertools.product(*(range(x + 1) for x in delta))


def dominated(x, y, rtol=1e-12):
    """X <= Y coefficientwise up to a relative rounding slack; also returns ratio(X, Y)."""
    a, b = x.coefficients, y.coefficients
    finite = np.isfinite(b)
    ok = bool(np.all(a[finite] <= b[finite] * (1 + rtol) + 1e-300))
    return ok, {"max_ratio": float(np.max(np.where(finite & (b > 0), a / np.where(b > 0, b, 1.0), 0.0)))}
