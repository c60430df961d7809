"""Finite Grassmann algebra with external and internal generators.

Monomials are bitmasks over an ordered generator list: external generators
phi(eta) take bits [0, E) and internal generators psi(xi) take bits [E, E + I).
A mask stands for the product of its generators in ascending bit order.
"""

import cmath
import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from pfapack import pfaffian as pf

from .errors import DomainError, NumericError, UsageError
from .kernels import Kernel, seminorm_1inf
from .norm_domain import NormElement

logger = logging.getLogger(__name__)

EXACT_GENERATOR_CAP = 22
ORACLE_GENERATOR_CAP = 12
RECURSIVE_PFAFFIAN_MAX = 8


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _merge_sign(a, b):
    """Sign of reordering the concatenation a.b (each ascending) into ascending order."""
    swaps = 0
    for j in _bits(b):
        swaps += (a >> (j + 1)).bit_count()
    return -1 if swaps & 1 else 1


def sequence_sign(seq):
    """Sign that sorts ``seq``; 0 when it repeats an entry."""
    if len(set(seq)) != len(seq):
        return 0
    inversions = sum(1 for i, j in itertools.combinations(range(len(seq)), 2) if seq[i] > seq[j])
    return -1 if inversions & 1 else 1


# ---------- pfaffians ----------
def _pfaffian_recursive(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n == 2:
        return complex(a[0, 1])
    total = 0.0j
    rest = list(range(1, n))
    for k, j in enumerate(rest):
        if a[0, j] == 0:
            continue
        keep = [x for x in rest if x != j]
        sign = -1 if k % 2 else 1
        total += sign * a[0, j] * _pfaffian_recursive(a[np.ix_(keep, keep)])
    return total


def pfaffian(a, verify=False):
    """Pfaffian with Pf([[0, c], [-c, 0]]) = c."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise UsageError("pfaffian needs a square matrix")
    if n % 2:
        raise DomainError(f"pfaffian of odd dimension {n}")
    value = _pfaffian_recursive(a) if n <= RECURSIVE_PFAFFIAN_MAX else complex(pf.pfaffian(a))
    if verify and n:
        det = np.linalg.det(a)
        if abs(value * value - det) > 1e-10 * max(1.0, abs(det)):
            raise NumericError("Pf^2 != det", {"pf2": value * value, "det": det})
    return value


# ---------- generators and covariances ----------
@dataclass(frozen=True)
class GeneratorSet:
    """Ordered external then internal generators, labelled by base points of ``lattice``."""

    lattice: object
    externals: tuple = ()
    internals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "externals", tuple(int(p) for p in self.externals))
        object.__setattr__(self, "internals", tuple(int(p) for p in self.internals))
        if len(set(self.externals)) != len(self.externals) or len(set(self.internals)) != len(self.internals):
            raise UsageError("generator labels must be distinct within each block")

    @property
    def E(self):
        return len(self.externals)

    @property
    def I(self):  # noqa: E743
        return len(self.internals)

    @property
    def size(self):
        return self.E + self.I

    @property
    def external_mask(self):
        return (1 << self.E) - 1

    @property
    def internal_mask(self):
        return ((1 << self.size) - 1) ^ self.external_mask

    def external_bit(self, point):
        try:
            return self.externals.index(int(point))
        except ValueError:
            raise UsageError(f"base point {point} carries no external generator") from None

    def internal_bit(self, point):
        try:
            return self.E + self.internals.index(int(point))
        except ValueError:
            raise UsageError(f"base point {point} carries no internal generator") from None


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Antisymmetric matrix over the internal generators, built from its strict upper triangle."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise UsageError("covariance must be a square matrix")
        upper = np.triu(m, 1)
        object.__setattr__(self, "matrix", upper - upper.T)

    @classmethod
    def from_kernel(cls, C, points):
        """Restrict a 2-point covariance kernel to the given base points (in order)."""
        dense = C.to_dense()
        idx = np.asarray(points, dtype=np.int64)
        return cls(dense[np.ix_(idx, idx)])

    @property
    def size(self):
        return self.matrix.shape[0]

    def __add__(self, other):
        return CovarianceMatrix(self.matrix + other.matrix)

    def scale(self, s):
        return CovarianceMatrix(self.matrix * s)

    def restrict(self, indices):
        idx = list(indices)
        return self.matrix[np.ix_(idx, idx)]

    def moment(self, indices):
        idx = list(indices)
        if len(idx) % 2:
            return 0.0j
        if len(set(idx)) != len(idx):
            return 0.0j
        return pfaffian(self.restrict(idx))


# ---------- elements ----------
@dataclass(frozen=True, eq=False)
class GrassmannElement:
    gens: GeneratorSet
    terms: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        clean = {int(k): complex(v) for k, v in self.terms.items() if v != 0}
        object.__setattr__(self, "terms", clean)

    @classmethod
    def zero(cls, gens):
        return cls(gens, {})

    @classmethod
    def constant(cls, gens, value):
        return cls(gens, {0: value})

    @classmethod
    def external(cls, gens, point):
        return cls(gens, {1 << gens.external_bit(point): 1.0})

    @classmethod
    def internal(cls, gens, point):
        return cls(gens, {1 << gens.internal_bit(point): 1.0})

    @classmethod
    def generator(cls, gens, bit):
        if not 0 <= bit < gens.size:
            raise UsageError(f"generator {bit} out of range")
        return cls(gens, {1 << bit: 1.0})

    @property
    def body(self):
        return self.terms.get(0, 0.0j)

    def _check(self, other):
        if other.gens != self.gens:
            raise UsageError("Grassmann elements live on different generator sets")

    def __add__(self, other):
        if not isinstance(other, GrassmannElement):
            return self + GrassmannElement.constant(self.gens, other)
        self._check(other)
        out = defaultdict(complex, self.terms)
        for k, v in other.terms.items():
            out[k] += v
        return GrassmannElement(self.gens, out)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        return GrassmannElement(self.gens, {k: v * s for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, GrassmannElement):
            return product(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, s):
        return self.scale(1.0 / s)

    def degree(self):
        return max((k.bit_count() for k in self.terms), default=0)

    def is_even(self):
        return all(k.bit_count() % 2 == 0 for k in self.terms)

    def truncate(self, degree_cap):
        if degree_cap is None:
            return self
        return GrassmannElement(self.gens, {k: v for k, v in self.terms.items() if k.bit_count() <= degree_cap})

    def part(self, m, n):
        """Monomials with m external and n internal generators."""
        ext = self.gens.external_mask
        return GrassmannElement(
            self.gens,
            {k: v for k, v in self.terms.items() if (k & ext).bit_count() == m and (k & ~ext).bit_count() == n},
        )

    def arities(self):
        ext = self.gens.external_mask
        return sorted({((k & ext).bit_count(), (k & ~ext).bit_count()) for k in self.terms})

    def max_abs(self):
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def is_close(self, other, rtol=1e-9, atol=0.0):
        diff = (self - other).max_abs()
        scale = max(self.max_abs(), other.max_abs())
        return diff <= atol + rtol * scale

    def internal_to_external(self, gens):
        """Relabel internal generators as the external generators of ``gens`` with equal base points."""
        out = {}
        for k, v in self.terms.items():
            if k & self.gens.external_mask:
                raise UsageError("element already depends on external generators")
            bits = [gens.external_bit(self.gens.internals[b - self.gens.E]) for b in _bits(k)]
            sign = sequence_sign(bits)
            mask = sum(1 << b for b in bits)
            out[mask] = out.get(mask, 0) + sign * v
        return GrassmannElement(gens, out)

    def listing(self):
        """(generator labels, coefficient) pairs in canonical order."""
        rows = []
        for k in sorted(self.terms, key=lambda m: (m.bit_count(), m)):
            labels = [
                f"phi{self.gens.externals[b]}" if b < self.gens.E else f"psi{self.gens.internals[b - self.gens.E]}"
                for b in _bits(k)
            ]
            rows.append((labels, self.terms[k]))
        return rows


def product(F, G, degree_cap=None):
    F._check(G)
    out = defaultdict(complex)
    for a, ca in F.terms.items():
        for b, cb in G.terms.items():
            if a & b:
                continue
            mask = a | b
            if degree_cap is not None and mask.bit_count() > degree_cap:
                continue
            out[mask] += _merge_sign(a, b) * ca * cb
    return GrassmannElement(F.gens, out)


def power_series(x, coefficients, degree_cap=None):
    """sum_k coefficients[k] x^k, stopping once x^k vanishes."""
    acc = GrassmannElement.constant(x.gens, coefficients[0])
    term = GrassmannElement.constant(x.gens, 1.0)
    for c in coefficients[1:]:
        term = product(term, x, degree_cap)
        if not term.terms:
            break
        acc = acc + term.scale(c)
    return acc


def grexp(F, degree_cap=None):
    b = F.body
    x = F - b
    n = x.gens.size
    series = power_series(x, [1.0 / math.factorial(k) for k in range(n + 1)], degree_cap)
    return series.scale(cmath.exp(b))


def grlog(F, degree_cap=None):
    b = F.body
    if b == 0:
        raise DomainError("logarithm of an element with zero body")
    y = F.scale(1.0 / b) - 1.0
    n = y.gens.size
    coeffs = [0.0] + [(-1) ** (k + 1) / k for k in range(1, n + 1)]
    return power_series(y, coeffs, degree_cap) + cmath.log(b)


# ---------- Gaussian integration ----------
def _partners(gens, C):
    if C.size != gens.I:
        raise UsageError(f"covariance of size {C.size} does not match {gens.I} internal generators")
    partners = []
    for i in range(gens.I):
        mask = 0
        for j in np.nonzero(C.matrix[i])[0]:
            mask |= 1 << (gens.E + int(j))
        partners.append(mask)
    return partners


def shift_convolve(F, C, degree_cap=None):
    """int F(phi, psi + zeta) dmu_C(zeta), by integration by parts on the internal letters.

    Each monomial expands into its partial matchings: the lowest letter either
    stays, or pairs with a later letter j at weight C_ij times (-1)^(position of j).
    """
    gens = F.gens
    E = gens.E
    partners = _partners(gens, C)
    matrix = C.matrix
    out = defaultdict(complex)
    internal_mask = gens.internal_mask

    def expand(rest, kept, coeff):
        if not rest:
            out[kept] += coeff
            return
        if degree_cap is not None and kept.bit_count() > degree_cap:
            return
        low = rest & -rest
        i = low.bit_length() - 1
        rest ^= low
        expand(rest, kept | low, coeff)
        candidates = rest & partners[i - E]
        while candidates:
            bit = candidates & -candidates
            candidates ^= bit
            j = bit.bit_length() - 1
            sign = -1 if (rest & (bit - 1)).bit_count() & 1 else 1
            expand(rest ^ bit, kept, coeff * sign * matrix[i - E, j - E])

    for mask, value in F.terms.items():
        expand(mask & internal_mask, mask & ~internal_mask, value)
    result = GrassmannElement(gens, out)
    return result.truncate(degree_cap)


def gaussian_integral(F, C):
    """Integrate out every internal generator; monomials become Pfaffians of C."""
    gens = F.gens
    out = defaultdict(complex)
    internal_mask = gens.internal_mask
    for mask, value in F.terms.items():
        letters = [b - gens.E for b in _bits(mask & internal_mask)]
        if len(letters) % 2:
            continue
        out[mask & ~internal_mask] += value * C.moment(letters)
    return GrassmannElement(gens, out)


def shift_convolve_doubled(F, C):
    """Reference path: substitute psi -> psi + zeta with fresh zeta generators, then integrate zeta."""
    gens = F.gens
    if gens.size > ORACLE_GENERATOR_CAP:
        raise UsageError(f"doubled-generator path is limited to {ORACLE_GENERATOR_CAP} generators")
    big = GeneratorSet(gens.lattice, tuple(range(gens.size)), tuple(range(gens.I)))
    acc = GrassmannElement.zero(big)
    for mask, value in F.terms.items():
        term = GrassmannElement.constant(big, value)
        for b in _bits(mask):
            factor = GrassmannElement.generator(big, b)
            if b >= gens.E:
                factor = factor + GrassmannElement.generator(big, gens.size + b - gens.E)
            term = product(term, factor)
        acc = acc + term
    integrated = gaussian_integral(acc, C)
    return GrassmannElement(gens, integrated.terms)


def wick_order(F, C, degree_cap=None):
    """:F:_C, the inverse of Gaussian convolution with C."""
    return shift_convolve(F, C.scale(-1.0), degree_cap)


def omega(W, C, degree_cap=None):
    """log (1/Z) int exp(W(phi, psi + zeta)) dmu_C(zeta), with Z the body of the integral."""
    if not W.is_even():
        raise UsageError("the renormalization group map acts on even elements")
    if W.gens.size > EXACT_GENERATOR_CAP:
        raise UsageError(f"exact backend is limited to {EXACT_GENERATOR_CAP} generators")
    X = shift_convolve(grexp(W, degree_cap), C, degree_cap)
    Z = X.body
    if Z == 0:
        raise DomainError("normalization Z vanishes")
    return grlog(X.scale(1.0 / Z), degree_cap)


# ---------- power series in the coupling ----------
@dataclass(frozen=True, eq=False)
class LambdaSeries:
    """sum_k lambda^k orders[k], truncated at order n_max; products respect ``degree_cap``."""

    orders: tuple
    degree_cap: object = None

    @property
    def gens(self):
        return self.orders[0].gens

    @property
    def n_max(self):
        return len(self.orders) - 1

    @classmethod
    def from_element(cls, F, n_max, order=1, degree_cap=None):
        zero = GrassmannElement.zero(F.gens)
        orders = [F if k == order else zero for k in range(n_max + 1)]
        return cls(tuple(orders), degree_cap)

    def __add__(self, other):
        return LambdaSeries(tuple(a + b for a, b in zip(self.orders, other.orders)), self.degree_cap)

    def __sub__(self, other):
        return LambdaSeries(tuple(a - b for a, b in zip(self.orders, other.orders)), self.degree_cap)

    def scale(self, s):
        return LambdaSeries(tuple(a.scale(s) for a in self.orders), self.degree_cap)

    def __mul__(self, other):
        if not isinstance(other, LambdaSeries):
            return self.scale(other)
        out = []
        for k in range(self.n_max + 1):
            acc = GrassmannElement.zero(self.gens)
            for i in range(k + 1):
                a, b = self.orders[i], other.orders[k - i]
                if a.terms and b.terms:
                    acc = acc + product(a, b, self.degree_cap)
            out.append(acc)
        return LambdaSeries(tuple(out), self.degree_cap)

    def one(self):
        return LambdaSeries.from_element(GrassmannElement.constant(self.gens, 1.0), self.n_max, 0, self.degree_cap)

    def _series(self, coefficients):
        if self.orders[0].terms:
            raise UsageError("series functions need a vanishing order-zero term")
        acc = self.one().scale(coefficients[0])
        term = self.one()
        for c in coefficients[1:]:
            term = term * self
            acc = acc + term.scale(c)
        return acc

    def exp(self):
        return self._series([1.0 / math.factorial(k) for k in range(self.n_max + 1)])

    def log1p(self):
        return self._series([0.0] + [(-1) ** (k + 1) / k for k in range(1, self.n_max + 1)])

    def convolve(self, C):
        return LambdaSeries(tuple(shift_convolve(a, C, self.degree_cap) for a in self.orders), self.degree_cap)

    def bodies(self):
        return [a.body for a in self.orders]

    def scalar_inverse(self):
        """1/Z for a series of constants Z."""
        z = self.bodies()
        if z[0] == 0:
            raise DomainError("normalization Z vanishes at order zero")
        inv = [1.0 / z[0]]
        for k in range(1, len(z)):
            inv.append(-sum(z[i] * inv[k - i] for i in range(1, k + 1)) / z[0])
        return LambdaSeries(tuple(GrassmannElement.constant(self.gens, c) for c in inv), self.degree_cap)

    def evaluate(self, lam):
        acc = GrassmannElement.zero(self.gens)
        for k, a in enumerate(self.orders):
            acc = acc + a.scale(lam**k)
        return acc


def omega_series(V, C, n_max, degree_cap="auto"):
    """Omega_C(lambda V) as a power series in lambda through order n_max.

    ``degree_cap="auto"`` keeps Grassmann degree <= 4 n_max in intermediate products;
    None disables the cap, which is exact for every retained order.
    """
    if degree_cap == "auto":
        degree_cap = 4 * n_max
    series = LambdaSeries.from_element(V, n_max, 1, degree_cap)
    logger.debug("▶ Omega series: %d monomials, n_max=%d, cap=%s", len(V.terms), n_max, degree_cap)
    X = series.exp().convolve(C)
    X = X * X.scalar_inverse()
    return (X - X.one()).log1p()


# ---------- kernels <-> elements ----------
def gr_from_kernel(f, gens):
    """Gr(f) = int f(eta, xi) phi(eta_1)..phi(eta_m) psi(xi_1)..psi(xi_n) with lattice weights."""
    weight = f.lattice.vol ** f.arity
    out = defaultdict(complex)
    for row, value in zip(f.points.tolist(), f.values.tolist()):
        bits = [gens.external_bit(p) for p in row[: f.m]] + [gens.internal_bit(p) for p in row[f.m :]]
        sign = sequence_sign(bits)
        if sign:
            out[sum(1 << b for b in bits)] += sign * weight * value
    return GrassmannElement(gens, out)


def monomial_points(F):
    """(base points in generator order, coefficient) for every monomial of F."""
    labels = F.gens.externals + F.gens.internals
    for mask, coeff in F.terms.items():
        yield [labels[b] for b in _bits(mask)], coeff


def kernel_from_gr(F, m, n):
    """The antisymmetric kernel whose Gr is the degree-(m, n) part of F."""
    gens = F.gens
    lattice = gens.lattice
    weight = 1.0 / (lattice.vol ** (m + n) * math.factorial(m) * math.factorial(n))
    points, values = [], []
    part = F.part(m, n)
    ext_perms = [(p, sequence_sign(p)) for p in itertools.permutations(range(m))]
    int_perms = [(p, sequence_sign(p)) for p in itertools.permutations(range(n))]
    for mask, coeff in part.terms.items():
        bits = list(_bits(mask))
        ext = [gens.externals[b] for b in bits[:m]]
        internal = [gens.internals[b - gens.E] for b in bits[m:]]
        for pe, se in ext_perms:
            for pi, si in int_perms:
                points.append([ext[i] for i in pe] + [internal[i] for i in pi])
                values.append(se * si * coeff * weight)
    return Kernel(
        m,
        n,
        lattice,
        np.asarray(points, dtype=np.int64).reshape(len(points), m + n),
        np.asarray(values, dtype=complex),
        antisymmetric_external=True,
        antisymmetric_internal=True,
    )


def integrate_partial(f, C_dense, n_prime):
    """f'(eta; xi_{n'+1}..xi_n) = int f(eta; xi) [int psi(xi_1)..psi(xi_n') dmu_C] dxi_1..dxi_n'."""
    if not 0 <= n_prime <= f.n:
        raise UsageError(f"cannot integrate {n_prime} of {f.n} internal slots")
    C = CovarianceMatrix(C_dense)
    vol = f.lattice.vol
    points, values = [], []
    for row, value in zip(f.points.tolist(), f.values.tolist()):
        moment = C.moment(row[f.m : f.m + n_prime])
        if moment == 0:
            continue
        points.append(row[: f.m] + row[f.m + n_prime :])
        values.append(value * moment * vol**n_prime)
    return Kernel(
        f.m, f.n - n_prime, f.lattice, np.asarray(points, dtype=np.int64).reshape(-1, f.arity - n_prime), values
    )


# ---------- covariance constants ----------
@dataclass(frozen=True)
class SEstimate:
    """max |moment|^(1/m); a lower bound for the supremum when not exhaustive."""

    value: float
    exhaustive: bool
    samples: int


def s_empirical(C, m_max, rng=None, samples=10_000):
    P = C.size
    if m_max > P:
        raise UsageError(f"m_max={m_max} exceeds the {P} generators")
    best = 0.0
    orders = list(range(2, m_max + 1, 2))
    if not orders:
        return SEstimate(0.0, True, 0)
    if P <= 8 and m_max <= 6:
        count = 0
        for m in orders:
            for idx in itertools.combinations(range(P), m):
                best = max(best, abs(C.moment(idx)) ** (1.0 / m))
                count += 1
        return SEstimate(best, True, count)
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(samples):
        m = int(rng.choice(orders))
        idx = rng.choice(P, size=m, replace=False)
        best = max(best, abs(C.moment(idx.tolist())) ** (1.0 / m))
    return SEstimate(best, False, samples)


def n_functional(W, c, b, alpha, domain, rho=None, delta_max=4):
    """(1/b^2) c sum_{m,n} alpha^n b^n rho(m, n) ||W_{m,n}||."""
    if b <= 0 or alpha <= 0:
        raise UsageError("b and alpha must be positive")
    acc = NormElement.zero(domain)
    for m, n in W.arities():
        norm = seminorm_1inf(kernel_from_gr(W, m, n), domain, delta_max)
        weight = (alpha * b) ** n * (1.0 if rho is None else rho(m, n))
        acc = acc + norm * weight
    return (c * acc) * (1.0 / b**2)
