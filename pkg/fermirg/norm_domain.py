"""Truncated formal power series with coefficients in [0, +inf] on saturated index sets.

Elements are stored as dense coefficient arrays aligned with the sorted member
list of their ``SaturatedSet``. Coefficients of indices outside the set are +inf
by convention and are never stored.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Iterable

import numpy as np

from .errors import DomainError, UsageError

logger = logging.getLogger(__name__)

INF_TOKEN = "inf"

MultiIndex = tuple


# ---------- multiindices ----------
def degree(delta):
    return int(sum(delta))


def spatial_degree(delta):
    return int(sum(delta[1:]))


def mfactorial(delta):
    return math.prod(math.factorial(int(x)) for x in delta)


def unit(d, j):
    """The j-th unit multiindex in dimension d + 1."""
    return tuple(1 if i == j else 0 for i in range(d + 1))


def add_indices(a, b):
    return tuple(x + y for x, y in zip(a, b))


def sub_indices(a, b):
    return tuple(x - y for x, y in zip(a, b))


def leq_index(a, b):
    return all(x <= y for x, y in zip(a, b))


# ---------- saturated sets ----------
@dataclass(frozen=True)
class SaturatedSet:
    """Finite downward closed set of multiindices of length d + 1."""

    d: int
    members: tuple

    def __post_init__(self):
        members = tuple(sorted({tuple(int(x) for x in m) for m in self.members}))
        object.__setattr__(self, "members", members)
        if self.d < 0:
            raise UsageError(f"dimension must be >= 0, got {self.d}")
        if not members:
            raise UsageError("saturated set must be nonempty")
        for m in members:
            if len(m) != self.d + 1 or any(x < 0 for x in m):
                raise UsageError(f"invalid multiindex {m} for d={self.d}")
        lookup = set(members)
        for m in members:
            for j, x in enumerate(m):
                if x > 0 and sub_indices(m, unit(self.d, j)) not in lookup:
                    raise UsageError(f"set is not downward closed at {m}")

    @classmethod
    def box(cls, d, r0, r):
        """{delta : delta_0 <= r0, |spatial delta| <= r}."""
        spatial = [s for s in itertools.product(range(r + 1), repeat=d) if sum(s) <= r]
        return cls(d, tuple((t,) + s for t in range(r0 + 1) for s in spatial))

    @classmethod
    def total_degree(cls, d, n):
        """{delta : |delta| <= n}."""
        return cls(d, tuple(m for m in itertools.product(range(n + 1), repeat=d + 1) if sum(m) <= n))

    @classmethod
    def origin(cls, d):
        return cls(d, ((0,) * (d + 1),))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, delta):
        return tuple(delta) in self.index

    @cached_property
    def index(self):
        return {m: i for i, m in enumerate(self.members)}

    @cached_property
    def max_degree(self):
        return max(degree(m) for m in self.members)

    @cached_property
    def splits(self):
        """For each member, the index pairs (i, j) with members[i] + members[j] == member.

        Pairs are listed in lexicographic order of the first factor, which fixes the
        summation order of every convolution on this set.
        """
        table = []
        for m in self.members:
            left, right = [], []
            for i, a in enumerate(self.members):
                if leq_index(a, m):
                    left.append(i)
                    right.append(self.index[sub_indices(m, a)])
            table.append((np.array(left, dtype=np.int64), np.array(right, dtype=np.int64)))
        return tuple(table)

    def to_record(self):
        return {"d": self.d, "members": [list(m) for m in self.members]}


@lru_cache(maxsize=None)
def n_of(domain):
    """Smallest n such that n * delta leaves the set for every nonzero member."""
    nonzero = [m for m in domain.members if any(m)]
    for n in range(1, domain.max_degree + 2):
        if all(tuple(n * x for x in m) not in domain for m in nonzero):
            return n
    raise AssertionError("unreachable: n = max_degree + 1 always works")


def nilpotency_order(domain):
    """Smallest n with (X - X_0)^n = 0 on the set for every X.

    Products of n nonzero indices have degree >= n, so this is max_degree + 1. It can
    exceed n_of, which only controls powers of a single index: t0^3 t1 survives in
    (t0 + t1)^4 on the box r0 = r = 3.
    """
    return domain.max_degree + 1


# ---------- arithmetic kernels ----------
def _xmul(a, b):
    """Elementwise product with 0 * inf = inf."""
    out = a * b
    mask = np.isinf(a) | np.isinf(b)
    if mask.any():
        out = np.where(mask, np.inf, out)
    return out


def convolve(a, b, domain):
    """Cauchy product on a saturated set for finite (possibly signed or complex) arrays.

    The leading axis indexes the members; trailing axes are carried along, which
    lets momentum-space jets evaluate many points at once.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    for k, (left, right) in enumerate(domain.splits):
        out[k] = np.sum(a[left] * b[right], axis=0)
    return out


def _nonneg_convolve(a, b, domain):
    out = np.empty(len(domain), dtype=float)
    for k, (left, right) in enumerate(domain.splits):
        out[k] = math.fsum(_xmul(a[left], b[right]))
    return out


# ---------- norm domain elements ----------
@dataclass(frozen=True, eq=False)
class NormElement:
    domain: SaturatedSet
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float).reshape(-1)
        if coeffs.shape != (len(self.domain),):
            raise UsageError(f"expected {len(self.domain)} coefficients, got {coeffs.shape}")
        if np.isnan(coeffs).any() or (coeffs < 0).any():
            raise DomainError("norm domain coefficients must lie in [0, +inf]")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    # constructors
    @classmethod
    def zero(cls, domain):
        return cls(domain, np.zeros(len(domain)))

    @classmethod
    def constant(cls, domain, value):
        coeffs = np.zeros(len(domain))
        coeffs[0] = value
        return cls(domain, coeffs)

    @classmethod
    def one(cls, domain):
        return cls.constant(domain, 1.0)

    @classmethod
    def infinite(cls, domain):
        return cls(domain, np.full(len(domain), np.inf))

    @classmethod
    def from_function(cls, domain, fn: Callable):
        return cls(domain, np.array([fn(m) for m in domain.members], dtype=float))

    @classmethod
    def from_mapping(cls, domain, mapping):
        """Coefficients from a {multiindex: value} mapping; missing members are zero."""
        coeffs = np.zeros(len(domain))
        for key, value in mapping.items():
            key = tuple(key)
            if key not in domain:
                raise UsageError(f"{key} is outside the domain")
            coeffs[domain.index[key]] = value
        return cls(domain, coeffs)

    # accessors
    @property
    def d(self):
        return self.domain.d

    @property
    def body(self):
        return float(self.coefficients[0])

    def __getitem__(self, delta):
        delta = tuple(delta)
        if delta not in self.domain:
            return math.inf
        return float(self.coefficients[self.domain.index[delta]])

    def items(self):
        return zip(self.domain.members, self.coefficients.tolist())

    def _check(self, other):
        if not isinstance(other, NormElement):
            raise UsageError(f"cannot combine NormElement with {type(other).__name__}")
        if other.domain != self.domain:
            raise UsageError("norm domain elements live on different saturated sets")

    # operators
    def __add__(self, other):
        return combine(self, other, "add")

    def __mul__(self, other):
        if isinstance(other, NormElement):
            return combine(self, other, "mul")
        return scale(self, other)

    __rmul__ = __mul__

    def __le__(self, other):
        return leq(self, other)

    def __eq__(self, other):
        if not isinstance(other, NormElement) or other.domain != self.domain:
            return NotImplemented
        return bool(np.array_equal(self.coefficients, other.coefficients))

    __hash__ = None

    def to_record(self):
        return {
            "d": self.d,
            "domain": [list(m) for m in self.domain.members],
            "coefficients": [[list(m), encode_value(v)] for m, v in self.items()],
        }


def encode_value(v):
    return INF_TOKEN if math.isinf(v) else float(v)


def from_record(record):
    domain = SaturatedSet(int(record["d"]), tuple(tuple(m) for m in record["domain"]))
    mapping = {
        tuple(m): (math.inf if v == INF_TOKEN else float(v)) for m, v in record["coefficients"]
    }
    return NormElement.from_mapping(domain, mapping)


# ---------- operations ----------
def combine(x, y, op):
    x._check(y)
    if op == "add":
        return NormElement(x.domain, x.coefficients + y.coefficients)
    if op == "max":
        return NormElement(x.domain, np.maximum(x.coefficients, y.coefficients))
    if op == "min":
        return NormElement(x.domain, np.minimum(x.coefficients, y.coefficients))
    if op == "mul":
        return NormElement(x.domain, _nonneg_convolve(x.coefficients, y.coefficients, x.domain))
    raise UsageError(f"unknown combine op {op!r}")


def scale(x, s):
    if s < 0 or math.isnan(s):
        raise DomainError(f"norm domain scalars must be nonnegative, got {s}")
    return NormElement(x.domain, _xmul(x.coefficients, np.float64(s)))


def leq(x, y):
    x._check(y)
    return bool(np.all(x.coefficients <= y.coefficients))


def maximum(elements: Iterable[NormElement]):
    elements = list(elements)
    out = elements[0]
    for e in elements[1:]:
        out = combine(out, e, "max")
    return out


def total(elements: Iterable[NormElement], domain):
    out = NormElement.zero(domain)
    for e in elements:
        out = out + e
    return out


def power(x, n):
    out = NormElement.one(x.domain)
    for _ in range(n):
        out = out * x
    return out


def geom_inverse(a, x):
    """(a - X)^{-1} as the geometric series, exact on the set after nilpotency_order terms."""
    x0 = x.body
    if math.isinf(x0) or not a - x0 > 0:
        raise DomainError(f"(a - X)^-1 needs a - X_0 > 0, got a={a}, X_0={x0}")
    shifted = x.coefficients.copy()
    shifted[0] = 0.0
    y = NormElement(x.domain, shifted / (a - x0))
    term = NormElement.one(x.domain)
    acc = term
    for _ in range(1, nilpotency_order(x.domain)):
        term = term * y
        acc = acc + term
    return scale(acc, 1.0 / (a - x0))


def derive(x, j):
    """Formal derivative in t_j; reads the implicit +inf outside the domain."""
    if not 0 <= j <= x.d:
        raise UsageError(f"axis {j} out of range for d={x.d}")
    out = np.empty(len(x.domain))
    for k, m in enumerate(x.domain.members):
        shifted = add_indices(m, unit(x.d, j))
        out[k] = (m[j] + 1) * x[shifted]
    return NormElement(x.domain, out)


def t_mu(x, mu):
    """T_mu X = X / mu^{d+1} + mu/(d+1) * sum_j (d_0 ... d_d) d_j X."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    mixed = x
    for axis in range(x.d + 1):
        mixed = derive(mixed, axis)
    tail = total((derive(mixed, j) for j in range(x.d + 1)), x.domain)
    return scale(x, 1.0 / mu ** (x.d + 1)) + scale(tail, mu / (x.d + 1))


def frak_c(r, r0, lam, Lam, d):
    """sum over {delta_0 <= r0, |spatial| <= r} of lam^delta_0 Lam^|spatial| t^delta."""
    domain = SaturatedSet.box(d, r0, r)
    return NormElement.from_function(domain, lambda m: lam ** m[0] * Lam ** spatial_degree(m))


def frak_e(x, Lam, c):
    """c / (1 - Lam X)."""
    return c * geom_inverse(1.0, scale(x, Lam))


def ratio(x, y):
    """Smallest c with X <= c Y, coefficientwise (+inf if none exists)."""
    x._check(y)
    best = 0.0
    for a, b in zip(x.coefficients.tolist(), y.coefficients.tolist()):
        if math.isinf(b) or a == 0.0:
            continue
        if math.isinf(a) or b == 0.0:
            return math.inf
        best = max(best, a / b)
    return best


# ---------- closed forms used as majorants ----------
@dataclass(frozen=True)
class Geometric:
    """scale * prod_i (1 - a t_i)^(-power)."""

    a: float
    power: int = 1
    scale: float = 1.0


@dataclass(frozen=True)
class Product:
    factors: tuple


@dataclass(frozen=True)
class Quotient:
    """numerator / (1 - denominator)."""

    numerator: object
    denominator: object


def rational_majorant(descriptor, domain):
    """Exact Taylor coefficients of a closed form, computed with norm domain arithmetic."""
    if isinstance(descriptor, Geometric):
        out = NormElement.one(domain)
        for axis in range(domain.d + 1):
            e = unit(domain.d, axis)
            if e not in domain:
                continue
            factor = geom_inverse(1.0, NormElement.from_mapping(domain, {e: descriptor.a}))
            for _ in range(descriptor.power):
                out = out * factor
        return scale(out, descriptor.scale)
    if isinstance(descriptor, Product):
        out = NormElement.one(domain)
        for f in descriptor.factors:
            out = out * rational_majorant(f, domain)
        return out
    if isinstance(descriptor, Quotient):
        num = rational_majorant(descriptor.numerator, domain)
        den = rational_majorant(descriptor.denominator, domain)
        if not 1.0 - den.body > 0:
            raise DomainError(f"denominator body 1 - g(0) = {1.0 - den.body} must be positive")
        return num * geom_inverse(1.0, den)
    raise UsageError(f"unsupported descriptor {descriptor!r}")


def quotient_form(a, lam):
    """G^2 / (1 - lam G) with G = prod_i (1 - a t_i)^(-1)."""
    return Quotient(Geometric(a, power=2), Geometric(a, scale=lam))


def quotient_bound(domain, a):
    return NormElement.from_function(
        domain, lambda m: 16.0 / 3.0 * (4 * (domain.d + 1) * a) ** degree(m)
    )


# ---------- analytic functions of an element ----------
def exp_derivatives(x0, n):
    return [math.exp(x0)] * n


def geometric_derivatives(x0, n):
    if not x0 < 1:
        raise DomainError(f"1/(1 - x) is not analytic at {x0}")
    return [math.factorial(k) / (1.0 - x0) ** (k + 1) for k in range(n)]


TAYLOR_FORMS = {"exp": exp_derivatives, "geometric": geometric_derivatives}


def apply_analytic(form, x):
    """f(X) = sum_n f^(n)(X_0)/n! (X - X_0)^n, a finite sum on the set."""
    n = nilpotency_order(x.domain)
    derivs = TAYLOR_FORMS[form](x.body, n)
    shifted = x.coefficients.copy()
    shifted[0] = 0.0
    hat = NormElement(x.domain, shifted)
    term = NormElement.one(x.domain)
    acc = NormElement.zero(x.domain)
    for k in range(n):
        acc = acc + scale(term, derivs[k] / math.factorial(k))
        term = term * hat
    return acc


def analytic_constant(form, x0, beta, n):
    """max_{k < n} f^(k)(X_0) / (k! beta^k)."""
    derivs = TAYLOR_FORMS[form](x0, n)
    return max(derivs[k] / (math.factorial(k) * beta**k) for k in range(n))


def resolvent_constant(c, mu):
    """max_delta [c / (1 - mu c)]_delta / c_delta."""
    return ratio(c * geom_inverse(1.0, scale(c, mu)), c)


def restrict(x, domain):
    """Coefficients of X on a smaller saturated set (+inf where X has none)."""
    if domain.d != x.d:
        raise UsageError("restriction needs matching dimensions")
    return NormElement.from_function(domain, lambda delta: x[delta])
