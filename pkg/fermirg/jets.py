"""Complex Taylor jets on a saturated set.

A jet stores the normalized Taylor coefficients D^delta f(k) / delta! of a
function at a batch of points k. The multiindex axis comes first and the
batch axes follow, so products are Cauchy products taken pointwise.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .norm_domain import convolve, mfactorial, nilpotency_order, unit


@dataclass(frozen=True, eq=False)
class Jet:
    domain: object
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if coeffs.shape[0] != len(self.domain):
            raise UsageError(f"jet needs {len(self.domain)} leading entries, got {coeffs.shape[0]}")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def batch_shape(self):
        return self.coefficients.shape[1:]

    @property
    def value(self):
        return self.coefficients[0]

    @classmethod
    def constant(cls, domain, value):
        value = np.asarray(value, dtype=complex)
        coeffs = np.zeros((len(domain),) + value.shape, dtype=complex)
        coeffs[0] = value
        return cls(domain, coeffs)

    @classmethod
    def variable(cls, domain, axis, point):
        """The coordinate k_axis expanded around ``point``."""
        jet = cls.constant(domain, point)
        e = unit(domain.d, axis)
        if e in domain:
            jet.coefficients[domain.index[e]] = 1.0
        return jet

    @classmethod
    def univariate(cls, domain, axis, derivatives):
        """Jet of g(k_axis) from the derivative arrays [g, g', g'', ...] at the batch points."""
        first = np.asarray(derivatives[0], dtype=complex)
        coeffs = np.zeros((len(domain),) + first.shape, dtype=complex)
        for n, dn in enumerate(derivatives):
            key = tuple(n * x for x in unit(domain.d, axis))
            if key in domain:
                coeffs[domain.index[key]] = np.asarray(dn) / math.factorial(n)
        return cls(domain, coeffs)

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.domain != self.domain:
                raise UsageError("jets live on different saturated sets")
            return other
        return Jet.constant(self.domain, np.broadcast_to(np.asarray(other, dtype=complex), self.batch_shape))

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.domain, self.coefficients + other.coefficients)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.domain, -self.coefficients)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._coerce(other)
            return Jet(self.domain, convolve(self.coefficients, other.coefficients, self.domain))
        return Jet(self.domain, self.coefficients * np.asarray(other, dtype=complex))

    __rmul__ = __mul__

    def reciprocal(self):
        """1/f as a geometric series in the nilpotent part; needs a nonvanishing value."""
        a = self.value
        if np.any(a == 0):
            raise DomainError("reciprocal of a jet with vanishing value")
        hat = self.coefficients.copy()
        hat[0] = 0.0
        y = Jet(self.domain, -hat / a)
        term = Jet.constant(self.domain, np.ones_like(a))
        acc = term
        for _ in range(1, nilpotency_order(self.domain)):
            term = term * y
            acc = acc + term
        return Jet(self.domain, acc.coefficients / a)

    def __truediv__(self, other):
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def derivative(self, delta):
        """D^delta f at the batch points."""
        delta = tuple(delta)
        if delta not in self.domain:
            raise UsageError(f"derivative order {delta} is outside the jet domain")
        return mfactorial(delta) * self.coefficients[self.domain.index[delta]]


def cosine_jet(domain, axis, k):
    """cos(k_axis) with derivatives cos(k + n pi / 2)."""
    k = np.asarray(k, dtype=float)
    order = domain.max_degree + 1
    return Jet.univariate(domain, axis, [np.cos(k + n * math.pi / 2) for n in range(order)])


def polynomial_jet(domain, axis, poly, k):
    """Jet of a numpy Polynomial evaluated at k_axis."""
    order = domain.max_degree + 1
    derivatives = []
    current = poly
    for _ in range(order):
        derivatives.append(current(np.asarray(k, dtype=float)))
        current = current.deriv()
    return Jet.univariate(domain, axis, derivatives)
