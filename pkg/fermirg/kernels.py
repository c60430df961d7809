"""Kernels on a finite periodic spacetime lattice and their L1-Linf seminorms.

The base space is lattice spacetime x spin x conjugation index. A base point is
encoded as one integer ``p = ((t * L**d + x) * 2 + sigma) * 2 + a`` so that kernels
can be stored as integer point arrays plus complex values.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .norm_domain import NormElement, combine, degree, mfactorial

logger = logging.getLogger(__name__)


# ---------- lattice ----------
@dataclass(frozen=True)
class Lattice:
    d: int
    L: int
    T: int
    dx: tuple = (1.0,)
    dt: float = 1.0

    def __post_init__(self):
        dx = tuple(float(x) for x in np.broadcast_to(np.asarray(self.dx, dtype=float), (self.d,)))
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dt", float(self.dt))
        if self.d < 1 or self.L < 1 or self.T < 1:
            raise UsageError(f"lattice needs d, L, T >= 1, got d={self.d} L={self.L} T={self.T}")
        if self.dt <= 0 or any(x <= 0 for x in dx):
            raise UsageError("lattice spacings must be positive")

    @property
    def sites(self):
        return self.L**self.d

    @property
    def n_points(self):
        return self.T * self.sites * 4

    @property
    def vol(self):
        return self.dt * math.prod(self.dx)

    @property
    def periods(self):
        return (self.T,) + (self.L,) * self.d

    @property
    def spacings(self):
        return np.array((self.dt,) + self.dx)

    def encode(self, t, x, sigma, a):
        """Point index from time slice, spatial index (tuple or array with last axis d), spin, a."""
        x = np.asarray(x)
        xlin = np.ravel_multi_index(tuple(np.moveaxis(x, -1, 0)), (self.L,) * self.d) if x.ndim else int(x)
        return ((np.asarray(t) * self.sites + xlin) * 2 + np.asarray(sigma)) * 2 + np.asarray(a)

    def decode(self, p):
        """(t, spatial indices with last axis d, sigma, a) for point indices p."""
        p = np.asarray(p)
        a = p % 2
        sigma = (p // 2) % 2
        site = p // 4
        t = site // self.sites
        xs = np.stack(np.unravel_index(site % self.sites, (self.L,) * self.d), axis=-1)
        return t, xs, sigma, a

    def index_coords(self, p):
        t, xs, _, _ = self.decode(p)
        return np.concatenate([np.asarray(t)[..., None], xs], axis=-1)

    def differences(self, p, q):
        """Minimal-image physical coordinate differences xi_p - xi_q, time first."""
        raw = self.index_coords(p) - self.index_coords(q)
        periods = np.array(self.periods)
        wrapped = np.mod(raw, periods)
        wrapped = np.where(2 * wrapped > periods, wrapped - periods, wrapped)
        return wrapped * self.spacings

    def translate(self, p, shift):
        t, xs, sigma, a = self.decode(p)
        shift = np.asarray(shift)
        t = np.mod(t + shift[0], self.T)
        xs = np.mod(xs + shift[1:], self.L)
        return self.encode(t, xs, sigma, a)

    def to_record(self):
        return {"d": self.d, "L": self.L, "T": self.T, "dx": list(self.dx), "dt": self.dt}


# ---------- kernels ----------
def _coalesce(points, values):
    points = np.asarray(points, dtype=np.int64)
    values = np.asarray(values, dtype=complex).reshape(-1)
    if points.shape[1] == 0:
        total = values.sum() if values.size else 0.0
        if total == 0:
            return np.zeros((0, 0), dtype=np.int64), np.zeros(0, dtype=complex)
        return np.zeros((1, 0), dtype=np.int64), np.array([total], dtype=complex)
    if values.size == 0:
        return points.reshape(0, points.shape[1]), values
    unique, inverse = np.unique(points, axis=0, return_inverse=True)
    summed = np.zeros(len(unique), dtype=complex)
    np.add.at(summed, inverse.reshape(-1), values)
    keep = summed != 0
    return unique[keep], summed[keep]


@dataclass(frozen=True, eq=False)
class Kernel:
    """Sparse function on B^m x B^n; columns are the m external then the n internal slots."""

    m: int
    n: int
    lattice: Lattice
    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    antisymmetric_external: bool = False
    antisymmetric_internal: bool = False

    def __post_init__(self):
        arity = self.m + self.n
        points = np.asarray(self.points, dtype=np.int64).reshape(-1 if arity else len(self.values), arity)
        if points.size and (points.min() < 0 or points.max() >= self.lattice.n_points):
            raise UsageError("kernel point index outside the lattice")
        points, values = _coalesce(points, self.values)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    @classmethod
    def zero(cls, m, n, lattice):
        return cls(m, n, lattice, np.zeros((0, m + n), dtype=np.int64), np.zeros(0))

    @classmethod
    def scalar(cls, value, lattice):
        return cls(0, 0, lattice, np.zeros((1, 0), dtype=np.int64), np.array([value]))

    @classmethod
    def from_dense(cls, array, lattice, m, n):
        """Kernel from a dense array with one axis of length n_points per slot (m + n <= 2)."""
        array = np.asarray(array, dtype=complex)
        if m + n > 2 or array.ndim != m + n:
            raise UsageError("dense kernels are limited to total arity 2")
        idx = np.nonzero(array)
        return cls(m, n, lattice, np.stack(idx, axis=-1), array[idx])

    @property
    def arity(self):
        return self.m + self.n

    @property
    def nnz(self):
        return len(self.values)

    def to_dense(self):
        if self.arity > 2:
            raise UsageError("dense kernels are limited to total arity 2")
        out = np.zeros((self.lattice.n_points,) * self.arity, dtype=complex)
        if self.nnz:
            out[tuple(self.points.T)] = self.values
        elif self.arity == 0:
            out = np.zeros((), dtype=complex)
        return out

    def as_dict(self):
        return {tuple(p): v for p, v in zip(self.points.tolist(), self.values.tolist())}

    def with_entries(self, points, values, **flags):
        return Kernel(
            self.m,
            self.n,
            self.lattice,
            points,
            values,
            flags.get("antisymmetric_external", self.antisymmetric_external),
            flags.get("antisymmetric_internal", self.antisymmetric_internal),
        )

    def _check(self, other):
        if (other.m, other.n) != (self.m, self.n) or other.lattice != self.lattice:
            raise UsageError("kernels differ in arity or lattice")

    def __add__(self, other):
        self._check(other)
        return self.with_entries(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.values, other.values]),
            antisymmetric_external=self.antisymmetric_external and other.antisymmetric_external,
            antisymmetric_internal=self.antisymmetric_internal and other.antisymmetric_internal,
        )

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, s):
        return self.with_entries(self.points, self.values * s)

    def conj(self):
        return self.with_entries(self.points, np.conj(self.values))

    def max_abs(self):
        return float(np.abs(self.values).max()) if self.nnz else 0.0

    def to_record(self):
        return {
            "m": self.m,
            "n": self.n,
            "lattice": self.lattice.to_record(),
            "entries": [
                [p, float(v.real), float(v.imag)] for p, v in zip(self.points.tolist(), self.values.tolist())
            ],
        }


def lattice_delta(lattice):
    """The 2-point delta with 1/cell-volume normalization."""
    p = np.arange(lattice.n_points)
    return Kernel(0, 2, lattice, np.stack([p, p], axis=-1), np.full(len(p), 1.0 / lattice.vol))


def permute_internal(f, perm):
    """g(xi_1..xi_n) = f(xi_perm(1)..); perm lists, for each slot of f, its position in g."""
    perm = list(perm)
    if sorted(perm) != list(range(f.n)):
        raise UsageError(f"{perm} is not a permutation of {f.n} slots")
    points = f.points.copy()
    for i, target in enumerate(perm):
        points[:, f.m + target] = f.points[:, f.m + i]
    return f.with_entries(points, f.values)


def translate(f, shift):
    points = f.lattice.translate(f.points, shift) if f.nnz else f.points
    return f.with_entries(points, f.values)


def _permutation_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def antisymmetrize(f, which="internal"):
    """(1/k!) sum_pi sgn(pi) f^pi over the external or internal block."""
    if which not in ("external", "internal"):
        raise UsageError(f"unknown block {which!r}")
    offset, k = (0, f.m) if which == "external" else (f.m, f.n)
    all_points, all_values = [], []
    for perm in itertools.permutations(range(k)):
        points = f.points.copy()
        points[:, offset : offset + k] = f.points[:, offset : offset + k][:, list(perm)]
        all_points.append(points)
        all_values.append(_permutation_sign(perm) * f.values / math.factorial(k))
    flags = {f"antisymmetric_{which}": True}
    if not all_points:
        return f.with_entries(f.points, f.values, **flags)
    return f.with_entries(np.concatenate(all_points), np.concatenate(all_values), **flags)


def tensor(f, g):
    """f (x) g with external slots of f, then of g, then internal slots of f, then of g."""
    if f.lattice != g.lattice:
        raise UsageError("kernels live on different lattices")
    i, j = np.meshgrid(np.arange(f.nnz), np.arange(g.nnz), indexing="ij")
    i, j = i.reshape(-1), j.reshape(-1)
    points = np.concatenate(
        [f.points[i, : f.m], g.points[j, : g.m], f.points[i, f.m :], g.points[j, g.m :]], axis=1
    )
    return Kernel(f.m + g.m, f.n + g.n, f.lattice, points, f.values[i] * g.values[j])


def partial_convolution(f, mu, g, nu):
    """Integrate internal slot mu of f against internal slot nu of g.

    Output slots: externals of f, externals of g, internals of f without mu,
    internals of g without nu.
    """
    if not (0 <= mu < f.n and 0 <= nu < g.n):
        raise UsageError(f"slots ({mu}, {nu}) out of range for arities ({f.n}, {g.n})")
    if f.lattice != g.lattice:
        raise UsageError("kernels live on different lattices")
    fz = f.points[:, f.m + mu]
    gz = g.points[:, g.m + nu]
    order = np.argsort(gz, kind="stable")
    gz_sorted = gz[order]
    lo = np.searchsorted(gz_sorted, fz, side="left")
    hi = np.searchsorted(gz_sorted, fz, side="right")
    counts = hi - lo
    i = np.repeat(np.arange(f.nnz), counts)
    j = order[np.concatenate([np.arange(a, b) for a, b in zip(lo, hi)]).astype(np.int64)] if i.size else np.zeros(0, dtype=np.int64)
    f_int = [f.m + s for s in range(f.n) if s != mu]
    g_int = [g.m + s for s in range(g.n) if s != nu]
    points = np.concatenate(
        [f.points[i, : f.m], g.points[j, : g.m], f.points[i][:, f_int], g.points[j][:, g_int]], axis=1
    )
    values = f.values[i] * g.values[j] * f.lattice.vol
    return Kernel(f.m + g.m, f.n + g.n - 2, f.lattice, points, values)


def contract(C, f, i, j):
    """Con_{i->j}: integrate internal slots i < j against C with sign (-1)^(j-i+1).

    Slots are 0-based; the sign only depends on j - i.
    """
    if not 0 <= i < j < f.n:
        raise UsageError(f"contraction slots need 0 <= i < j < n, got ({i}, {j}) with n={f.n}")
    if (C.m, C.n) != (0, 2):
        raise UsageError("covariance must be a 2-point internal kernel")
    dense = C.to_dense()
    sign = (-1) ** (j - i + 1)
    weights = dense[f.points[:, f.m + i], f.points[:, f.m + j]]
    keep = [s for s in range(f.arity) if s not in (f.m + i, f.m + j)]
    values = sign * f.values * weights * f.lattice.vol**2
    return Kernel(f.m, f.n - 2, f.lattice, f.points[:, keep], values)


# ---------- norms ----------
def norm_1inf_scalar(f):
    """|||f|||_{1,inf}: sup over one pinned argument of the integral over the rest."""
    return _norm_1inf(f.points, np.abs(f.values), f.m, f.n, f.lattice)


def _norm_1inf(points, mags, m, n, lattice):
    if mags.size == 0:
        return 0.0
    vol = lattice.vol
    if m == 0 and n == 0:
        return float(mags.sum())
    if m == 0:
        best = 0.0
        for j in range(n):
            sums = np.bincount(points[:, j], weights=mags, minlength=lattice.n_points)
            best = max(best, float(sums.max()))
        return best * vol ** (n - 1)
    _, inverse = np.unique(points[:, :m], axis=0, return_inverse=True)
    sums = np.bincount(inverse.reshape(-1), weights=mags)
    return float(sums.max()) * vol**n


def norm_sup(C, domain):
    """Constant element sup |C|."""
    return NormElement.constant(domain, C.max_abs())


@dataclass(frozen=True)
class DecayOperator:
    """Product of factors (xi_u - xi_v)^delta over internal slots, stored with u < v.

    ``sign`` absorbs the (-1)^|delta| of factors given with u > v.
    """

    factors: tuple = ()
    sign: int = 1

    @classmethod
    def build(cls, factors):
        canon, sign = [], 1
        for delta, u, v in factors:
            delta = tuple(int(x) for x in delta)
            if u == v:
                raise UsageError("decay operator factor needs two distinct slots")
            if not any(delta):
                continue
            if u > v:
                u, v = v, u
                sign *= (-1) ** degree(delta)
            canon.append((delta, u, v))
        return cls(tuple(sorted(canon)), sign)

    @classmethod
    def single(cls, delta, u, v):
        return cls.build([(delta, u, v)])

    @property
    def delta(self):
        if not self.factors:
            return None
        return tuple(int(x) for x in np.sum([f[0] for f in self.factors], axis=0))

    def compose(self, other):
        return DecayOperator.build(list(self.factors) + list(other.factors)).with_sign(self.sign * other.sign)

    def with_sign(self, sign):
        return DecayOperator(self.factors, self.sign * sign)


def decay_weights(f, operator):
    weights = np.full(f.nnz, float(operator.sign))
    for delta, u, v in operator.factors:
        if not (0 <= u < f.n and 0 <= v < f.n):
            raise UsageError(f"decay factor slots ({u}, {v}) out of range for n={f.n}")
        diff = f.lattice.differences(f.points[:, f.m + u], f.points[:, f.m + v])
        weights = weights * np.prod(diff ** np.asarray(delta, dtype=float), axis=-1)
    return weights


def apply_decay(operator, f):
    return f.with_entries(f.points, f.values * decay_weights(f, operator))


def _weak_compositions(total, parts):
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield out


def pair_assignments(delta, n):
    """Every way to spread the multiindex delta over the slot pairs u < v.

    Merging factors on the same pair leaves the absolute value unchanged, so these
    assignments realize every decay operator with the given total delta.
    """
    pairs = list(itertools.combinations(range(n), 2))
    if not pairs:
        return
    per_component = [list(_weak_compositions(x, len(pairs))) for x in delta]
    for choice in itertools.product(*per_component):
        yield [
            (tuple(choice[i][k] for i in range(len(delta))), u, v) for k, (u, v) in enumerate(pairs)
        ]


def decay_operator_norms(f, domain, delta_max):
    """max over decay operators with delta(D) = delta of |||D f|||, for delta in domain.

    Returns {delta: value}; multiindices with |delta| > delta_max map to +inf.
    """
    out = {}
    if f.m != 0:
        raise UsageError("decay operators act on kernels without external slots")
    diffs = {}
    for u, v in itertools.combinations(range(f.n), 2):
        diffs[(u, v)] = np.abs(f.lattice.differences(f.points[:, u], f.points[:, v]))
    mags = np.abs(f.values)
    for delta in domain.members:
        if not any(delta):
            out[delta] = norm_1inf_scalar(f)
            continue
        if degree(delta) > delta_max:
            out[delta] = math.inf
            continue
        best = 0.0
        for assignment in pair_assignments(delta, f.n):
            weights = np.ones(f.nnz)
            for gamma, u, v in assignment:
                if any(gamma):
                    weights = weights * np.prod(diffs[(u, v)] ** np.asarray(gamma, dtype=float), axis=-1)
            best = max(best, _norm_1inf(f.points, mags * weights, 0, f.n, f.lattice))
        out[delta] = best
    return out


def seminorm_1inf(f, domain, delta_max=4):
    """||f||_{1,inf} as a norm domain element."""
    if f.m == 0 and f.n == 0:
        return NormElement.zero(domain)
    if f.m != 0:
        return NormElement.constant(domain, norm_1inf_scalar(f))
    table = decay_operator_norms(f, domain, delta_max)
    return NormElement.from_function(domain, lambda delta: table[delta] / mfactorial(delta))


def weighted_seminorm(f, domain, rho=None, delta_max=4):
    """rho(m, n) ||f||_{1,inf}."""
    weight = 1.0 if rho is None else rho(f.m, f.n)
    return seminorm_1inf(f, domain, delta_max) * weight


def contraction_bound(C, domain, delta_max=4):
    """max{||C||_{1,inf}, |||C|||_inf}."""
    return combine(seminorm_1inf(C, domain, delta_max), norm_sup(C, domain), "max")


def weighted_contraction_bound(C, domain, rho, m_max, n_max, delta_max=4):
    """Contraction bound for the rho-weighted norms.

    The constant coefficient must dominate rho(m+m', n+n'-2) / (rho(m, n) rho(m', n')) |||C|||_inf
    over the arities in range; the remaining coefficients come from ||C||_{1,inf}.
    """
    worst = 0.0
    for m, mp in itertools.product(range(m_max + 1), repeat=2):
        for n, np_ in itertools.product(range(1, n_max + 1), repeat=2):
            worst = max(worst, rho(m + mp, n + np_ - 2) / (rho(m, n) * rho(mp, np_)))
    return combine(seminorm_1inf(C, domain, delta_max), norm_sup(C, domain) * worst, "max")

