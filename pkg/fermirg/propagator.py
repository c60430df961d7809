"""Gapped propagators C(k) = (U - chi) / (i k0 - e + de) and their bounds.

Momentum space has a continuous frequency k0 and a spatial momentum on the
discrete dual of the position lattice. Position kernels use the phase
exp(-i k0 (x0 - x0') + i k.(x - x')), so at equal times the t -> 0- branch of
the time kernel is taken.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .errors import DomainError, NumericError, UsageError
from .jets import Jet, cosine_jet, polynomial_jet
from .kernels import Kernel, Lattice, contraction_bound, seminorm_1inf
from .norm_domain import (
    NormElement,
    SaturatedSet,
    add_indices,
    degree,
    frak_e,
    geom_inverse,
    mfactorial,
    ratio,
    restrict,
    spatial_degree,
    t_mu,
    unit,
)

logger = logging.getLogger(__name__)

QUAD_ABS_TOL = 1e-8
K0_CUT_FACTOR = 50.0
SAMPLE_NODES = 64
ZONE_NODES = 48


# ---------- one dimensional profiles ----------
@dataclass(frozen=True)
class Plateau:
    """1 on |x| <= inner, 0 on |x| >= outer, a polynomial smoothstep in between.

    The step has ``smoothness`` continuous derivatives at both ends.
    """

    inner: float
    outer: float
    smoothness: int = 4

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise UsageError(f"plateau needs 0 <= inner < outer, got {self.inner}, {self.outer}")
        if self.smoothness < 0:
            raise UsageError("plateau smoothness must be >= 0")

    @cached_property
    def profile(self):
        s = self.smoothness
        n = 2 * s + 1
        u = Polynomial([0.0, 1.0])
        step = Polynomial([0.0])
        for j in range(s + 1, n + 1):
            step = step + math.comb(n, j) * u**j * (1 - u) ** (n - j)
        width = self.outer - self.inner
        return step(Polynomial([self.outer / width, -1.0 / width]))

    def derivatives(self, x, order):
        """[b, b', ..., b^(order)] at x."""
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        ramp = (ax > self.inner) & (ax < self.outer)
        sign = np.sign(x)
        poly = self.profile
        out = []
        for n in range(order + 1):
            values = np.where(ramp, poly(ax) * sign**n, 0.0)
            if n == 0:
                values = np.where(ax <= self.inner, 1.0, values)
            out.append(values)
            poly = poly.deriv()
        return out

    def __call__(self, x):
        return self.derivatives(x, 0)[0]

    def enlarged(self):
        """A plateau equal to 1 on the support of this one."""
        return Plateau(self.outer, 2 * self.outer - self.inner, self.smoothness)

    def to_record(self):
        return {"inner": self.inner, "outer": self.outer, "smoothness": self.smoothness}


# ---------- dual grid ----------
def dual_momenta(lattice):
    """Spatial momenta 2 pi m / (L dx) in the lattice site order."""
    axes = [2 * math.pi * np.fft.fftfreq(lattice.L, dx) for dx in lattice.dx]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lattice.d)


def dual_weight(lattice):
    """d^dk / (2 pi)^d carried by one dual grid point."""
    return 1.0 / (lattice.L**lattice.d * math.prod(lattice.dx))


def spatial_phases(lattice):
    """exp(i k.x) with sites along rows and dual momenta along columns."""
    sites = np.stack(np.unravel_index(np.arange(lattice.sites), (lattice.L,) * lattice.d), axis=-1)
    return np.exp(1j * (sites * np.asarray(lattice.dx)) @ dual_momenta(lattice).T)


# ---------- dispersions and cutoffs ----------
DISPERSION_KINDS = ("constant", "cosine", "quadratic")


@dataclass(frozen=True)
class DispersionSpec:
    """Closed form e(k) with analytic derivatives.

    constant: (Lam,); cosine: (c0, c1, ..., cd) or (c0, c1) shared by every axis;
    quadratic: (m0, kappa) for m0 + kappa |k|^2.
    """

    kind: str
    parameters: tuple
    d: int = 1
    mu: float = 1.0
    r: int = 4

    def __post_init__(self):
        if self.kind not in DISPERSION_KINDS:
            raise UsageError(f"unknown dispersion kind {self.kind!r}; choose from {DISPERSION_KINDS}")
        params = tuple(float(p) for p in self.parameters)
        expected = {"constant": (1,), "cosine": (2, self.d + 1), "quadratic": (2,)}[self.kind]
        if len(params) not in expected:
            raise UsageError(f"{self.kind} dispersion takes {expected} parameters, got {len(params)}")
        if self.kind == "cosine" and len(params) == 2:
            params = params[:1] + params[1:] * self.d
        object.__setattr__(self, "parameters", params)

    def value(self, kvec):
        kvec = np.asarray(kvec, dtype=float)
        shape = kvec.shape[:-1]
        p = self.parameters
        if self.kind == "constant":
            return np.full(shape, p[0])
        if self.kind == "cosine":
            return p[0] + np.cos(kvec) @ np.asarray(p[1:])
        return p[0] + p[1] * np.sum(kvec**2, axis=-1)

    def jet(self, domain, kvec):
        kvec = np.asarray(kvec, dtype=float)
        p = self.parameters
        if self.kind == "constant":
            return Jet.constant(domain, np.full(kvec.shape[:-1], p[0]))
        out = Jet.constant(domain, np.full(kvec.shape[:-1], p[0]))
        for j in range(self.d):
            if self.kind == "cosine":
                out = out + cosine_jet(domain, j + 1, kvec[..., j]) * p[j + 1]
            else:
                out = out + polynomial_jet(domain, j + 1, Polynomial([0.0, 0.0, p[1]]), kvec[..., j])
        return out

    def to_record(self):
        return {"kind": self.kind, "parameters": list(self.parameters), "d": self.d, "mu": self.mu, "r": self.r}


@dataclass(frozen=True)
class CutoffSpec:
    """U(k) = 1 on the zone ("unit") or a product of plateaus ("plateau"); chi = U(k) b(k0)."""

    kind: str = "unit"
    inner: float = 1.0
    outer: float = 2.0
    smoothness: int = 4
    chi: Optional[Plateau] = None

    def __post_init__(self):
        if self.kind not in ("unit", "plateau"):
            raise UsageError(f"unknown cutoff kind {self.kind!r}")

    @cached_property
    def plateau(self):
        return Plateau(self.inner, self.outer, self.smoothness) if self.kind == "plateau" else None

    def half_widths(self, lattice):
        zone = tuple(math.pi / dx for dx in lattice.dx)
        if self.kind == "unit":
            return zone
        return tuple(min(self.outer, z) for z in zone)

    def U(self, kvec):
        kvec = np.asarray(kvec, dtype=float)
        if self.kind == "unit":
            return np.ones(kvec.shape[:-1])
        return np.prod(self.plateau(kvec), axis=-1)

    def b(self, k0):
        if self.chi is None:
            return np.zeros_like(np.asarray(k0, dtype=float))
        return self.chi(k0)

    def U_jet(self, domain, kvec):
        kvec = np.asarray(kvec, dtype=float)
        out = Jet.constant(domain, np.ones(kvec.shape[:-1]))
        if self.kind == "unit":
            return out
        for j in range(kvec.shape[-1]):
            out = out * Jet.univariate(domain, j + 1, self.plateau.derivatives(kvec[..., j], domain.max_degree))
        return out

    def chi_jet(self, domain, k0, kvec):
        if self.chi is None:
            return Jet.constant(domain, np.zeros(np.shape(k0)))
        return self.U_jet(domain, kvec) * Jet.univariate(domain, 0, self.chi.derivatives(k0, domain.max_degree))

    def enlarged(self):
        """U~ with U~ = 1 on supp U; the frequency factor is dropped."""
        if self.kind == "unit":
            return CutoffSpec("unit")
        p = self.plateau.enlarged()
        return CutoffSpec("plateau", p.inner, p.outer, self.smoothness)

    def to_record(self):
        return {
            "kind": self.kind,
            "inner": self.inner,
            "outer": self.outer,
            "smoothness": self.smoothness,
            "chi": None if self.chi is None else self.chi.to_record(),
        }


@dataclass(frozen=True)
class PropagatorSpec:
    dispersion: DispersionSpec
    lattice: Lattice
    cutoff: CutoffSpec = field(default_factory=CutoffSpec)
    counterterm: Optional[DispersionSpec] = None

    def __post_init__(self):
        if self.dispersion.d != self.lattice.d:
            raise UsageError(f"dispersion has d={self.dispersion.d}, lattice has d={self.lattice.d}")
        sample = self.support_sample()
        if sample.shape[0] == 0:
            return
        e = np.abs(self.dispersion.value(sample))
        gap = float(e.min())
        if gap < self.dispersion.mu * (1 - 1e-12):
            raise DomainError(f"|e(k)| >= mu fails on supp U: min |e| = {gap:.6g} < mu = {self.dispersion.mu}")
        if np.any(self.e_tilde(sample) == 0):
            raise DomainError("i k0 - e + de vanishes on supp U")

    @property
    def d(self):
        return self.lattice.d

    @property
    def form(self):
        if self.counterterm is not None:
            return "counterterm"
        return "full" if self.cutoff.chi is None else "chi"

    def support_sample(self, nodes=SAMPLE_NODES):
        """Dense sample of supp U together with the dual grid points where U > 0."""
        half = self.cutoff.half_widths(self.lattice)
        axes = [np.linspace(-h, h, nodes) for h in half]
        dense = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)
        pts = np.concatenate([dense, self.dual_momenta])
        return pts[self.cutoff.U(pts) > 0]

    @cached_property
    def E(self):
        sample = self.support_sample()
        if sample.shape[0] == 0:
            return 1.0
        return max(1.0, float(np.abs(self.e_tilde(sample)).max()))

    @property
    def k0_cut(self):
        return K0_CUT_FACTOR * self.E

    # momentum grids
    @cached_property
    def dual_momenta(self):
        return dual_momenta(self.lattice)

    @property
    def dual_weight(self):
        return dual_weight(self.lattice)

    def zone_rule(self, nodes=ZONE_NODES):
        """Gauss-Legendre nodes on the support box with weights including 1/(2 pi)^d."""
        x, w = np.polynomial.legendre.leggauss(nodes)
        half = self.cutoff.half_widths(self.lattice)
        axes = [h * x for h in half]
        weights = [h * w for h in half]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)
        wts = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), axis=-1).reshape(-1, self.d), axis=-1)
        return pts, wts / (2 * math.pi) ** self.d

    # pointwise values
    def e_tilde(self, kvec):
        e = self.dispersion.value(kvec)
        if self.counterterm is not None:
            e = e - self.counterterm.value(kvec)
        return e

    def momentum(self, k):
        """C(k) at points k with last axis (k0, k_1..k_d)."""
        k = np.asarray(k, dtype=float)
        k0, kvec = k[..., 0], k[..., 1:]
        u = self.cutoff.U(kvec)
        return u * (1.0 - self.cutoff.b(k0)) / (1j * k0 - self.e_tilde(kvec))

    def jet(self, domain, k):
        """Normalized Taylor coefficients of C at points k."""
        k = np.asarray(k, dtype=float)
        k0, kvec = k[..., 0], k[..., 1:]
        num = self.cutoff.U_jet(domain, kvec) - self.cutoff.chi_jet(domain, k0, kvec)
        e = self.dispersion.jet(domain, kvec)
        if self.counterterm is not None:
            e = e - self.counterterm.jet(domain, kvec)
        den = Jet.variable(domain, 0, k0) * 1j - e
        return num / den

    def to_record(self):
        return {
            "dispersion": self.dispersion.to_record(),
            "lattice": self.lattice.to_record(),
            "cutoff": self.cutoff.to_record(),
            "counterterm": None if self.counterterm is None else self.counterterm.to_record(),
            "form": self.form,
            "E": self.E,
        }


# ---------- time kernels ----------
def _closed_time_kernel(spec, tau, kvec):
    e = spec.e_tilde(kvec)
    u = spec.cutoff.U(kvec)
    if tau > 0:
        selected, sign = e > 0, -1.0
    else:
        selected, sign = e < 0, 1.0
    decay = np.exp(-np.where(selected, e, 0.0) * tau)
    return (sign * u * np.where(selected, decay, 0.0)).astype(complex)


def c_time_kernel(spec, t, kvec):
    """int dk0/(2 pi) exp(-i k0 t) U/(i k0 - e), exactly; t = 0 is the t -> 0- limit."""
    if spec.cutoff.chi is not None:
        raise UsageError("the closed time kernel needs a chi-free propagator; use the quadrature path")
    return _closed_time_kernel(spec, float(t), np.asarray(kvec, dtype=float))


def _check_quad(value, abserr, what, tol=QUAD_ABS_TOL):
    if not abserr <= tol:
        raise NumericError(f"{what} did not converge", diagnostics={"value": value, "abserr": abserr, "tol": tol})
    return value


def _fourier_time_kernel(spec, tau, kvec):
    """The U part of the time kernel by oscillatory quadrature on k0 in [0, inf)."""
    e = spec.e_tilde(kvec)
    u = spec.cutoff.U(kvec)
    out = np.zeros(e.shape, dtype=complex)
    for idx in np.ndindex(e.shape):
        ek = float(e[idx])
        if tau == 0:
            out[idx] = u[idx] * 0.5 * (1.0 - math.copysign(1.0, ek))
            continue
        cos_part, cos_err = integrate.quad(lambda q: -ek / (q * q + ek * ek), 0, np.inf, weight="cos", wvar=abs(tau))
        sin_part, sin_err = integrate.quad(lambda q: -q / (q * q + ek * ek), 0, np.inf, weight="sin", wvar=abs(tau))
        _check_quad(cos_part, cos_err, f"k0 cosine transform at t={tau}")
        _check_quad(sin_part, sin_err, f"k0 sine transform at t={tau}")
        out[idx] = u[idx] * (cos_part + math.copysign(1.0, tau) * sin_part) / math.pi
    return out


def _windowed_time_kernel(spec, tau, kvec, profile, half_width):
    """U(k) int dk0/(2 pi) profile(k0) exp(-i k0 tau) / (i k0 - e) for an even profile supported in |k0| <= half_width."""
    e = spec.e_tilde(kvec)
    u = spec.cutoff.U(kvec)
    out = np.zeros(e.shape, dtype=complex)
    for idx in np.ndindex(e.shape):
        if u[idx] == 0:
            continue
        ek = float(e[idx])

        def integrand(q):
            return float(profile(q)) * (-ek * math.cos(q * tau) - q * math.sin(q * tau)) / (q * q + ek * ek)

        value, abserr = integrate.quad(integrand, 0.0, half_width, limit=200, epsabs=1e-12)
        _check_quad(value, abserr, f"windowed k0 integral at t={tau}")
        out[idx] = u[idx] * value / math.pi
    return out


def _chi_window(spec):
    b = spec.cutoff.chi
    return (lambda q: b(q)), b.outer


def time_kernel(spec, tau, kvec, method="closed"):
    """C(tau, k) for any form; chi-bearing forms subtract the windowed chi part by quadrature."""
    if method == "closed":
        base = _closed_time_kernel(spec, tau, kvec)
    elif method == "quadrature":
        base = _fourier_time_kernel(spec, tau, kvec)
    else:
        raise UsageError(f"unknown time kernel method {method!r}")
    if spec.cutoff.chi is not None:
        profile, half = _chi_window(spec)
        base = base - _windowed_time_kernel(spec, tau, kvec, profile, half)
    return base


# ---------- position kernels ----------
def _time_offsets(lattice):
    """Minimal-image time offsets, indexed by (t - t') mod T; the half period stays nonnegative."""
    j = np.arange(lattice.T)
    return np.where(2 * j > lattice.T, j - lattice.T, j) * lattice.dt


def _spatial_blocks(spec, time_values):
    """G[j, x, x'] = sum_k w exp(i k.(x - x')) c_j(k) for each time offset j."""
    F = spatial_phases(spec.lattice)
    return np.stack([spec.dual_weight * (F * c[None, :]) @ F.conj().T for c in time_values])


def _fill_two_point(lattice, blocks):
    """Antisymmetric matrix on B x B from the (x, x') blocks of the a=0, a'=1 entries."""
    p = np.arange(lattice.n_points)
    t, _, sigma, a = lattice.decode(p)
    site = (p // 4) % lattice.sites
    tp, tq = np.meshgrid(t, t, indexing="ij")
    sp, sq = np.meshgrid(site, site, indexing="ij")
    ap, aq = np.meshgrid(a, a, indexing="ij")
    same_spin = sigma[:, None] == sigma[None, :]
    forward = blocks[np.mod(tp - tq, lattice.T), sp, sq]
    backward = -blocks[np.mod(tq - tp, lattice.T), sq, sp]
    out = np.where(same_spin & (ap == 0) & (aq == 1), forward, 0.0)
    return out + np.where(same_spin & (ap == 1) & (aq == 0), backward, 0.0)


def c_position(spec, lattice=None, method="closed"):
    """The antisymmetric two point kernel C(xi, xi') on the lattice.

    Time is periodic like space: the entry at slices t, t' is the time kernel at
    the minimal-image offset of t - t', the same representative the decay
    operators use, so C is invariant under lattice translations in time.
    """
    if lattice is not None and lattice != spec.lattice:
        spec = replace(spec, lattice=lattice)
    lattice = spec.lattice
    kvec = spec.dual_momenta
    values = [time_kernel(spec, tau, kvec, method) for tau in _time_offsets(lattice)]
    dense = _fill_two_point(lattice, _spatial_blocks(spec, values))
    kernel = Kernel.from_dense(dense, lattice, 0, 2)
    logger.debug("▶ position kernel %s/%s: %d entries", spec.form, method, kernel.nnz)
    return kernel.with_entries(kernel.points, kernel.values, antisymmetric_internal=True)


def delta_e_hat(counterterm, lattice):
    """de^(xi, xi') = delta_{sigma sigma'} delta_{a a'} delta(x0 - x0') int d^dk/(2 pi)^d exp(i (-1)^a k.(x - x')) de(k)."""
    if counterterm is None:
        return Kernel.zero(0, 2, lattice)
    values = counterterm.value(dual_momenta(lattice))
    if not np.any(values):
        return Kernel.zero(0, 2, lattice)
    F = spatial_phases(lattice)
    w = dual_weight(lattice) / lattice.dt
    plus = w * (F * values[None, :]) @ F.conj().T
    minus = w * (F.conj() * values[None, :]) @ F.T
    p = np.arange(lattice.n_points)
    t, _, sigma, a = lattice.decode(p)
    site = (p // 4) % lattice.sites
    sp, sq = np.meshgrid(site, site, indexing="ij")
    same = (sigma[:, None] == sigma[None, :]) & (a[:, None] == a[None, :]) & (t[:, None] == t[None, :])
    dense = np.where(same, np.where(a[:, None] == 0, plus[sp, sq], minus[sp, sq]), 0.0)
    return Kernel.from_dense(dense, lattice, 0, 2)


# ---------- Gram and S bounds ----------
def _k0_integral(fn, lo, hi, what):
    value, abserr = integrate.quad(fn, lo, hi, limit=200, epsabs=1e-12)
    return _check_quad(value, abserr, what, tol=1e-7)


def _abs_k0_weights(spec, profile, half, kvec):
    """int_{-half}^{half} dk0/(2 pi) profile(k0) |U - chi| / |i k0 - e| per spatial momentum (U factor excluded)."""
    e = np.abs(spec.e_tilde(kvec))
    base = spec.cutoff.chi
    out = np.zeros(e.shape)
    for idx in np.ndindex(e.shape):
        ek = float(e[idx])
        if profile is None and base is None:
            out[idx] = 2.0 * math.asinh(half / ek) / (2 * math.pi)
            continue

        def integrand(q):
            weight = 1.0 if profile is None else float(profile(q))
            if base is not None:
                weight *= 1.0 - float(base(q))
            return weight / math.hypot(q, ek)

        out[idx] = 2.0 * _k0_integral(integrand, 0.0, half, "Gram frequency integral") / (2 * math.pi)
    return out


def gram_bound(spec):
    """sqrt(int |C(k)| d^{d+1}k / (2 pi)^{d+1}); the frequency integral diverges unless U vanishes."""
    u = spec.cutoff.U(spec.dual_momenta)
    if not np.any(u > 0):
        return 0.0
    logger.warning("⚠ int |C(k)| dk0 diverges logarithmically for U != 0; gram bound is +inf")
    return math.inf


def gram_bound_truncated(spec, k0_cut=None):
    """The Gram integral restricted to |k0| <= k0_cut (default 50 E)."""
    K = spec.k0_cut if k0_cut is None else float(k0_cut)
    kvec = spec.dual_momenta
    u = spec.cutoff.U(kvec)
    if not np.any(u > 0):
        return 0.0
    weights = _abs_k0_weights(spec, None, K, kvec)
    return math.sqrt(spec.dual_weight * float(np.sum(u * weights)))


def zone_gram_constant(spec):
    """sqrt(int U(k) d^dk / (2 pi)^d), the sharper constant for gapped propagators."""
    return math.sqrt(spec.dual_weight * float(np.sum(spec.cutoff.U(spec.dual_momenta))))


def gram_bound_partitioned(spec, windows):
    """max_s sqrt(int |C(k)| chi_s(k0)^2); a ``None`` window is chi_s = 1."""
    kvec = spec.dual_momenta
    u = spec.cutoff.U(kvec)
    best = 0.0
    for window in windows:
        if window is None:
            best = max(best, gram_bound(spec))
            continue
        weights = _abs_k0_weights(spec, lambda q, w=window: w(q) ** 2, window.outer, kvec)
        best = max(best, math.sqrt(spec.dual_weight * float(np.sum(u * weights))))
    return best


def s_bound_gapped(spec):
    """9 int U + (3/E) int chi + 6 int_{|k0| <= E} (U - chi)/|i k0 - e|, a bound on S(C)^2."""
    kvec = spec.dual_momenta
    u = spec.cutoff.U(kvec)
    if not np.any(u > 0):
        return 0.0
    w = spec.dual_weight
    E = spec.E
    first = 9.0 * w * float(np.sum(u))
    second = 0.0
    if spec.cutoff.chi is not None:
        b = spec.cutoff.chi
        chi_mass = 2.0 * _k0_integral(lambda q: float(b(q)), 0.0, b.outer, "chi frequency integral") / (2 * math.pi)
        second = 3.0 / E * w * float(np.sum(u)) * chi_mass
    third = 6.0 * w * float(np.sum(u * _abs_k0_weights(spec, None, E, kvec)))
    logger.debug("s bound terms: %.6g + %.6g + %.6g (E=%.6g)", first, second, third, E)
    return first + second + third


# ---------- momentum derivative norms ----------
@dataclass(frozen=True)
class MomentumGrid:
    """Tensor Gauss-Legendre rule on a box in (k0, k); weights include 1/(2 pi)^{d+1}."""

    lower: tuple
    upper: tuple
    nodes: int = 24

    @classmethod
    def for_spec(cls, spec, k0_cut=None, nodes=24):
        K = spec.k0_cut if k0_cut is None else float(k0_cut)
        half = spec.cutoff.half_widths(spec.lattice)
        return cls((-K,) + tuple(-h for h in half), (K,) + tuple(half), nodes)

    @cached_property
    def rule(self):
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        axes, weights = [], []
        for lo, hi in zip(self.lower, self.upper):
            half = (hi - lo) / 2
            axes.append(lo + half * (x + 1))
            weights.append(half * w)
        dims = len(axes)
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)
        wts = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), axis=-1).reshape(-1, dims), axis=-1)
        return pts, wts / (2 * math.pi) ** dims

    @property
    def points(self):
        return self.rule[0]

    @property
    def weights(self):
        return self.rule[1]


def _apply_budget(coeffs, domain, budget):
    if budget is None:
        return coeffs
    r0, r = budget
    for i, delta in enumerate(domain.members):
        if delta[0] > r0 or spatial_degree(delta) > r:
            coeffs[i] = math.inf
    return coeffs


def check_norms(jet, grid, mode="sup", region: Optional[Callable] = None, budget=None):
    """Coefficients sup_B |D^delta f| / delta! (mode "sup") or int_B |D^delta f| / delta! ("integral")."""
    if jet.batch_shape != (len(grid.points),):
        raise UsageError(f"jet batch {jet.batch_shape} does not match {len(grid.points)} grid points")
    mags = np.abs(jet.coefficients)
    weights = grid.weights
    if region is not None:
        mask = np.asarray(region(grid.points), dtype=bool)
        mags, weights = mags[:, mask], weights[mask]
    if mode == "sup":
        coeffs = mags.max(axis=1) if mags.shape[1] else np.zeros(len(jet.domain))
    elif mode == "integral":
        coeffs = mags @ weights
    else:
        raise UsageError(f"unknown norm mode {mode!r}")
    return NormElement(jet.domain, _apply_budget(coeffs, jet.domain, budget))


def momentum_norm(spec, domain, spatial="dual", budget=None, nodes=ZONE_NODES):
    """sum_delta (1/delta!) int |D^delta C(k)| d^{d+1}k/(2 pi)^{d+1} t^delta with k0 over the real line.

    Coefficients with delta_0 = 0 are +inf whenever U does not vanish.
    """
    if spatial == "dual":
        kvec = spec.dual_momenta
        w = np.full(len(kvec), spec.dual_weight)
    elif spatial == "zone":
        kvec, w = spec.zone_rule(nodes)
    else:
        raise UsageError(f"unknown spatial measure {spatial!r}")
    live = spec.cutoff.U(kvec) > 0
    coeffs = np.zeros(len(domain))
    if np.any(live):
        kvec, w = kvec[live], w[live]
        rows = [i for i, delta in enumerate(domain.members) if delta[0] >= 1]
        coeffs[[i for i, delta in enumerate(domain.members) if delta[0] == 0]] = math.inf
        if rows:

            def integrand(k0):
                pts = np.concatenate([np.full((len(kvec), 1), k0), kvec], axis=1)
                return np.abs(spec.jet(domain, pts).coefficients[rows]) @ w

            values, err = integrate.quad_vec(integrand, -np.inf, np.inf, epsabs=1e-11, epsrel=1e-9)
            if err > 1e-6:
                logger.warning("⚠ momentum norm quadrature error %.3g", err)
            coeffs[rows] = values / (2 * math.pi)
    return NormElement(domain, _apply_budget(coeffs, domain, budget))


@dataclass(frozen=True)
class TmuReport:
    ratio: float
    lattice_norm: NormElement
    bound: NormElement

    def to_record(self):
        return {"ratio": self.ratio, "lattice_norm": self.lattice_norm.to_record(), "bound": self.bound.to_record()}


def tmu_ratio(spec, domain, mu=None, delta_max=4):
    """Measured constant in ||C||_{1,inf} <= const T_mu ||C(k)||_1 on the given set."""
    mu = spec.dispersion.mu if mu is None else mu
    lattice_norm = seminorm_1inf(c_position(spec), domain, delta_max)
    enlarged = SaturatedSet.total_degree(domain.d, domain.max_degree + domain.d + 2)
    bound = restrict(t_mu(momentum_norm(spec, enlarged), mu), domain)
    value = ratio(lattice_norm, bound)
    logger.info("✅ T_mu ratio %.6g", value)
    return TmuReport(value, lattice_norm, bound)


# ---------- pointwise inequalities on the infinite lattice ----------
@dataclass(frozen=True)
class PointwiseReport:
    samples: int
    checked: int
    violations: int
    max_ratio: float

    @property
    def passed(self):
        return self.violations == 0

    def to_record(self):
        return {
            "samples": self.samples,
            "checked": self.checked,
            "violations": self.violations,
            "max_ratio": self.max_ratio,
        }


def _infinite_lattice_values(spec, offsets, nodes=ZONE_NODES):
    """C(t, r) for integer offsets (t, r_1..r_d), with the spatial integral over the zone."""
    kvec, w = spec.zone_rule(nodes)
    spacing = spec.lattice.spacings
    times = sorted({int(o[0]) for o in offsets})
    by_time = {t: time_kernel(spec, t * spacing[0], kvec) for t in times}
    out = np.empty(len(offsets), dtype=complex)
    for i, o in enumerate(offsets):
        phase = np.exp(1j * kvec @ (np.asarray(o[1:]) * spacing[1:]))
        out[i] = np.sum(w * phase * by_time[int(o[0])])
    return out


def _sample_offsets(spec, samples, extent, rng):
    """Distinct offsets (t, x) with x in [-extent, extent]^d; the time range grows until ``samples`` fit."""
    rng = np.random.default_rng(0) if rng is None else rng
    width = 2 * extent + 1
    t_extent = max(extent, math.ceil((samples / width**spec.d - 1) / 2))
    shape = (2 * t_extent + 1,) + (width,) * spec.d
    flat = rng.choice(math.prod(shape), size=min(samples, math.prod(shape)), replace=False)
    offsets = np.stack(np.unravel_index(np.sort(flat), shape), axis=1)
    return offsets - np.array((t_extent,) + (extent,) * spec.d)


def pointwise_check(spec, domain, samples=1000, extent=3, rng=None, weighted=False, nodes=ZONE_NODES):
    """|r^delta C(r)| <= int |D^delta C(k)|, optionally with the mu^{d+2} weights, on sampled offsets."""
    d = spec.d
    mu = spec.dispersion.mu
    extra = d + 2 if weighted else 0
    enlarged = SaturatedSet.total_degree(d, domain.max_degree + extra)
    norms = momentum_norm(spec, enlarged, spatial="zone", nodes=nodes)

    def rhs(delta):
        return mfactorial(delta) * norms[delta]

    offsets = _sample_offsets(spec, samples, extent, rng)
    values = np.abs(_infinite_lattice_values(spec, offsets, nodes))
    r = offsets * spec.lattice.spacings
    ones = (1,) * (d + 1)
    checked = violations = 0
    worst = 0.0
    for delta in domain.members:
        bound = rhs(delta)
        factor = 1.0
        lhs = values * np.prod(np.abs(r) ** np.asarray(delta, dtype=float), axis=1)
        if weighted:
            tail = sum(rhs(add_indices(add_indices(delta, ones), unit(d, j))) for j in range(d + 1))
            bound = bound + mu ** (d + 2) / (d + 1) * tail
            factor = 1.0 + mu ** (d + 2) * np.prod(np.abs(r) ** (1.0 + 1.0 / (d + 1)), axis=1)
        if math.isinf(bound):
            continue
        lhs = factor * lhs
        checked += len(lhs)
        violations += int(np.sum(lhs > bound * (1 + 1e-9) + 1e-12))
        if bound > 0:
            worst = max(worst, float(lhs.max() / bound))
    return PointwiseReport(len(offsets), checked, violations, worst)


# ---------- scalar constants and contraction elements ----------
def _support_integral(spec, fn):
    half = spec.cutoff.half_widths(spec.lattice)
    if spec.d == 1:
        value, abserr = integrate.quad(lambda k: fn(np.array([k])), -half[0], half[0], limit=200)
    else:
        value, abserr = integrate.nquad(lambda *k: fn(np.array(k)), [(-h, h) for h in half])
    return _check_quad(value, abserr, "support integral", tol=1e-7)


def g1_g2(spec):
    """g1 = int_{supp U} d^dk / |e|, g2 = int_{supp U} d^dk mu / e^2."""
    mu = spec.dispersion.mu
    g1 = _support_integral(spec, lambda k: 1.0 / abs(float(spec.e_tilde(k))))
    g2 = _support_integral(spec, lambda k: mu / float(spec.e_tilde(k)) ** 2)
    return g1, g2


def gamma_constant(spec):
    """max{1, sqrt(int d^dk U(k) log(E / |e(k)|))}."""
    E = spec.E

    def integrand(k):
        u = float(spec.cutoff.U(k))
        return u * math.log(E / abs(float(spec.e_tilde(k)))) if u > 0 else 0.0

    return max(1.0, math.sqrt(max(_support_integral(spec, integrand), 0.0)))


def contraction_element(spec, domain, variant="gapped", r=None, r0=None):
    """Shape of the contraction bound; the unspecified constant is 1.

    gapped: (g1/mu^d) (2/mu)^|delta| for |spatial delta| <= r - d - 1;
    cutoff: 1 for |spatial delta| <= r - d - 1 and delta_0 <= r0 - 2.
    Everything else is +inf except the constant coefficient.
    """
    d = spec.d
    r = spec.dispersion.r if r is None else r
    r0 = spec.dispersion.r if r0 is None else r0
    mu = spec.dispersion.mu
    zero = (0,) * (d + 1)
    if variant == "gapped":
        g1 = g1_g2(spec)[0]

        def coefficient(delta):
            if delta != zero and spatial_degree(delta) > r - d - 1:
                return math.inf
            return g1 / mu**d * (2.0 / mu) ** degree(delta)

    elif variant == "cutoff":

        def coefficient(delta):
            if delta != zero and (spatial_degree(delta) > r - d - 1 or delta[0] > r0 - 2):
                return math.inf
            return 1.0

    else:
        raise UsageError(f"unknown contraction variant {variant!r}")
    return NormElement.from_function(domain, coefficient)


def contraction_constant(spec, domain, variant="gapped", delta_max=4):
    """Measured const = max over coefficients of lattice ||C||_{1,inf} / element."""
    return ratio(seminorm_1inf(c_position(spec), domain, delta_max), contraction_element(spec, domain, variant))


# ---------- counterterm series ----------
@dataclass(frozen=True)
class CountertermSeries:
    points: np.ndarray = field(repr=False)
    partial_sums: list = field(repr=False)
    direct: np.ndarray = field(repr=False)
    errors: list
    ratio: float
    bound: Optional[NormElement] = None
    majorant: Optional[NormElement] = None

    def to_record(self):
        return {
            "errors": self.errors,
            "ratio": self.ratio,
            "bound": None if self.bound is None else self.bound.to_record(),
            "majorant": None if self.majorant is None else self.majorant.to_record(),
        }


def _without_counterterm(spec):
    base = replace(spec, counterterm=None)
    return base, replace(base, cutoff=spec.cutoff.enlarged())


def counterterm_series(spec, n_max, domain=None, grid=None, delta_max=4):
    """C = C0 sum_n (-de C~0)^n with C~0 = U~/(i k0 - e), checked against direct evaluation."""
    if spec.counterterm is None:
        raise UsageError("counterterm series needs a propagator with a counterterm")
    base, tilde = _without_counterterm(spec)
    sample = tilde.support_sample()
    worst = float(np.max(np.abs(spec.counterterm.value(sample)) / np.abs(spec.dispersion.value(sample))))
    if not worst < 1:
        raise DomainError(f"counterterm series diverges: sup |de / e| = {worst:.6g} >= 1")
    grid = MomentumGrid.for_spec(spec, nodes=16) if grid is None else grid
    pts = grid.points
    c0 = base.momentum(pts)
    step = -spec.counterterm.value(pts[:, 1:]) * tilde.momentum(pts)
    direct = spec.momentum(pts)
    term, acc = c0, np.zeros_like(c0)
    sums, errors = [], []
    for _ in range(n_max + 1):
        acc = acc + term
        sums.append(acc)
        errors.append(float(np.max(np.abs(acc - direct))))
        term = term * step

    bound = majorant = None
    if domain is not None:
        c0_norm = seminorm_1inf(c_position(base), domain, delta_max)
        tilde_norm = seminorm_1inf(c_position(tilde), domain, delta_max)
        de_norm = seminorm_1inf(delta_e_hat(spec.counterterm, spec.lattice), domain, delta_max)
        try:
            bound = c0_norm * geom_inverse(1.0, de_norm * tilde_norm)
        except DomainError as exc:
            logger.warning("⚠ counterterm norm series does not close: %s", exc)
        try:
            majorant = frak_e(de_norm, 1.0, contraction_bound(c_position(base), domain, delta_max))
        except DomainError as exc:
            logger.warning("⚠ counterterm majorant undefined: %s", exc)
    logger.info("✅ counterterm series: sup |de/e| = %.4g, final error %.3g", worst, errors[-1])
    return CountertermSeries(pts, sums, direct, errors, worst, bound, majorant)


def counterterm_derivative(spec, derivative, points, h=1e-6):
    """d/ds C_s at s = 0 for de -> de + s de', analytic (-C C~ de') and by central differences."""
    points = np.asarray(points, dtype=float)
    _, tilde = _without_counterterm(spec)
    tilde = replace(tilde, counterterm=spec.counterterm)
    prime = derivative.value(points[..., 1:])
    analytic = -spec.momentum(points) * tilde.momentum(points) * prime

    def shifted(s):
        k0, kvec = points[..., 0], points[..., 1:]
        u = spec.cutoff.U(kvec) * (1.0 - spec.cutoff.b(k0))
        return u / (1j * k0 - spec.e_tilde(kvec) + s * prime)

    numeric = (shifted(h) - shifted(-h)) / (2 * h)
    return analytic, numeric


def weighted_pointwise_check(spec, domain, **kwargs):
    return pointwise_check(spec, domain, weighted=True, **kwargs)
