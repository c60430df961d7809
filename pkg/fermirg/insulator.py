"""Perturbative study of a gapped insulator at desk scale.

A two particle interaction V0 and a gapped covariance C are assembled on the
lattice. The connected amputated Green's functions are read off from the
lambda expansion of Omega_C(lambda V) and compared with their leading terms
K (tadpole) and V0.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT_COUNTERTERM_TERMS
from .errors import NumericError, UsageError
from .grassmann import (
    CovarianceMatrix,
    GeneratorSet,
    GrassmannElement,
    gr_from_kernel,
    monomial_points,
    n_functional,
    omega_series,
    s_empirical,
    sequence_sign,
    shift_convolve,
    wick_order,
)
from .kernels import (
    Kernel,
    Lattice,
    contract,
    contraction_bound,
    decay_operator_norms,
    norm_1inf_scalar,
    permute_internal,
    seminorm_1inf,
)
from .norm_domain import NormElement, SaturatedSet, degree, ratio
from .propagator import (
    CountertermSeries,
    CutoffSpec,
    DispersionSpec,
    Plateau,
    PropagatorSpec,
    c_position,
    contraction_constant,
    counterterm_series,
    g1_g2,
    gamma_constant,
    gram_bound,
    gram_bound_truncated,
    s_bound_gapped,
    zone_gram_constant,
)

logger = logging.getLogger(__name__)

# a-pattern of the slots (x1, y1, x2, y2, ...): psi-bar carries a = 1
BAR, PLAIN = 1, 0
CONVENTIONS = ("amputated", "generating")
ALPHAS = (2.0, 16.0)
CHANNELS = ("G2-K", "G4-V0", "G6")


# ---------- model assembly ----------
def potential(kind, params):
    """v(r) for physical displacements r with last axis d."""
    if kind == "zero":
        return lambda r: np.zeros(np.shape(r)[:-1])
    if kind == "onsite":
        amplitude = params[0]
        return lambda r: np.where(np.all(np.asarray(r) == 0, axis=-1), amplitude, 0.0)
    if kind == "exponential":
        amplitude, scale = params[0], params[1]
        return lambda r: amplitude * np.exp(-np.linalg.norm(r, axis=-1) / scale)
    raise UsageError(f"unknown interaction {kind!r}")


@dataclass(frozen=True, eq=False)
class InsulatorModel:
    lattice: Lattice
    spec: PropagatorSpec
    v0: Kernel
    covariance: Kernel
    coupling: float
    lambda_order: int
    domain: SaturatedSet
    r: int
    r0: int
    delta_max: int
    m_max: int

    @property
    def gens(self):
        return GeneratorSet(self.lattice, (), tuple(range(self.lattice.n_points)))

    def to_record(self):
        return {
            "spec": self.spec.to_record(),
            "coupling": self.coupling,
            "lambda_order": self.lambda_order,
            "domain": self.domain.to_record(),
            "r": self.r,
            "r0": self.r0,
            "delta_max": self.delta_max,
        }


def propagator_from_config(cfg, lattice=None):
    lattice = lattice or Lattice(cfg.lattice.d, cfg.lattice.L, cfg.lattice.T, cfg.lattice.dx, cfg.lattice.dt)
    disp = cfg.dispersion
    dispersion = DispersionSpec(disp.type, tuple(disp.params), d=lattice.d, mu=disp.mu, r=disp.r)
    cut = cfg.cutoff
    chi = None if cut.chi is None else Plateau(cut.chi.inner, cut.chi.outer, cut.chi.smoothness)
    cutoff = CutoffSpec(cut.type, cut.inner, cut.outer, cut.smoothness, chi)
    ct = cfg.counterterm
    counterterm = None
    if ct is not None:
        counterterm = DispersionSpec(ct.type, tuple(ct.params), d=lattice.d, mu=disp.mu, r=disp.r)
    return PropagatorSpec(dispersion, lattice, cutoff, counterterm)


def build_model(cfg, lattice=None) -> InsulatorModel:
    """Model assembly from a validated config; the gap condition is checked by the propagator."""
    spec = propagator_from_config(cfg, lattice)
    lattice = spec.lattice
    inter = cfg.interaction
    v0 = v0_from_potential(potential(inter.type, inter.params), lattice)
    trunc = cfg.truncation
    model = InsulatorModel(
        lattice=lattice,
        spec=spec,
        v0=v0,
        covariance=c_position(spec),
        coupling=inter.coupling,
        lambda_order=trunc.lambda_order,
        domain=SaturatedSet.box(lattice.d, trunc.r0, trunc.r),
        r=trunc.r,
        r0=trunc.r0,
        delta_max=trunc.delta_max,
        m_max=trunc.m_max,
    )
    logger.info("✅ Model on %d base points, V0 with %d entries", lattice.n_points, v0.nnz)
    return model


def antisymmetrize_pairs(f):
    """(1/4)[f - f(x2,y1,x1,y2) - f(x1,y2,x2,y1) + f(x2,y2,x1,y1)] for a 4-point kernel."""
    if f.n != 4 or f.m != 0:
        raise UsageError("pair antisymmetrization acts on 4-point internal kernels")
    swap_x = permute_internal(f, [2, 1, 0, 3])
    swap_y = permute_internal(f, [0, 3, 2, 1])
    swap_both = permute_internal(f, [2, 3, 0, 1])
    return (f - swap_x - swap_y + swap_both).scale(0.25)


def v0_from_potential(v, lattice):
    """-1/2 delta(x1, y1) delta(x2, y2) delta(x1_0 - x2_0) v(x1 - x2), antisymmetric in x1, x2 and in y1, y2."""
    S = lattice.sites
    sites = np.arange(S)
    rows, values = [], []
    weight = -0.5 / (lattice.vol**2 * lattice.dt)
    for t in range(lattice.T):
        for s1, s2 in itertools.product(sites, sites):
            p1 = int(lattice.encode(t, s1, 0, 0))
            p2 = int(lattice.encode(t, s2, 0, 0))
            r = lattice.differences(np.array([p1]), np.array([p2]))[0, 1:]
            value = float(v(r[None, :])[0])
            if value == 0.0:
                continue
            for sigma1, sigma2 in itertools.product((0, 1), repeat=2):
                x1 = p1 + 2 * sigma1
                x2 = p2 + 2 * sigma2
                rows.append([x1 + BAR, x1 + PLAIN, x2 + BAR, x2 + PLAIN])
                values.append(weight * value)
    raw = Kernel(0, 4, lattice, np.asarray(rows, dtype=np.int64).reshape(-1, 4), np.asarray(values, dtype=complex))
    return antisymmetrize_pairs(raw)


def k_kernel(v0, C):
    """K(x, y) = 4 int dx' dy' V0(x, y, x', y') C(x', y')."""
    if v0.n != 4 or v0.m != 0:
        raise UsageError("k_kernel needs a 4-point internal V0")
    return contract(C, v0, 2, 3).scale(4.0)


# ---------- scalar inputs ----------
def g_gamma_E(spec):
    g = g1_g2(spec)[0]
    return g, gamma_constant(spec), spec.E


def upsilon(v0, mu, r, r0, delta_max):
    """sup over decay operators with delta_0 <= r0, |spatial delta| <= r of mu^|delta| |||D V0|||."""
    domain = SaturatedSet.box(v0.lattice.d, r0, r)
    table = decay_operator_norms(v0, domain, delta_max)
    best = 0.0
    for delta, value in table.items():
        if degree(delta) > delta_max:
            continue
        best = max(best, mu ** degree(delta) * value)
    return best


@dataclass(frozen=True)
class SmallnessVerdict:
    threshold: float
    v0_norm: float
    upsilon: float
    epsilon: float
    g: float
    gamma: float
    mu: float
    part_i: bool
    part_ii: bool

    @property
    def passed(self):
        return self.part_i and self.part_ii

    def to_record(self):
        return {
            "threshold": self.threshold,
            "v0_norm": self.v0_norm,
            "upsilon": self.upsilon,
            "epsilon": self.epsilon,
            "g": self.g,
            "gamma": self.gamma,
            "mu": self.mu,
            "part_i": self.part_i,
            "part_ii": self.part_ii,
        }


def smallness_check(v0_norm, upsilon_value, g, gamma, mu, d, epsilon):
    threshold = epsilon * mu**d / (g * gamma**2)
    return SmallnessVerdict(
        threshold, v0_norm, upsilon_value, epsilon, g, gamma, mu, v0_norm <= threshold, upsilon_value <= threshold
    )


# ---------- bounds report ----------
@dataclass(frozen=True)
class BoundsReport:
    g: float
    gamma: float
    E: float
    mu: float
    upsilon: float
    b: float
    epsilon: float
    contraction: NormElement
    n_values: dict
    interaction_smallness: float
    smallness: SmallnessVerdict
    s_bounds: dict
    measured: dict
    quadrature: dict
    delta_max: int
    counterterm: Optional[CountertermSeries] = None

    def to_record(self):
        return {
            "g": self.g,
            "gamma": self.gamma,
            "E": self.E,
            "mu": self.mu,
            "upsilon": self.upsilon,
            "b": self.b,
            "epsilon": self.epsilon,
            "contraction": self.contraction.to_record(),
            "n_values": {f"{alpha:g}": x.to_record() for alpha, x in sorted(self.n_values.items())},
            "interaction_smallness": self.interaction_smallness,
            "smallness": self.smallness.to_record(),
            "s_bounds": self.s_bounds,
            "measured": self.measured,
            "quadrature": self.quadrature,
            "delta_max": self.delta_max,
            "counterterm": None if self.counterterm is None else self.counterterm.to_record(),
        }


def interaction_element(model, coupling=None):
    lam = model.coupling if coupling is None else coupling
    return gr_from_kernel(model.v0, model.gens).scale(lam)


def compute_bounds(model, epsilon, rng=None, counterterm_terms=DEFAULT_COUNTERTERM_TERMS) -> BoundsReport:
    spec = model.spec
    d = model.lattice.d
    mu = spec.dispersion.mu
    domain = model.domain
    logger.info("▶ Computing bounds")
    g, gamma, E = g_gamma_E(spec)
    v0 = model.v0.scale(model.coupling)
    ups = upsilon(v0, mu, model.r, model.r0, model.delta_max)
    v0_norm = norm_1inf_scalar(v0)
    verdict = smallness_check(v0_norm, ups, g, gamma, mu, d, epsilon)

    s_squared = s_bound_gapped(spec)
    b = 2.0 * math.sqrt(s_squared)
    c = contraction_bound(model.covariance, domain, model.delta_max)
    V = interaction_element(model)
    n_values = {alpha: n_functional(V, c, b, alpha, domain, delta_max=model.delta_max) for alpha in ALPHAS}
    V_shifted = shift_convolve(V, CovarianceMatrix.from_kernel(model.covariance, model.gens.internals))
    smallness_16 = n_functional(V_shifted, c, b, 16.0, domain, delta_max=model.delta_max).body

    shape = NormElement.from_function(domain, lambda delta: g * ups / mu**d * mu ** (-degree(delta)))
    measured = {
        "contraction_constant_gapped": contraction_constant(spec, domain, "gapped", model.delta_max),
        "bound_shape_constant": ratio(c * seminorm_1inf(v0, domain, model.delta_max), shape) if ups > 0 else 0.0,
        "s_empirical": s_empirical(
            CovarianceMatrix(model.covariance.to_dense()), model.m_max, rng=rng, samples=2000
        ).value,
    }
    s_bounds = {
        "gram_bound": gram_bound(spec),
        "gram_bound_truncated": gram_bound_truncated(spec),
        "gram_constant_gapped": zone_gram_constant(spec),
        "s_bound_gapped_squared": s_squared,
    }
    series = None
    if spec.counterterm is not None:
        series = counterterm_series(spec, counterterm_terms, domain, delta_max=model.delta_max)
    report = BoundsReport(
        g=g,
        gamma=gamma,
        E=E,
        mu=mu,
        upsilon=ups,
        b=b,
        epsilon=epsilon,
        contraction=c,
        n_values=n_values,
        interaction_smallness=smallness_16,
        smallness=verdict,
        s_bounds=s_bounds,
        measured=measured,
        quadrature={"abs_tol": 1e-8, "k0_cut": spec.k0_cut},
        delta_max=model.delta_max,
        counterterm=series,
    )
    logger.info("✅ Bounds: g=%.6g gamma=%.6g E=%.6g upsilon=%.6g", g, gamma, E, ups)
    return report


# ---------- Green's functions ----------
def extract_greens(F, n, convention="amputated"):
    """G_2n(x1, y1, ..., xn, yn) from the balanced degree-2n monomials of F.

    "amputated" divides by vol^2n n!^2 so that the leading terms are V0 and K;
    "generating" divides by vol^2n only, matching sum_n 1/(n!)^2 int G_2n prod phibar phi.
    """
    if convention not in CONVENTIONS:
        raise UsageError(f"unknown convention {convention!r}; choose from {CONVENTIONS}")
    lattice = F.gens.lattice
    norm = lattice.vol ** (2 * n)
    if convention == "amputated":
        norm *= math.factorial(n) ** 2
    perms = [(p, sequence_sign(p)) for p in itertools.permutations(range(n))]
    rows, values = [], []
    for points, coeff in monomial_points(F):
        if len(points) != 2 * n:
            continue
        bars = [i for i, p in enumerate(points) if p % 2 == BAR]
        plains = [i for i, p in enumerate(points) if p % 2 == PLAIN]
        if len(bars) != n:
            continue
        order = [i for pair in zip(bars, plains) for i in pair]
        base = coeff * sequence_sign(order) / norm
        for px, sx in perms:
            for py, sy in perms:
                row = []
                for k in range(n):
                    row += [points[bars[px[k]]], points[plains[py[k]]]]
                rows.append(row)
                values.append(sx * sy * base)
    return Kernel(0, 2 * n, lattice, np.asarray(rows, dtype=np.int64).reshape(-1, 2 * n), np.asarray(values, dtype=complex))


def reassemble(kernel, gens, convention="amputated"):
    """The degree-2n part of the generating functional carried by one G_2n."""
    n = kernel.n // 2
    weight = 1.0 if convention == "amputated" else 1.0 / math.factorial(n) ** 2
    external = Kernel(kernel.n, 0, kernel.lattice, kernel.points, kernel.values)
    return gr_from_kernel(external, gens).scale(weight)


@dataclass(frozen=True, eq=False)
class GreensSet:
    """Per lambda-order Green's kernels: ``kernels[n][k]`` is the order-k coefficient of G_2n."""

    kernels: dict = field(repr=False)
    convention: str = "amputated"
    n_max: int = 2
    metadata: dict = field(default_factory=dict)

    def at(self, n, lam):
        orders = self.kernels[n]
        out = orders[0].scale(1.0)
        for k in range(1, len(orders)):
            out = out + orders[k].scale(lam**k)
        return out

    def to_record(self):
        return {
            "convention": self.convention,
            "n_max": self.n_max,
            "metadata": self.metadata,
            "entries": {
                f"G{2 * n}": [{"order": k, "nnz": f.nnz, "max_abs": f.max_abs()} for k, f in enumerate(orders)]
                for n, orders in sorted(self.kernels.items())
            },
        }


def external_gens(gens):
    return GeneratorSet(gens.lattice, gens.internals, ())


def omega_expansion(model, n_max=None, degree_cap="auto"):
    """Omega_C(lambda Gr(V0)) as a lambda series with unit coupling."""
    n_max = model.lambda_order if n_max is None else n_max
    gens = model.gens
    V = gr_from_kernel(model.v0, gens)
    C = CovarianceMatrix.from_kernel(model.covariance, gens.internals)
    logger.info("▶ Omega expansion to order %d on %d generators", n_max, gens.size)
    return omega_series(V, C, n_max, degree_cap)


def greens(model, convention="amputated", series=None, channels=(1, 2, 3)) -> GreensSet:
    """Read G_2, G_4, G_6 off Omega_C(V)(0, 0, phi, phibar) order by order in lambda."""
    series = omega_expansion(model) if series is None else series
    ext = external_gens(series.gens)
    kernels = {n: [] for n in channels}
    for order in series.orders:
        relabelled = order.internal_to_external(ext)
        for n in channels:
            kernels[n].append(extract_greens(relabelled, n, convention))
    metadata = {
        "convention": convention,
        "pattern": "x1 y1 x2 y2 ... with x carrying a=1",
        "degree_cap": series.degree_cap,
        "generators": series.gens.size,
    }
    return GreensSet(kernels, convention, series.n_max, metadata)


def deviations(greens_set, K, v0, lam):
    """G2 - K, G4 - V0 and G6 at coupling lam, with K and V0 linear in lam."""
    return {
        "G2-K": greens_set.at(1, lam) - K.scale(lam),
        "G4-V0": greens_set.at(2, lam) - v0.scale(lam),
        "G6": greens_set.at(3, lam),
    }


GAMMA_POWERS = {"G2-K": 4, "G4-V0": 2, "G6": 0}


def deviation_norms(greens_set, K, v0, domain, lam, g, gamma, ups, mu, delta_max=4):
    """|||D(deviation)||| per channel and delta, paired with g gamma^p upsilon^2 / mu^(d + |delta|)."""
    d = domain.d
    rows = []
    for channel, kernel in deviations(greens_set, K, v0, lam).items():
        table = decay_operator_norms(kernel, domain, delta_max)
        for delta, value in sorted(table.items()):
            shape = g * gamma ** GAMMA_POWERS[channel] * ups**2 / mu ** (d + degree(delta))
            measured = value / shape if shape > 0 and math.isfinite(value) else math.inf
            rows.append(
                {
                    "channel": channel,
                    "delta": "".join(str(x) for x in delta),
                    "norm": value,
                    "bound_shape": shape,
                    "measured_constant": measured,
                }
            )
    return rows


@dataclass(frozen=True)
class ScalingReport:
    lambdas: tuple
    norms: dict
    slopes: dict
    lambda_order: int = 2

    @property
    def slope_fixed_by_truncation(self):
        """Through order 2 each deviation is a single lambda^2 term, so every slope is exactly 2."""
        return self.lambda_order <= 2

    def to_record(self):
        return {
            "lambdas": list(self.lambdas),
            "norms": self.norms,
            "slopes": self.slopes,
            "lambda_order": self.lambda_order,
            "slope_fixed_by_truncation": self.slope_fixed_by_truncation,
        }


def fit_slope(lambdas, values):
    lambdas = np.asarray(lambdas, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(lambdas) < 2 or np.any(values <= 0) or np.ptp(np.log(lambdas)) == 0:
        raise NumericError("degenerate log-log fit", diagnostics={"lambdas": lambdas.tolist(), "values": values.tolist()})
    slope, _ = np.polyfit(np.log(lambdas), np.log(values), 1)
    return float(slope)


def scaling_study(model, lambdas, greens_set=None, K=None):
    """Least-squares slope of log |||deviation||| against log lambda per channel."""
    greens_set = greens(model) if greens_set is None else greens_set
    K = k_kernel(model.v0, model.covariance) if K is None else K
    norms = {channel: [] for channel in CHANNELS}
    for lam in lambdas:
        for channel, kernel in deviations(greens_set, K, model.v0, lam).items():
            norms[channel].append(norm_1inf_scalar(kernel))
    slopes = {channel: fit_slope(lambdas, values) for channel, values in norms.items()}
    report = ScalingReport(tuple(lambdas), norms, slopes, greens_set.n_max)
    if report.slope_fixed_by_truncation:
        logger.warning("⚠ lambda order %d: the slopes equal 2 by construction", greens_set.n_max)
    logger.info("✅ Scaling slopes %s", {k: round(v, 4) for k, v in slopes.items()})
    return report


# ---------- structural identities ----------
def wick_shift_identity(model, tol=1e-10):
    """V' = shift(V, C): checks :V': = V and V' = V + Gr(K) + const."""
    gens = model.gens
    V = interaction_element(model, 1.0)
    C = CovarianceMatrix.from_kernel(model.covariance, gens.internals)
    shifted = shift_convolve(V, C)
    reordered = wick_order(shifted, C)
    K = k_kernel(model.v0, model.covariance)
    rest = shifted - V - gr_from_kernel(K, gens)
    constant_only = all(mask == 0 or abs(v) <= tol * max(1.0, V.max_abs()) for mask, v in rest.terms.items())
    return {
        "wick_inverse": reordered.is_close(V, rtol=tol),
        "quadratic_is_k": constant_only,
        "constant": complex(rest.body),
    }


def greens_roundtrip(greens_set, series, tol=1e-9):
    """Re-assemble sum_n Gr(G_2n) per lambda order and compare with Omega's balanced part."""
    ext = external_gens(series.gens)
    worst = 0.0
    for k, order in enumerate(series.orders):
        target = order.internal_to_external(ext)
        rebuilt = GrassmannElement.zero(ext)
        for n, kernels in greens_set.kernels.items():
            rebuilt = rebuilt + reassemble(kernels[k], ext, greens_set.convention)
        wanted = GrassmannElement(
            ext, {m: v for m, v in target.terms.items() if 2 <= m.bit_count() <= 2 * max(greens_set.kernels)}
        )
        scale = max(wanted.max_abs(), 1e-300)
        worst = max(worst, (rebuilt - wanted).max_abs() / scale)
    return worst <= tol, worst


def spin_flip(kernel):
    """Global spin flip sigma -> 1 - sigma on every slot."""
    return kernel.with_entries(kernel.points ^ 2, kernel.values)


def spin_flip_defect(kernel):
    diff = spin_flip(kernel) - kernel
    return diff.max_abs() / max(kernel.max_abs(), 1e-300)


def exact_backend_agreement(model, degree_cap="auto"):
    """Largest relative gap between the degree-capped series and the uncapped one through lambda_order.

    Orders of an uncapped series are exact for every retained power of lambda.
    """
    gens = model.gens
    if gens.size > 16:
        raise UsageError(f"exact backend comparison is limited to 16 generators, got {gens.size}")
    truncated = omega_expansion(model, model.lambda_order, degree_cap)
    exact = omega_expansion(model, model.lambda_order, None)
    worst = 0.0
    for k in range(model.lambda_order + 1):
        a, b = truncated.orders[k], exact.orders[k]
        scale = max(b.max_abs(), 1e-300)
        worst = max(worst, (a - b).max_abs() / scale if b.terms or a.terms else 0.0)
    return worst


def first_order_checks(greens_set, K, v0):
    """Relative gaps of the order-lambda coefficients of G2, G4, G6 to K, V0 and 0."""
    g2 = greens_set.kernels[1][1]
    g4 = greens_set.kernels[2][1]
    g6 = greens_set.kernels[3][1]
    return {
        "G2": (g2 - K).max_abs() / max(K.max_abs(), 1e-300),
        "G4": (g4 - v0).max_abs() / max(v0.max_abs(), 1e-300),
        "G6": g6.max_abs() / max(g4.max_abs(), 1e-300),
    }
