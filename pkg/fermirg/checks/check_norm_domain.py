"""Semiring laws and the resolvent majorants of the norm domain."""

import itertools
import math

import numpy as np

from ..norm_domain import (
    Geometric,
    NormElement,
    Quotient,
    SaturatedSet,
    analytic_constant,
    apply_analytic,
    convolve,
    frak_c,
    frak_e,
    from_record,
    geom_inverse,
    n_of,
    nilpotency_order,
    quotient_bound,
    quotient_form,
    ratio,
    rational_majorant,
    resolvent_constant,
    restrict,
    scale,
)
from . import SuiteResult, suite_rng
from .samples import dominated, domains, norm_element, small_body_pair

NAME = "norm_domain"
PAIRS = 200
A3_RATES = (0.1, 1.0, 3.0)
A3_COUPLINGS = (0.0, 0.25, 0.5)


def _semiring(rng, domain, count):
    for _ in range(count):
        x, y, z = (norm_element(rng, domain, 1.0) for _ in range(3))
        one = NormElement.one(domain)
        laws = (
            x + y == y + x,
            x * y == y * x,
            (x + y) + z == x + (y + z),
            (x * y) * z == x * (y * z),
            x * (y + z) == x * y + x * z,
            x * one == x,
        )
        if not all(laws):
            return False, {"laws": [bool(v) for v in laws]}
    return True, {"samples": count}


def _saturation(rng, domain, count):
    big = SaturatedSet.box(domain.d, max(m[0] for m in domain) + 1, max(sum(m[1:]) for m in domain) + 1)
    for _ in range(count):
        x, y = norm_element(rng, big), norm_element(rng, big)
        if restrict(x * y, domain) != restrict(x, domain) * restrict(y, domain):
            return False, {}
    return True, {"samples": count}


def _inverse_identity(rng, domain, count):
    worst = 0.0
    for _ in range(count):
        a = 2.0
        x = norm_element(rng, domain, 1.0)
        signed = -x.coefficients.copy()
        signed[0] += a
        product = convolve(signed, geom_inverse(a, x).coefficients, domain)
        target = np.zeros(len(domain))
        target[0] = 1.0
        scale_ = max(1.0, float(np.abs(geom_inverse(a, x).coefficients).max()))
        worst = max(worst, float(np.abs(product - target).max()) / scale_)
    return worst <= 1e-12, {"max_residual": worst}


def _monotone(rng, domain, count):
    for _ in range(count):
        x, y = norm_element(rng, domain), norm_element(rng, domain)
        xp = x + norm_element(rng, domain, 0.5)
        yp = y + norm_element(rng, domain, 0.5)
        if not ((x + y) <= (xp + yp) and (x * y) <= (xp * yp)):
            return False, {}
    return True, {"samples": count}


def _resolvent_product(rng, domain, count):
    worst = 0.0
    for _ in range(count):
        x, y = small_body_pair(rng, domain, 1.0)
        ok, detail = dominated(geom_inverse(1.0, x) * geom_inverse(1.0, y), geom_inverse(1.0, x + y))
        worst = max(worst, detail["max_ratio"])
        if not ok:
            return False, detail
    return True, {"max_ratio": worst}


def _resolvent_split(rng, domain, count):
    const = 2.0 ** (2 * nilpotency_order(domain) - 1)
    single_index = 2.0 ** (2 * n_of(domain) - 1)
    worst = 0.0
    for _ in range(count):
        x, y = small_body_pair(rng, domain, 0.5)
        rhs = scale(geom_inverse(1.0, x) * geom_inverse(1.0, y), const)
        ok, detail = dominated(geom_inverse(1.0, x + y), rhs)
        worst = max(worst, detail["max_ratio"])
        if not ok:
            return False, detail
    return True, {"max_ratio": worst, "constant": const, "single_index_constant": single_index}


def _quotient_example(domain):
    rows = []
    for a, lam in itertools.product(A3_RATES, A3_COUPLINGS):
        h = rational_majorant(quotient_form(a, lam), domain)
        ok, detail = dominated(h, quotient_bound(domain, a))
        rows.append({"a": a, "lambda": lam, "passed": ok, **detail})
    return all(r["passed"] for r in rows), {"cases": rows}


def _majorant_quotient(rng, domain, count):
    f = Geometric(0.5, power=2)
    g = Geometric(0.5, scale=0.25)
    tf = rational_majorant(f, domain)
    tg = rational_majorant(g, domain)
    target = rational_majorant(Quotient(f, g), domain)
    for _ in range(count):
        x = NormElement(domain, tf.coefficients * rng.uniform(0, 1, len(domain)))
        y = NormElement(domain, tg.coefficients * rng.uniform(0, 1, len(domain)))
        ok, detail = dominated(x * geom_inverse(1.0, y), target)
        if not ok:
            return False, detail
    return True, {"samples": count}


def _analytic_forms(rng, domain, count):
    rows = []
    n = nilpotency_order(domain)
    for form in ("exp", "geometric"):
        for _ in range(count):
            x = norm_element(rng, domain, 0.5, body=float(rng.integers(0, 8)) / 16)
            beta = 1.0
            c = analytic_constant(form, x.body, beta, n)
            ok, detail = dominated(apply_analytic(form, x), scale(geom_inverse(1.0, scale(x, beta)), c))
            if not ok:
                rows.append({"form": form, **detail})
    return not rows, {"failures": rows}


def _resolvent_chain(rng, domain, count):
    """e / (1 - mu e) dominates mu e^2; the explicit chain constant is reported next to the measured one."""
    measured = []
    for _ in range(count):
        lam, Lam = 0.5, 0.5
        c = restrict(frak_c(3, 3, lam, Lam, domain.d), domain)
        x = norm_element(rng, domain, 0.25, body=float(rng.integers(0, 4)) / 16)
        mu = 0.25 - Lam * x.body
        e = frak_e(x, Lam, c)
        resolvent = e * geom_inverse(1.0, scale(e, mu))
        ok, _ = dominated(scale(e * e, mu), resolvent)
        if not ok:
            return False, {"mu": mu}
        chain = 2.0 ** (2 * nilpotency_order(domain) - 1) * resolvent_constant(c, mu)
        measured.append({"measured": ratio(resolvent, e), "chain": chain})
    return True, {"samples": measured[:5]}


def _records(rng, domain):
    x = norm_element(rng, domain)
    x = NormElement(domain, np.where(np.arange(len(domain)) == len(domain) - 1, math.inf, x.coefficients))
    back = from_record(x.to_record())
    return back == x, {"inf_token": x.to_record()["coefficients"][-1][1]}


def main(config, seed):
    rng = suite_rng(seed, NAME)
    result = SuiteResult(NAME)
    per_domain = max(1, PAIRS // 2)
    for domain in domains():
        tag = f"d={domain.d}"
        result.check(f"semiring laws ({tag})", lambda: _semiring(rng, domain, 20))
        result.check(f"saturation closure ({tag})", lambda: _saturation(rng, domain, 10))
        result.check(f"inverse identity ({tag})", lambda: _inverse_identity(rng, domain, 20))
        result.check(f"monotonicity ({tag})", lambda: _monotone(rng, domain, 20))
        result.check(f"product of resolvents ({tag})", lambda: _resolvent_product(rng, domain, per_domain))
        result.check(f"resolvent splitting ({tag})", lambda: _resolvent_split(rng, domain, per_domain))
        result.check(f"quotient example bound ({tag})", lambda: _quotient_example(domain))
        result.check(f"quotient majorants ({tag})", lambda: _majorant_quotient(rng, domain, 20))
        result.check(f"analytic functions ({tag})", lambda: _analytic_forms(rng, domain, 10))
        result.check(f"resolvent chain ({tag})", lambda: _resolvent_chain(rng, domain, 10))
        result.check(f"record round trip ({tag})", lambda: _records(rng, domain))
    return result.to_record()
