import argparse
import logging
import sys
import time

from .checks import discover_suites, run_suite, suite_rng
from .config import DEFAULT_COUNTERTERM_TERMS, MODES, config_digest, load_config, validate_config
from .errors import ConfigError, FermiRGError
from .insulator import (
    build_model,
    compute_bounds,
    deviation_norms,
    g_gamma_E,
    greens,
    k_kernel,
    scaling_study,
    upsilon,
)
from .kernels import Lattice
from .reporting import RunManifest, emit, write_timing

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


# ---------- CONFIG OVERRIDES ----------
def apply_overrides(cfg, args):
    """Fold CLI flags into ``run``; the result is validated again so bad flags report a field path."""
    data = cfg.model_dump(mode="json", by_alias=True)
    run = data["run"]
    run["mode"] = args.mode
    for key in ("seed", "epsilon", "out", "format"):
        value = getattr(args, key, None)
        if value is not None:
            run[key] = value
    if getattr(args, "lambdas", None):
        run["lambdas"] = args.lambdas
    return validate_config(data)


def parse_lambdas(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma list of numbers: {text!r}") from exc


def manifest_for(cfg, quadrature=None):
    lat = cfg.lattice
    lattice = Lattice(lat.d, lat.L, lat.T, lat.dx, lat.dt)
    return RunManifest(
        digest=config_digest(cfg),
        mode=cfg.run.mode,
        seed=cfg.run.seed,
        lattice=lattice.to_record(),
        quadrature=quadrature or {},
    )


# ---------- MODES ----------
def run_verify(cfg):
    known = discover_suites()
    selected = known if cfg.checks.suites is None else cfg.checks.suites
    unknown = sorted(set(selected) - set(known))
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; available {known}", path="checks.suites")

    suites, skipped = [], []
    for name in known:
        if name not in selected:
            skipped.append({"suite": name, "reason": "not selected in checks.suites"})
            continue
        suites.append(run_suite(name, cfg, cfg.run.seed))

    passed = all(not s["error"] and all(p["passed"] for p in s["properties"]) for s in suites)
    rows = [
        {"suite": s["suite"], "property": p["name"], "passed": p["passed"]} for s in suites for p in s["properties"]
    ]
    rows += [{"suite": s["suite"], "property": "", "passed": False, "error": s["error"]} for s in suites if s["error"]]
    report = {"suites": suites, "skipped_suites": skipped, "passed": passed}
    return report, {"properties": rows}, passed, {}


def run_bounds(cfg):
    model = build_model(cfg)
    rng = suite_rng(cfg.run.seed, "bounds-mode")
    terms = DEFAULT_COUNTERTERM_TERMS if cfg.counterterm is None else cfg.counterterm.n_max
    bounds = compute_bounds(model, cfg.run.epsilon, rng, counterterm_terms=terms)
    report = {"model": model.to_record(), "bounds": bounds}
    return report, {}, True, bounds.quadrature


def run_greens(cfg):
    model = build_model(cfg)
    greens_set = greens(model)
    K = k_kernel(model.v0, model.covariance)
    g, gamma, _ = g_gamma_E(model.spec)
    mu = model.spec.dispersion.mu
    ups = upsilon(model.v0.scale(model.coupling), mu, model.r, model.r0, model.delta_max)
    rows = deviation_norms(
        greens_set, K, model.v0, model.domain, model.coupling, g, gamma, ups, mu, delta_max=model.delta_max
    )
    report = {
        "model": model.to_record(),
        "greens": greens_set,
        "coupling": model.coupling,
        "constants": {"g": g, "gamma": gamma, "upsilon": ups, "mu": mu},
        "deviations": rows,
    }
    return report, {"deviations": rows}, True, {"k0_cut": model.spec.k0_cut}


def run_scaling(cfg):
    model = build_model(cfg)
    study = scaling_study(model, cfg.run.lambdas)
    rows = [
        {"channel": channel, "lambda": lam, "norm": value}
        for channel, values in sorted(study.norms.items())
        for lam, value in zip(study.lambdas, values)
    ]
    report = {"model": model.to_record(), "scaling": study}
    return report, {"norms": rows}, True, {"k0_cut": model.spec.k0_cut}


RUNNERS = {
    "verify": run_verify,
    "bounds": run_bounds,
    "greens": run_greens,
    "scaling": run_scaling,
}


def run(mode, cfg):
    """Execute ``mode`` on a validated config, write its artifacts and return the exit code."""
    started = time.perf_counter()
    out = cfg.run.out
    try:
        report, tables, passed, quadrature = RUNNERS[mode](cfg)
    except ConfigError:
        raise
    except FermiRGError as exc:
        logger.error("❌ %s failed: %s", mode, exc)
        report = {"error": f"{type(exc).__name__}: {exc}"}
        tables, passed, quadrature = {}, False, {}
    report = {"manifest": manifest_for(cfg, quadrature), **report}
    emit(report, out, mode, cfg.run.format, tables)
    write_timing(out, mode, time.perf_counter() - started)
    if passed:
        logger.info("✅ %s finished", mode)
        return EXIT_OK
    logger.warning("❌ %s reported violations", mode)
    return EXIT_VIOLATION


def build_parser():
    parser = argparse.ArgumentParser(prog="fermirg", description="Single-scale fermionic renormalization group checks")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="JSON config file (desk defaults when omitted)", default=None)
    parser.add_argument("--out", help="Output directory for reports")
    parser.add_argument("--format", choices=["json", "csv"], help="Report format")
    parser.add_argument("--seed", type=int, help="Run seed")
    parser.add_argument("--epsilon", type=float, help="Smallness parameter epsilon")
    parser.add_argument("--lambdas", type=parse_lambdas, help="Comma list of couplings for scaling mode")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, force=True)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return run(args.mode, cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
