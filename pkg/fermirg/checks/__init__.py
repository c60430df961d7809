"""Verify-mode property suites.

Every ``check_<name>`` module exposes ``main(config, seed)`` and returns
``{"suite", "properties": [{"name", "passed", "detail"}], "skipped", "error"}``.
"""

import importlib
import logging
import pkgutil
import zlib

import numpy as np

from ..errors import FermiRGError

logger = logging.getLogger(__name__)

CHECKS_PACKAGE = __name__
SUITE_PREFIX = "check_"


def discover_suites():
    """Suite names in module order, without the ``check_`` prefix."""
    package = importlib.import_module(CHECKS_PACKAGE)
    return sorted(
        name[len(SUITE_PREFIX) :] for _, name, _ in pkgutil.iter_modules(package.__path__) if name.startswith(SUITE_PREFIX)
    )


def suite_seed(seed, name):
    """Per-suite seed sequence; independent of which other suites exist."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))


def suite_rng(seed, name):
    return np.random.default_rng(suite_seed(seed, name))


class SuiteResult:
    """Collects properties; a ``FermiRGError`` inside a property fails that property only."""

    def __init__(self, name):
        self.name = name
        self.properties = []
        self.skipped = []
        self.error = None

    def record(self, name, passed, detail=None):
        self.properties.append({"name": name, "passed": bool(passed), "detail": detail if detail is not None else {}})
        if not passed:
            logger.warning("❌ %s: %s failed %s", self.name, name, detail)

    def check(self, name, fn):
        """Run ``fn() -> (passed, detail)`` and record it."""
        try:
            passed, detail = fn()
        except FermiRGError as exc:
            self.record(name, False, {"error": f"{type(exc).__name__}: {exc}"})
            return
        self.record(name, passed, detail)

    def skip(self, name, reason):
        self.skipped.append({"name": name, "reason": reason})
        logger.info("⚠ %s: skipped %s (%s)", self.name, name, reason)

    @property
    def passed(self):
        return self.error is None and all(p["passed"] for p in self.properties)

    def to_record(self):
        return {"suite": self.name, "properties": self.properties, "skipped": self.skipped, "error": self.error}


def run_suite(name, config, seed):
    """Run one suite; unexpected exceptions become the suite's ``error`` entry."""
    module_name = f"{CHECKS_PACKAGE}.{SUITE_PREFIX}{name}"
    try:
        module = importlib.import_module(module_name)
        if not hasattr(module, "main"):
            logger.warning("⚠ %s has no main()", module_name)
            return {"suite": name, "properties": [], "skipped": [], "error": "suite has no main()"}
        logger.info("▶ Running %s", module_name)
        record = module.main(config=config, seed=seed)
    except Exception as exc:  # noqa: BLE001
        logger.error("❌ Error running %s: %s", module_name, exc)
        return {"suite": name, "properties": [], "skipped": [], "error": f"{type(exc).__name__}: {exc}"}
    failed = [p["name"] for p in record["properties"] if not p["passed"]]
    if failed or record.get("error"):
        logger.warning("❌ %s: %d of %d properties failed", name, len(failed), len(record["properties"]))
    else:
        logger.info("✅ %s: %d properties", name, len(record["properties"]))
    return record
