import pytest

from fermirg.checks import SuiteResult, check_grassmann, check_kernels, discover_suites, run_suite, suite_seed
from fermirg.config import FermiRGConfig
from fermirg.errors import DomainError


def test_discovery_finds_every_suite():
    assert discover_suites() == [
        "bounds",
        "grassmann",
        "insulator",
        "kernels",
        "norm_domain",
        "propagator",
        "rg_map",
    ]


def test_suite_seeds_are_independent_of_each_other():
    a = suite_seed(0, "kernels").generate_state(4)
    assert (a == suite_seed(0, "kernels").generate_state(4)).all()
    assert not (a == suite_seed(0, "grassmann").generate_state(4)).all()
    assert not (a == suite_seed(1, "kernels").generate_state(4)).all()


def test_property_errors_fail_only_that_property():
    result = SuiteResult("demo")

    def broken():
        raise DomainError("outside")

    result.check("broken", broken)
    result.check("fine", lambda: (True, {"value": 1}))
    record = result.to_record()
    assert [p["passed"] for p in record["properties"]] == [False, True]
    assert "DomainError" in record["properties"][0]["detail"]["error"]
    assert record["error"] is None


def test_unknown_suite_is_an_error_entry():
    record = run_suite("missing", FermiRGConfig(), 0)
    assert record["error"].startswith("ModuleNotFoundError")


@pytest.mark.slow
@pytest.mark.parametrize("name", discover_suites())
def test_suite_passes_on_desk_defaults(name):
    record = run_suite(name, FermiRGConfig(), 0)
    assert record["error"] is None
    failed = [p for p in record["properties"] if not p["passed"]]
    assert not failed, failed


def test_leibniz_rule_covers_third_order_on_the_default_pair_count(rng):
    passed, detail = check_kernels._leibniz(rng, FermiRGConfig().checks.leibniz_pairs)
    assert passed, detail
    assert detail["pairs"] == 100
    assert detail["max_order"] == 3


def test_semigroup_sample_count_comes_from_config(rng):
    cfg = FermiRGConfig(checks={"semigroup_samples": 7})
    passed, detail = check_grassmann._semigroup(rng, cfg.checks.semigroup_samples)
    assert passed, detail
    assert detail == {"samples": 7}
    assert FermiRGConfig().checks.semigroup_samples >= 20
