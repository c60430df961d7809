import json

import pytest

from fermirg.config import FermiRGConfig, config_digest, load_config, validate_config
from fermirg.errors import ConfigError
from fermirg.insulator import propagator_from_config


def test_desk_defaults(desk_config):
    assert (desk_config.lattice.d, desk_config.lattice.L, desk_config.lattice.T) == (1, 4, 4)
    assert desk_config.dispersion.params == [-2.0, -1.0]
    assert desk_config.interaction.coupling == 0.05
    assert desk_config.truncation.lambda_order == 2
    assert desk_config.run.mode == "verify"


def test_missing_file_loads_defaults():
    assert load_config(None) == FermiRGConfig()


def test_missing_path(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.json")


def test_negative_gap_names_its_field():
    with pytest.raises(ConfigError) as err:
        validate_config({"dispersion": {"mu": -1.0}})
    assert err.value.path == "dispersion.mu"


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError) as err:
        validate_config({"lattice": {"spacing": 2.0}})
    assert err.value.path == "lattice.spacing"


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_lambda_alias(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"interaction": {"lambda": 0.2}}), encoding="utf-8")
    assert load_config(path).interaction.coupling == 0.2


@pytest.mark.parametrize(
    "data, path",
    [
        ({"dispersion": {"params": [1.0, 2.0, 3.0, 4.0]}}, ""),
        ({"interaction": {"type": "exponential", "params": [1.0, -1.0]}}, "interaction"),
        ({"run": {"lambdas": [0.1, -0.1]}}, "run.lambdas"),
        ({"lattice": {"d": 2, "dx": [1.0]}}, "lattice"),
        ({"run": {"mode": "train"}}, "run.mode"),
        ({"counterterm": {"type": "cosine", "params": [0.1, 0.1, 0.1]}}, ""),
        ({"counterterm": {"type": "quadratic"}}, "counterterm.type"),
    ],
)
def test_cross_field_rules(data, path):
    with pytest.raises(ConfigError) as err:
        validate_config(data)
    assert err.value.path == path


def test_digest_ignores_key_order_and_whitespace(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(json.dumps({"run": {"seed": 3}, "lattice": {"L": 4}}), encoding="utf-8")
    b.write_text(json.dumps({"lattice": {"L": 4}, "run": {"seed": 3}}, indent=4), encoding="utf-8")
    assert config_digest(load_config(a)) == config_digest(load_config(b))


def test_digest_tracks_content():
    assert config_digest(validate_config({"run": {"seed": 1}})) != config_digest(FermiRGConfig())


def test_counterterm_reaches_the_propagator():
    assert propagator_from_config(FermiRGConfig()).counterterm is None
    spec = propagator_from_config(validate_config({"counterterm": {"type": "cosine", "params": [0.1, 0.05]}}))
    assert spec.counterterm.kind == "cosine"
    assert spec.counterterm.parameters == (0.1, 0.05)
    assert spec.form == "counterterm"
