import os

import numpy as np
import pytest

from roughmild.config import ALL_SUITES, RunConfig, load_config, parse_config, parse_spectrum
from roughmild.errors import ConfigError

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


def test_default_file_matches_builtin_defaults():
    config = load_config(os.path.join(CONFIGS, "default.ini"))
    builtin = RunConfig()
    for section in ("run", "grid", "semigroup", "solver", "montecarlo", "verify"):
        assert getattr(config, section) == getattr(builtin, section), section
    np.testing.assert_allclose(config.driver.spectrum.eigenvalues, builtin.driver.spectrum.eigenvalues)
    assert config.driver.kind is None and config.driver.file is None
    assert config.source.endswith("default.ini")
    assert len(config.config_hash) == 12


def test_acceptance_file_parses():
    config = load_config(os.path.join(CONFIGS, "acceptance.ini"))
    assert config.verify.instances == 100


def test_values_are_converted():
    config = parse_config(
        "[run]\nseed = 7\nreproducible = yes\n"
        "[solver]\npreset = rode_flat\npicard_tol = 1e-8\nhurst = 0.45\n"
        "[verify]\nsuites = chen, sewing\n"
    )
    assert config.run.seed == 7 and config.run.reproducible
    assert config.solver.preset == "rode_flat"
    assert config.solver.solve.picard_tol == 1e-8
    assert config.solver.preset_params()["hurst"] == 0.45
    assert config.verify.suites == ("chen", "sewing")


def test_empty_suites_allowed():
    assert parse_config("[verify]\nsuites =\n").verify.suites == ()
    assert RunConfig().verify.suites == ALL_SUITES


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("[run]\nseed = 1\n\n[grid]\nstep = 64\n")
    assert info.value.line == 5
    assert "line 5" in str(info.value)


def test_bad_value_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("[grid]\nsteps = many\n")
    assert info.value.line == 2


@pytest.mark.parametrize("text", [
    "[nowhere]\nx = 1\n",
    "[driver]\nkind = levy\n",
    "[montecarlo]\nexperiment = everything\n",
    "[verify]\nsuites = chen, magic\n",
    "[solver]\ninitial_window = 2.0\n",
    "no section header\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_hash_depends_on_text():
    a = parse_config("[run]\nseed = 1\n")
    b = parse_config("[run]\nseed = 2\n")
    assert a.config_hash != b.config_hash
    assert parse_config("[run]\nseed = 1\n").config_hash == a.config_hash


def test_parse_spectrum():
    np.testing.assert_allclose(parse_spectrum("polynomial(decay=1, d=2)").eigenvalues, [2 / 3, 1 / 3])
    np.testing.assert_allclose(parse_spectrum("0.25, 1.0").eigenvalues, [1.0, 0.25])
    with pytest.raises(ValueError):
        parse_spectrum("polynomial(rate=2)")
