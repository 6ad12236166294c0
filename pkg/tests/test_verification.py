from dataclasses import replace

import numpy as np
import pytest

from roughmild.config import RunConfig
from roughmild.models import Grid, QSpectrum
from roughmild.stochastic_drivers import sample_q_fbm, save_driver
from roughmild.verification import (
    SUITES,
    driver_file_checks,
    random_controlled,
    run_verify_suites,
    structural_drivers,
)


def small_config(**verify):
    base = RunConfig()
    settings = dict(instances=1, steps=32, hursts=(0.4,), quad_steps=16, quad_samples=2,
                    sewing_steps=256, sewing_levels=6)
    settings.update(verify)
    return replace(base, verify=replace(base.verify, **settings))


def _failures(rows):
    return [(r.check_id, r.instance_id, r.lhs, r.rhs) for r in rows if not r.passed]


def test_structural_drivers_cover_every_kind():
    ids = [instance for instance, _, _ in structural_drivers(small_config())]
    assert len(ids) == 4
    assert {i.split("/")[0] for i in ids} == {"piecewise_linear", "ito_wiener",
                                              "geometric_wiener", "geometric_fbm"}


@pytest.mark.parametrize("suite", ["chen", "geometric", "scaling", "norms", "semigroup"])
def test_exact_suites_pass(suite):
    rows = SUITES[suite](small_config())
    assert rows
    assert _failures(rows) == []


def test_geometric_suite_skips_ito_lift():
    rows = SUITES["geometric"](small_config())
    assert not any("ito_wiener" in r.instance_id for r in rows)


def test_convolution_identities_hold():
    rows = SUITES["convolution"](small_config(steps=64))
    exact = [r for r in rows if not r.check_id.startswith("decomposition_slope")]
    assert _failures(exact) == []
    assert {r.check_id for r in rows} >= {"zero_generator_reduction", "decomposition_split",
                                          "twisted_prefactor_1", "twisted_prefactor_2",
                                          "regular_lipschitz", "regular_holder"}


@pytest.mark.slow
def test_slope_suites_pass_at_default_size():
    config = replace(RunConfig(), verify=replace(RunConfig().verify, instances=1))
    for suite in ("sewing", "convolution"):
        assert _failures(SUITES[suite](config)) == []


def test_random_controlled_derivative_is_consistent():
    rough = sample_q_fbm(QSpectrum([1.0, 0.5]), 0.45, Grid(1.0, 512), seed=1).rough
    cp = random_controlled(rough, 3, seed=1)
    assert cp.y_prime.values.shape == (513, 3, 2)
    dy = np.diff(cp.y.values, axis=0)
    first_order = np.einsum("kab,kb->ka", cp.y_prime.values[:-1], rough.increments)
    assert np.linalg.norm(dy - first_order) < 0.5 * np.linalg.norm(dy)


def test_driver_file_checks(tmp_path):
    sample = sample_q_fbm(QSpectrum([1.0, 0.5]), 0.4, Grid(1.0, 16), seed=2)
    good = tmp_path / "good.txt"
    save_driver(sample, good)
    rows = driver_file_checks(str(good))
    assert [r.check_id for r in rows] == ["chen_defect", "geometric_defect"]
    assert all(r.passed for r in rows)


def test_broken_driver_file_is_a_failed_check(tmp_path):
    broken = tmp_path / "broken.txt"
    broken.write_text("roughpath v1 dim=2 steps=4 T=1.0 alpha=0.4\n0 0\n1 1\n")
    rows = driver_file_checks(str(broken))
    assert len(rows) == 1
    assert rows[0].check_id == "chen_defect" and not rows[0].passed
    assert rows[0].lhs == float("inf")


def test_run_verify_suites_adds_driver_file(tmp_path):
    config = small_config(suites=("chen",), driver_file=str(tmp_path / "absent.txt"))
    results = run_verify_suites(config)
    assert list(results) == ["chen", "driver_file"]
    assert not results["driver_file"][0].passed


def test_empty_suite_list():
    assert run_verify_suites(small_config(suites=())) == {}
