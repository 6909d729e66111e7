import json
import math

import numpy as np
import pytest

import subheat


def test_circle_space():
    g = subheat.build_space("circle", 8)
    assert g.node_count == 8
    assert g.distance(0, 4) == pytest.approx(0.5)
    assert g.measure.sum() == pytest.approx(1.0)
    assert g.kappa == 1.0
    assert subheat.ball(g, 0, 0.3) == [0, 1, 2, 6, 7]


def test_gasket_counts():
    g = subheat.build_space("gasket", 1)
    assert g.node_count == 6
    assert g.kappa is None


def test_subordinator():
    expected = math.exp(-0.25) / (2 * math.sqrt(math.pi))
    assert subheat.subordinator_density(0.5, 1.0, 1.0) == pytest.approx(expected, rel=1e-10)
    assert subheat.subordinator_moment(0.5, 2.0, -1.0) == pytest.approx(0.5, rel=1e-8)
    assert subheat.subordinator_moment(0.5, 1.0, 0.5) is None
    quadrature, reference, error = subheat.laplace_check(0.5, 1.0, 4.0)
    assert reference == pytest.approx(math.exp(-2.0))
    assert error < 1e-6


def test_kernels_and_spectrum():
    g = subheat.build_space("circle", 64)
    spec = subheat.eigendecompose(g)
    lam1 = 4 * 64**2 * math.sin(math.pi / 64) ** 2
    assert spec.eigenvalues[1] == pytest.approx(lam1, rel=1e-10)
    k = subheat.heat_kernel(spec, 0.1)
    assert k.shape == (64, 64)
    np.testing.assert_allclose(k @ g.measure, 1.0, atol=1e-8)
    p = subheat.subordinated_kernel(spec, 0.5, 0.1)
    np.testing.assert_allclose(p, p.T, atol=0)


def test_family_and_exponent():
    g = subheat.build_space("circle", 256)
    spec = subheat.eigendecompose(g)
    family = subheat.canonical_family(g, spec)
    assert sorted(family) == sorted(
        ["smoothed_indicator", "sharp_indicator", "low_mode", "holder_rough", "tent", "phi_1"])
    r = subheat.critical_exponent(spec, g, 0.8, 1.0, family)
    assert abs(r["estimate"] - 0.625) <= 0.05
    assert r["pass"]


def test_capacity_and_regime():
    g = subheat.build_space("interval", 64, "absorbing")
    spec = subheat.eigendecompose(g)
    small = subheat.capacity(spec, g, 0.25, list(range(28, 36)))
    large = subheat.capacity(spec, g, 0.25, list(range(24, 40)))
    assert 0 < small <= large
    circle = subheat.build_space("circle", 64)
    family = subheat.canonical_family(circle, subheat.eigendecompose(circle))
    with pytest.raises(subheat.WrongRegime):
        subheat.sobolev_check(circle, 0.5, 1.0, family)


def test_config_validation():
    with pytest.raises(subheat.ConfigInvalid) as info:
        subheat.parse_config('{"space": {"kind": "circle", "resolution": 64}, "deltas": [0.5], "suites": []}')
    assert info.value.field == "suites"
    assert "suites: empty" in str(info.value)


def test_config_round_trip_and_run(tmp_path):
    config = {
        "name": "py",
        "space": {"kind": "circle", "resolution": 128},
        "deltas": [0.8],
        "suites": [{"name": "critical_exponent"}],
    }
    canonical = subheat.parse_config(json.dumps(config))
    assert subheat.parse_config(canonical) == canonical
    assert subheat.config_hash(canonical) == subheat.config_hash(json.dumps(config))
    code, records = subheat.evaluate(config)
    assert code in (0, 2)
    assert records[0]["suite"] == "critical_exponent"
    assert subheat.run(config, tmp_path) == code
    assert (tmp_path / "report.json").read_text() == subheat._subheat.evaluate(canonical)[1]
