"""Subordinated heat semigroups, Besov critical exponents and functional inequalities."""

import json as _json

from ._subheat import (
    ConfigInvalid,
    Space,
    Spectrum,
    SubheatError,
    WrongRegime,
    ahlfors_fit,
    ball,
    besov_energy,
    build_space,
    canonical_family,
    capacity,
    config_hash,
    critical_exponent,
    eigendecompose,
    exponent_grid,
    fractional_laplacian,
    heat_kernel,
    laplace_check,
    parse_config,
    resolved_time_grid,
    sobolev_check,
    subordinated_kernel,
    subordinator_density,
    subordinator_moment,
    suite_names,
    version_info,
    w_norm,
    weak_be_fit,
)
from . import _subheat

__version__ = version_info()["subheat"]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def evaluate(config):
    """Run a config (dict or JSON text) in memory. Returns (exit_code, records)."""
    code, report = _subheat.evaluate(_text(config))
    return code, _json.loads(report)


def run(config, out_dir):
    """Run a config and write report files into out_dir. Returns the exit code."""
    return _subheat.run(_text(config), str(out_dir))
