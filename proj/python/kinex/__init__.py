"""Kinetic wealth-exchange simulation and income-distribution analysis."""

import json as _json

from ._kinex import (
    KinexError,
    __version__,
    ccdf,
    cli,
    count_modes,
    exchange_pair,
    fit_hill,
    fit_tail,
    gini,
    ks_distance,
    pdf_histogram,
    read_income_table,
    relative_ccdf,
    run_scenario_json,
    simulate,
)


def run_scenario(config):
    """Run a scenario given as a dict in the config-file schema; returns (snapshots, events)."""
    return run_scenario_json(_json.dumps(config))


__all__ = [
    "KinexError",
    "__version__",
    "ccdf",
    "cli",
    "count_modes",
    "exchange_pair",
    "fit_hill",
    "fit_tail",
    "gini",
    "ks_distance",
    "pdf_histogram",
    "read_income_table",
    "relative_ccdf",
    "run_scenario",
    "run_scenario_json",
    "simulate",
]
