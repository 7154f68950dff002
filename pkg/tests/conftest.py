"""Shared fixtures: cached oracle covariances and common parameter grids."""

from __future__ import annotations

import pytest

from steerkit import dynamics, reduced_from_ratios

# grid used for oracle-vs-closed-form equivalence and its dependents
ORACLE_GRID = [
    (r, x, n0, n, ratio)
    for r in (0.25, 0.5, 1.0, 2.0)
    for x in (0.0, 0.05, 0.1)
    for n0 in (0.0, 0.5, 5.0)
    for n in (0.0, 5.0, 100.0)
    for ratio in (1.0, 2.0)
]


class OracleCache:
    """Session-wide memo of propagated covariances keyed by parameters."""

    def __init__(self) -> None:
        self._store: dict = {}

    def covariance(self, r, x, n0=0.0, n=0.0, ratio=1.0, engine="reduced",
                   tol=1e-10) -> dynamics.OutputCovariance:
        key = (r, x, n0, n, ratio, engine, tol)
        if key not in self._store:
            rp = reduced_from_ratios(r, x, G1_over_G2=ratio, n0=n0, n=n)
            self._store[key] = dynamics.output_covariance(
                rp, engine=engine, tol=tol)
        return self._store[key]


@pytest.fixture(scope="session")
def oracle_cache() -> OracleCache:
    return OracleCache()
