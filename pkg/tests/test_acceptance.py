"""Acceptance criteria 1 to 10, one line each at the configured tolerances.

Every criterion is driven by the checked-in configuration files under
``configs/``.  Criterion 10 is reported but never fails the suite.
"""
from pathlib import Path

import numpy as np
import pytest

from semiquant.cli import run_checks
from semiquant.config import load_config
from semiquant.experiments import RunContext
from semiquant.semiclassics.checks import PASS, SKIPPED

from .conftest import ACCEPTANCE_LINES

CONFIGS = Path(__file__).parent.parent / "configs"

CRITERIA = {
    1: ("Riemann-Roch dimensions", ["ac01_rrh_sphere", "ac01_rrh_metaplectic", "ac01_rrh_product"]),
    2: ("exact Kostant-Souriau spectra", ["ac02_spectrum_rotation", "ac02_spectrum_metaplectic"]),
    3: ("discrete transport converges to U(t)", ["ac03_kato"]),
    4: ("Poisson summation identity", ["ac04_poisson"]),
    5: ("Weyl term with stable O(1/p) constant", ["ac05_weyl"]),
    6: ("isolated orbit coefficient", ["ac06_orbit"]),
    7: ("a0 coefficient", ["ac07_a0_rotation", "ac07_a0_radial"]),
    8: ("kernel localization", ["ac08_localization"]),
    9: ("invariant suite", ["ac09_invariants"]),
    10: ("Bochner spectral gap (non-blocking)", ["ac10_bochner"]),
}
NON_BLOCKING = {10}


def _num(v):
    return "nan" if v is None or not np.isfinite(v) else f"{v:.6g}"


def _groups(results):
    """Results sharing a base name (before any ``[...]`` index), in first-seen order."""
    groups = {}
    for r in results:
        groups.setdefault(r.name.split("[")[0], []).append(r)
    return groups.values()


def _describe(group):
    r = group[0]
    if len(group) == 1:
        return (f"{r.name} {r.verdict} ({_num(r.measured)} vs {_num(r.predicted)}, "
                f"tol {_num(r.tolerance)})")
    passed = sum(x.verdict in (PASS, SKIPPED) for x in group)
    meas = [x.measured for x in group]
    tols = "/".join(_num(t) for t in dict.fromkeys(x.tolerance for x in group))
    return (f"{r.name.split('[')[0]} {passed}/{len(group)} pass "
            f"(measured {_num(min(meas))} to {_num(max(meas))}, tol {tols})")


def evaluate(n):
    results = []
    for name in CRITERIA[n][1]:
        ctx = RunContext.from_config(load_config(CONFIGS / f"{name}.conf"))
        results.extend((name, r) for r in run_checks(ctx))
    ok = bool(results) and all(r.verdict in (PASS, SKIPPED) for _, r in results)
    parts = [_describe(group) for group in _groups([r for _, r in results])]
    line = f"AC {n:2d}: {'PASS' if ok else 'FAIL'}  {CRITERIA[n][0]}: " + "; ".join(parts)
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok, results


@pytest.mark.slow
@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_acceptance(n):
    ok, results = evaluate(n)
    if n in NON_BLOCKING:
        return
    failed = [f"{cfg}: {r.name} {r.verdict} {r.details}" for cfg, r in results
              if r.verdict not in (PASS, SKIPPED)]
    assert ok, "\n".join(failed)
