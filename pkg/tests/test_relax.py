from fractions import Fraction
from math import gcd

import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from fkripple import fkmodel as F
from fkripple import relax as R
from fkripple.optimize import SolverError, lbfgs
from fkripple.params import DEFAULT_ALPHA


def test_lbfgs_minimizes_rosenbrock():
    res = lbfgs(lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0, 0.5]), tol=1e-9)
    assert res.converged
    np.testing.assert_allclose(res.x, 1.0, atol=1e-7)


def test_lbfgs_respects_admissibility():
    # minimum at x = -1 but the feasible set is x > 0
    fun = lambda x: (float((x[0] + 1) ** 2), 2 * (x + 1))
    res = lbfgs(fun, np.array([1.0]), tol=1e-9, max_iter=60, admissible=lambda x: x[0] > 0)
    assert res.x[0] > 0
    assert not res.converged


def test_lbfgs_reports_nonconvergence_with_best_point():
    res = lbfgs(lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0]), max_iter=3)
    assert not res.converged
    assert res.fun <= rosen(np.array([-1.2, 1.0]))


def test_lbfgs_rejects_inadmissible_start():
    with pytest.raises(SolverError):
        lbfgs(lambda x: (0.0, x), np.array([1.0]), admissible=lambda x: False)


def _brute_force_approximants(q_max):
    """Nearest integers from a rational bracket of sqrt(5), so no floats are involved."""
    lo, hi = Fraction(2236067977499789, 10**15), Fraction(2236067977499790, 10**15)
    out = set()
    for q in range(1, q_max + 1):
        ps = {int(Fraction(8, 13) * (1 + r) / 2 * q + Fraction(1, 2)) for r in (lo, hi)}
        assert len(ps) == 1
        p = ps.pop()
        g = gcd(p, q)
        out.add((p // g, q // g))
    return out


def test_approximants_match_brute_force_enumeration():
    got = R.approximants(DEFAULT_ALPHA, 100)
    assert set(got) == _brute_force_approximants(100)
    strains = [abs(DEFAULT_ALPHA.value - p / q) for p, q in got]
    assert strains == sorted(strains, reverse=True)


def test_reference_approximant():
    p = round(DEFAULT_ALPHA.exact() * 2566)
    assert p == 2555
    assert abs(DEFAULT_ALPHA.value - p / 2566) <= 6e-8
    assert (2555, 2566) in R.approximants(DEFAULT_ALPHA, 2566)


def test_single_site_approximant():
    assert R.approximants(DEFAULT_ALPHA, 1) == [(1, 1)]


def test_relaxed_reference_cell(relaxed_2566, table):
    res = relaxed_2566
    assert res.converged
    assert res.residual < 1e-9
    assert R.equilibrium_residual(res.state, table) == pytest.approx(res.residual, rel=0, abs=1e-15)
    assert res.energy < res.initial_energy
    assert res.state.is_admissible()
    r = np.mod(res.state.s, 1.0)
    assert np.mean((r >= 0.35) & (r <= 0.65)) > 0.3


def test_energy_trace_is_nonincreasing(relaxed_2566):
    tr = np.array(relaxed_2566.trace)
    assert np.all(np.diff(tr) <= 1e-12 * np.abs(tr[1:]))


def test_equilibrium_residual_matches_finite_differences(table):
    st = F.SupercellState.uniform(54, 55)
    res = R.equilibrium_residual(st, table)
    h = 1e-6
    fd = []
    for j in range(55):
        sp, sm = st.s.copy(), st.s.copy()
        sp[j] += h
        sm[j] -= h
        fd.append((F.supercell_energy(F.SupercellState(54, 55, sp), table)
                   - F.supercell_energy(F.SupercellState(54, 55, sm), table)) / (2 * h))
    assert res > 0
    assert res == pytest.approx(np.max(np.abs(fd)), rel=1e-5)


def test_relaxation_is_deterministic(table):
    a = R.relax_approximant(34, 35, table)
    b = R.relax_approximant(34, 35, table)
    assert np.array_equal(a.state.s, b.state.s)


def test_ordering_check_cases(relaxed_35, table):
    a = relaxed_35.state
    assert R.ordering_check(a, a) == "equal"
    assert R.ordering_check(a, a.translated(1.0)) == "less"
    assert R.ordering_check(a.translated(1.0), a) == "greater"
    b = R.relax_approximant(34, 35, table, phase=0.5 * 34 / 35).state
    assert R.ordering_check(a, b) != "crossing"


def test_ordering_check_rejects_mismatched_cells(relaxed_35):
    with pytest.raises(R.UsageError):
        R.ordering_check(relaxed_35.state, F.SupercellState.uniform(1, 1))


def test_max_iter_returns_best_state(table):
    res = R.relax_approximant(34, 35, table, max_iter=2)
    assert not res.converged
    assert res.energy <= res.initial_energy
    assert res.state.is_admissible()


def test_minimize_rejects_bad_inputs(table):
    with pytest.raises(ValueError):
        R.minimize(F.SupercellState.uniform(34, 35), table, tol=0)
    bad = F.SupercellState(1, 2, np.array([0.0, 1.5]))
    with pytest.raises(SolverError):
        R.minimize(bad, table)
