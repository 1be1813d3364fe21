from fractions import Fraction as F

import numpy as np
import pytest

from prioqn.errors import ShapeError, Unstable
from prioqn.model import NetworkSpec, solve_traffic
from prioqn.specfile import load_spec
from prioqn.srbm import (VariabilityParams, comparison_table, exact_metrics, srbm_metrics,
                         srbm_terms, srbm_workload)

from conftest import station

# published exact values: lambda1..3, rho, EQ, ET1, ET2, ET3 (ET3 column is ET1 + ET3)
PUBLISHED_EXACT = [
    (0.20, 0.20, 0.060, 0.780, 2.0682, 1.2500, 6.2500, 14.8864),
    (0.20, 0.20, 0.085, 0.855, 3.0086, 1.2500, 6.2500, 21.9397),
    (0.20, 0.20, 0.115, 0.945, 7.5227, 1.2500, 6.2500, 55.7955),
    (0.10, 0.15, 0.115, 0.745, 1.9641, 1.1111, 4.4444, 12.8758),
    (0.10, 0.15, 0.150, 0.850, 3.6111, 1.2500, 4.4444, 21.1111),
    (0.10, 0.15, 0.185, 0.955, 12.9445, 1.2500, 4.4444, 67.7778),
    (0.45, 0.22, 0.020, 0.950, 6.0182, 1.8182, 20.0000, 61.8182),
    (0.45, 0.22, 0.030, 0.980, 9.3182, 1.8182, 20.0000, 151.8181),
]
TYPO_ROWS = {4, 5}  # published ET1 = 1.25 where lambda1 = 0.10 gives 1.1111


def table2(lams):
    m = [1, 2, 3]
    return station(1, [l * mi for l, mi in zip(lams, m)], mu=[1 / mi for mi in m], p=[0.1, 0.2, 0.3])


def desk_srbm(lams, m=(1, 2, 3), p=(F(1, 10), F(2, 10), F(3, 10))):
    """Exact rational evaluation of the heavy-traffic formulas, class by class."""
    lams = [F(str(l)) for l in lams]
    m = [F(x) for x in m]
    alpha = [l * (1 - pk) for l, pk in zip(lams, p)]
    a = [1 / x**2 for x in alpha]
    b = [x**2 for x in m]
    out = []
    for k in range(3):
        theta = (1 - p[k]) * (sum(lams[i] * m[i] for i in range(k + 1)) - 1)
        inner = sum(lams[i] * b[i] + m[i]**2 * (alpha[i]**3 * a[i] + lams[i] * p[i] * (1 - p[i])) / (1 - p[i])**2
                    for i in range(k + 1))
        sigma2 = (1 - p[k])**2 * inner
        ew = sigma2 / (2 * -theta)
        et = (ew + m[k]) / (1 - sum(lams[i] * m[i] for i in range(k)))
        out.append((theta, sigma2, ew, et))
    return out


def test_desk_oracle_row1_class2_pinned():
    theta, sigma2, ew, et = desk_srbm((0.2, 0.2, 0.06))[1]
    assert theta == F(-8, 25)
    assert sigma2 == F(352, 225)
    assert ew == F(22, 9)
    assert et == F(50, 9)


@pytest.mark.parametrize("row", range(8))
def test_srbm_matches_desk_oracle(row):
    lams = PUBLISHED_EXACT[row][:3]
    spec = table2(lams)
    tr = solve_traffic(spec)
    var = VariabilityParams.exponential(spec)
    got = srbm_metrics(spec, tr, var)
    for k, (theta, sigma2, ew, et) in enumerate(desk_srbm(lams)):
        t, s = srbm_terms(k, spec, tr, var)
        assert abs(t - float(theta)) <= 1e-10
        assert abs(s - float(sigma2)) <= 1e-10
        assert abs(srbm_workload(k, spec, tr, var) - float(ew)) <= 1e-10
        assert abs(got.et[k] - float(et)) <= 1e-10
        assert abs(got.eq[k] - float(lams[k]) * float(et)) <= 1e-10


@pytest.mark.parametrize("row", [r for r in range(8) if r not in TYPO_ROWS])
def test_exact_matches_table(row):
    l1, l2, l3, rho, eq, et1, et2, et3 = PUBLISHED_EXACT[row]
    ex = exact_metrics(table2((l1, l2, l3)))
    assert ex.rho == pytest.approx(rho, abs=1e-4)
    assert ex.eq_total == pytest.approx(eq, abs=1e-4)
    compat = ex.aggregates(table_compat=True)
    assert compat[0] == pytest.approx(et1, abs=1e-4)
    assert compat[1] == pytest.approx(et2, abs=1e-4)
    assert compat[2] == pytest.approx(et3, abs=1e-4)


@pytest.mark.parametrize("row", sorted(TYPO_ROWS))
def test_typo_rows_recompute(row):
    ex = exact_metrics(table2(PUBLISHED_EXACT[row][:3]))
    assert ex.et[0] == pytest.approx(1 / 0.9, abs=1e-12)
    assert ex.eq_total == pytest.approx(PUBLISHED_EXACT[row][4], abs=1e-4)


def test_exact_row1_details():
    ex = exact_metrics(table2((0.2, 0.2, 0.06)))
    assert ex.et[2] == pytest.approx(13.6364, abs=5e-5)
    assert ex.eq_total == pytest.approx(float(np.dot([0.2, 0.2, 0.06], ex.et)), abs=1e-12)
    assert ex.et_cumulative()[2] == pytest.approx(ex.et.sum(), abs=1e-12)


@pytest.mark.parametrize("row", range(8))
def test_top_rank_is_exact(row):
    spec = table2(PUBLISHED_EXACT[row][:3])
    assert abs(srbm_metrics(spec).et[0] - exact_metrics(spec).et[0]) <= 1e-12


def test_top_rank_without_feedback():
    spec = station(1, [0.3], mu=[2.0])
    tr = solve_traffic(spec)
    ew = srbm_workload(0, spec, tr, VariabilityParams.exponential(spec))
    assert ew == pytest.approx(0.6 * 0.25 / 0.7, abs=1e-15)


def test_single_class_mm1():
    ex = exact_metrics(station(1, [0.5], mu=[4.0]))
    assert ex.eq[0] == pytest.approx(1.0)
    assert ex.et[0] == pytest.approx(0.5)


def test_shape_and_stability_errors():
    with pytest.raises(ShapeError):
        exact_metrics(station(2, [0.2, 0.2]))
    with pytest.raises(ShapeError):
        exact_metrics(NetworkSpec(2, 1, [1, 1], [0.1, 0.1], [1, 1], [[0.0, 0.5], [0.0, 0.0]]))
    with pytest.raises(Unstable):
        exact_metrics(station(1, [0.5, 0.5]))
    with pytest.raises(Unstable):
        srbm_metrics(station(1, [0.6, 0.5]))


def test_comparison_table_layout():
    spec, var = load_spec("table2_row1")
    tab = comparison_table(spec, var, table_compat=True)
    text = tab.render("text")
    assert "2.0682" in text and "14.8864" in text
    labels = [r[0] for r in tab.cells()]
    assert labels == ["EXACT", "SRBM", "ERROR", "RATIO%"]
    assert tab.cells()[2][6] == "0.0000"


def test_identical_inputs_zero_error():
    # a single M/M/1 class: the heavy-traffic form is exact, so every error cell is zero
    tab = comparison_table(station(1, [0.5]))
    err = dict(zip(tab.headers, tab.cells()[2]))
    assert err["EQ_total"] == "0.0000"
    assert err["ET_hat1"] == "0.0000"


def test_et2_constant_rows_1_to_3():
    vals = [exact_metrics(table2(r[:3])).aggregates()[1] for r in PUBLISHED_EXACT[:3]]
    assert vals == pytest.approx([6.25] * 3, abs=1e-12)
