import json
import math

import numpy as np
import pytest

from oscint.errors import DomainError, InvalidParameter
from oscint.phase import PowerPhase
from oscint.sharpness import default_t_list, sharpness_growth, sharpness_points

T_LIST = [2.0 ** -n for n in range(1, 7)]

# full-line cubic model: |int exp(2 pi i g''' s^3 / 6) ds| = AIRY |g'''|^(-1/3)
AIRY = 2 * math.gamma(1 / 3) * math.cos(math.pi / 6) / 3 * (math.pi / 3) ** (-1 / 3)


@pytest.fixture(scope="module")
def growth25():
    return sharpness_growth(PowerPhase(2.5, 1.0), T_LIST, tol=1e-6)


def test_first_point_closed_form():
    pt = sharpness_points(PowerPhase(2.5, 1.0), [0.5])[0]
    assert pt.eta_n == pytest.approx(4.375 * 2 ** 4.5, rel=1e-14)
    assert pt.xi_n == pytest.approx(-11.25 * 2 ** 3.5, rel=1e-14)


def test_stationarity_exact():
    pts = sharpness_points(PowerPhase(2.5, 1.0), [2.0 ** -n for n in range(1, 20)])
    assert max(pt.stationarity for pt in pts) < 1e-9


def test_prediction_exponent():
    pts = sharpness_points(PowerPhase(2.5, 1.0), T_LIST)
    slope = np.polyfit(np.log(T_LIST), np.log([pt.predicted for pt in pts]), 1)[0]
    assert slope == pytest.approx(-1 / 6, abs=1e-12)


def test_growth(growth25):
    m = growth25.measured
    assert all(pt.converged for pt in growth25.points)
    assert np.all(np.diff(m[1:]) > 0)
    assert growth25.slope_vs_t == pytest.approx(-1 / 6, rel=0.2)
    assert 0.8 <= growth25.slope_vs_predicted <= 1.2


def test_ratio_approaches_airy_constant(growth25):
    r = growth25.ratios
    assert max(r[-4:]) / min(r[-4:]) < 3
    assert r[-1] == pytest.approx(AIRY, rel=0.02)


def test_control_pair_bounded():
    with pytest.warns(UserWarning):
        rep = sharpness_growth(PowerPhase(3.0, 1.0), T_LIST, tol=1e-6)
    m = rep.measured
    assert m.max() / m.min() < 1.1
    # the prediction is flat, so there is no slope against it
    assert math.isnan(rep.slope_vs_predicted)


def test_report_artifacts(growth25):
    assert growth25.csv_text().splitlines()[0] == "predicted,measured"
    d = json.loads(growth25.to_json())
    assert len(d["points"]) == 6 and d["excluded"] == []


def test_default_t_list():
    p = PowerPhase(2.5, 1.0)
    ts = default_t_list(p)
    assert len(ts) == 6
    assert float(p.log_gamma2(ts[0])) - p.log_gamma2_at_1 >= math.log(32)


def test_bad_t_lists():
    p = PowerPhase(2.5, 1.0)
    with pytest.raises(DomainError):
        sharpness_points(p, [1.0, 0.5], check=False)
    with pytest.raises(InvalidParameter):
        sharpness_points(p, [0.25, 0.5], check=False)
