import json
import math

import numpy as np
import pytest

from oscint.assumptions import fit_lemma1, seriescon_check
from oscint.errors import InvalidParameter
from oscint.lp import (interpolation_table, l2_bound, l2_region, last_quarter_increment, pieces_csv,
                       piece_reports, table_json, tj_l1_bound, tj_l2_sup)
from oscint.multiplier import breakpoint, compute_mj
from oscint.oscquad import FrequencyPoint, OperatorSpec
from oscint.phase import ExpPhase, PowerPhase, invert_gamma2


@pytest.mark.parametrize("j", [0, 3, 9, 25])
def test_l1_closed_form_theta0(j, power31):
    rep = tj_l1_bound(power31, 0.0, j)
    assert rep.l1_measured == pytest.approx(2 ** ((j + 1) / 5) - 2 ** (j / 5), rel=1e-11)
    assert rep.l1_bound == pytest.approx(60 ** (1 / 3) * 2 ** (j / 5), rel=1e-12)
    assert rep.l1_ratio == pytest.approx((2 ** 0.2 - 1) / 60 ** (1 / 3), rel=1e-10)


def test_l1_theta_to_one_limit(power31):
    for j in (0, 7):
        assert tj_l1_bound(power31, 0.9999, j).l1_measured == pytest.approx(math.log(2) / 5, rel=1e-3)


def test_first_cell():
    p = ExpPhase(3.0, 1.0)
    rep = tj_l1_bound(p, 0.3, 0)
    assert rep.cell == (pytest.approx(invert_gamma2(p, 2 * p.gamma2_at_1), rel=1e-14), 1.0)


def test_l1_ratio_stable_under_extension():
    p = ExpPhase(3.0, 1.0)
    r = [tj_l1_bound(p, 0.5, j).l1_ratio for j in range(15)]
    assert max(r[:11]) == pytest.approx(max(r), rel=0.25)


def test_mj_at_origin_below_mass(power31):
    for j in (0, 2, 5):
        rep = tj_l1_bound(power31, 0.5, j)
        assert abs(compute_mj(power31, OperatorSpec(2, 0.5), j, FrequencyPoint(), 1e-10).value) \
            <= rep.l1_measured


def test_l2_region(power31):
    xi_max, eta_max = l2_region(power31, 2, 3)
    t = breakpoint(power31, 4)
    assert xi_max == pytest.approx(4 * 3 * t ** -4)
    assert eta_max == pytest.approx(4 * 12 * t ** -5 / 2)


def test_l2_sup_bounded_by_mass(power31):
    rep = tj_l2_sup(power31, 0.5, 2, n_grid=6, polish=2)
    assert 0 < rep.l2_measured <= tj_l1_bound(power31, 0.5, 2).l1_measured
    assert rep.l2_failures == 0 and not rep.flagged


def test_l2_line_case_collapses_eta(power31):
    rep = tj_l2_sup(power31, 0.5, 2, k=1, n_grid=6, polish=2)
    assert rep.l2_argmax[1] == 0.0


def test_piece_reports_csv(power31):
    reps = piece_reports(power31, 0.5, [0, 1], tol=1e-8)
    lines = pieces_csv(reps).splitlines()
    assert lines[0] == "j,l1_measured,l1_bound,l2_measured,l2_bound"
    assert len(lines) == 3
    assert all(math.isfinite(r.l2_ratio) for r in reps)


def test_interpolation_exponents_and_verdicts(power31):
    table = interpolation_table(power31, 0.5, [0.0, 0.25, 0.5, 0.75], J=400)
    for s in table:
        assert abs(s.one_over_p - (1 + s.tau) / 2) == 0.0
        assert s.p == pytest.approx(2 / (1 + s.tau))
    t0, t25, t50, t75 = table
    assert t25.p == pytest.approx(1.6) and t25.cauchy and t25.expected_convergent
    assert t0.cauchy and t0.p == 2.0
    assert not t50.cauchy and not t50.expected_convergent
    assert not t75.cauchy
    # tau = 0: the terms are the l2 bounds
    for j in (0, 5, 40):
        assert t0.terms[j] == pytest.approx(l2_bound(power31, 0.5, j), rel=1e-12)
    d = json.loads(table_json(table))
    assert [x["tau"] for x in d] == [0.0, 0.25, 0.5, 0.75]


def test_series_comparison_with_lemma_delta():
    for p in (PowerPhase(3.0, 1.0), ExpPhase(3.0, 1.0)):
        theta, tau = 0.5, 0.25
        fit = fit_lemma1(p)
        ok, c, _ = seriescon_check(p, fit.delta, fit.C)
        assert ok
        J = 200
        s = interpolation_table(p, theta, [tau], J)[0]
        e = theta - tau
        j = np.arange(J + 1)
        bound = c ** -e * (p.gamma2_at_1 * 2.0 ** j) ** (-fit.delta * e / 3)
        assert np.all(s.terms <= bound * (1 + 1e-9))
        assert s.partial_sums[-1] <= np.sum(bound) * (1 + 1e-9)


def test_last_quarter_increment():
    assert last_quarter_increment(np.arange(1, 9.0)) == pytest.approx((8 - 6) / 8)


def test_lp_validation(power31):
    with pytest.raises(InvalidParameter):
        tj_l1_bound(power31, 1.0, 0)
    with pytest.raises(InvalidParameter):
        interpolation_table(power31, 0.5, [1.5])
    with pytest.raises(InvalidParameter):
        interpolation_table(power31, 0.5, [0.1], J=2)
