import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecasurvey.calibration import (
    NonPositiveCorrectionWarning,
    NoOverlapError,
    ProfileRow,
    RegressionDegenerateError,
    SensorMountConfig,
    UnsupportedOrientationError,
    along_path_distance,
    apply_bias_correction,
    bias_at,
    interference_profile,
    load_profile_table,
    ols,
    paired_offset,
)
from ecasurvey.geocore import GeoPoint, PlanarPoint, unproject
from ecasurvey.ingest import Survey, SurveyRecord

DATUM = GeoPoint(33.9735, -117.3195)
DISTANCES = [25.0, 30.0, 36.0, 41.0, 46.0, 51.0, 56.0, 61.0]


def _survey(values, xs=None, y=0.0):
    xs = np.arange(len(values)) * 0.5 if xs is None else xs
    recs = [SurveyRecord(float(i), unproject(DATUM, PlanarPoint(float(x), y)), float(v))
            for i, (x, v) in enumerate(zip(xs, values))]
    return Survey(tuple(recs))


@pytest.fixture(scope="module")
def table():
    return load_profile_table()


def test_fixture_shape(table):
    assert len(table) == 25
    assert sum(r.theta_deg == 0 for r in table) == 19
    assert all(sorted(r.readings) == DISTANCES for r in table)


def test_first_row(table):
    r = table[0]
    assert r.config == "citrus_grove"
    assert r.control == 26.7 and r.readings[25.0] == 41.8
    assert r.readings[25.0] - r.control == pytest.approx(15.1)


def test_profile_values(table):
    prof = interference_profile(table, 0)
    assert prof.distances_cm.tolist() == DISTANCES
    expected = [13.2105, 8.5579, 5.3158, 3.1632, 2.1053, 1.3684, 0.9105, 0.5263]
    assert prof.mean_offsets == pytest.approx(expected, abs=1e-4)
    assert prof.entry(25.0).mean_offset == pytest.approx(251 / 19, abs=1e-12)
    e = prof.entry(61.0)
    assert e.slope == pytest.approx(0.9849724115546903, abs=1e-9)
    assert e.intercept == pytest.approx(0.8689448060267542, abs=1e-9)
    assert e.pearson_r == pytest.approx(0.9975686209418957, abs=1e-9)


def test_profile_90(table):
    prof = interference_profile(table, 90)
    assert all(e.n_rows == 6 for e in prof.entries)
    with pytest.raises(UnsupportedOrientationError):
        interference_profile(table, 45)


def test_identity_rows():
    rows = [ProfileRow("x", 0, c, {d: c for d in DISTANCES}) for c in (10.0, 20.0, 35.0)]
    prof = interference_profile(rows)
    assert prof.mean_offsets.tolist() == [0.0] * 8
    assert [e.slope for e in prof.entries] == pytest.approx([1.0] * 8)


def test_single_row_degenerate():
    rows = [ProfileRow("x", 0, 10.0, {25.0: 14.0})]
    prof = interference_profile(rows)
    assert prof.entries[0].mean_offset == 4.0 and prof.entries[0].slope is None
    with pytest.raises(RegressionDegenerateError, match="4"):
        interference_profile(rows, strict=True)


def test_bias_at(table):
    prof = interference_profile(table, 0)
    assert bias_at(prof, SensorMountConfig.handheld()) == 0.0
    assert bias_at(prof, SensorMountConfig.rosbot()) == pytest.approx(251 / 19)
    for d, off in zip(DISTANCES, prof.mean_offsets):
        assert bias_at(prof, SensorMountConfig(d_h_mm=d * 10)) == off
    assert bias_at(prof, SensorMountConfig(d_h_mm=2000)) == prof.mean_offsets[-1]
    with pytest.raises(UnsupportedOrientationError):
        bias_at(prof, SensorMountConfig(d_h_mm=300, theta_deg=90))


@given(st.floats(200, 700), st.floats(200, 700))
def test_bias_monotone(d1, d2):
    prof = interference_profile(load_profile_table(), 0)
    lo, hi = sorted([d1, d2])
    assert bias_at(prof, SensorMountConfig(d_h_mm=lo)) >= bias_at(prof, SensorMountConfig(d_h_mm=hi))


def test_mount_validation():
    with pytest.raises(ValueError):
        SensorMountConfig(d_h_mm=-1)
    with pytest.raises(ValueError):
        SensorMountConfig(d_h_mm=100, theta_deg=45)
    m = SensorMountConfig.handheld()
    assert SensorMountConfig.from_dict(m.to_dict()) == m


def test_ols_known():
    s, i, r = ols([1, 2, 3], [3, 5, 7])
    assert (s, i, r) == pytest.approx((2.0, 1.0, 1.0))
    with pytest.raises(RegressionDegenerateError):
        ols([1, 1], [2, 3])


def test_along_path():
    assert along_path_distance([[0, 0], [3, 4], [3, 5]]).tolist() == [0.0, 5.0, 6.0]


def test_paired_identical():
    a = _survey(10 + np.sin(np.arange(60) / 5.0))
    rep = paired_offset(a, a)
    assert rep.offset == 0.0
    assert rep.slope == pytest.approx(1.0) and rep.pearson_r == pytest.approx(1.0)
    assert rep.n_pairs == 30


def test_paired_shift():
    v = 10 + np.sin(np.arange(60) / 5.0)
    rep = paired_offset(_survey(v), _survey(v + 10.0))
    assert rep.offset == pytest.approx(10.0, abs=1e-12)
    assert rep.slope == pytest.approx(1.0) and rep.pearson_r == pytest.approx(1.0)


def test_paired_different_speeds():
    # the slower pass samples the same path at twice the density
    xs_fast = np.arange(0, 30, 0.5)
    xs_slow = np.arange(0, 30, 0.25)
    f = lambda x: 15 + 3 * np.sin(x / 4.0)
    rep = paired_offset(_survey(f(xs_fast), xs_fast), _survey(f(xs_slow) + 5, xs_slow))
    assert rep.offset == pytest.approx(5.0, abs=0.05)
    assert rep.pearson_r > 0.99


def test_paired_no_overlap():
    a = _survey([10.0])
    with pytest.raises(NoOverlapError):
        paired_offset(a, _survey([10.0, 11.0, 12.0]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1.0, 100.0), min_size=6, max_size=40), st.floats(-20, 20),
       st.floats(0.1, 5.0))
def test_paired_shift_equivariance(vals, c, scale):
    a = _survey(vals)
    b = _survey([v * 1.1 + 25.0 for v in vals])
    try:
        base = paired_offset(a, b)
    except RegressionDegenerateError:
        return
    shifted = paired_offset(a, _survey([v * 1.1 + 25.0 + c for v in vals]))
    assert shifted.offset == pytest.approx(base.offset + c, abs=1e-9)
    assert shifted.slope == pytest.approx(base.slope, rel=1e-9)
    scaled = paired_offset(_survey([v * scale + 1 for v in vals]), b)
    assert scaled.pearson_r == pytest.approx(base.pearson_r, abs=1e-9)
    assert abs(base.pearson_r) <= 1.0


def test_apply_correction():
    s = _survey([40.0, 50.0])
    out = apply_bias_correction(s, 34.5)
    assert out.values == [5.5, 15.5]
    assert out.metadata["bias_correction_msm"] == "34.5"
    assert apply_bias_correction(s, 0.0).values == s.values


def test_apply_correction_shifts_mean():
    s = _survey([50.0, 57.0])
    out = apply_bias_correction(s, 34.5)
    assert np.mean(s.values) == 53.5
    assert np.mean(out.values) == pytest.approx(19.0)


def test_apply_correction_warns():
    s = _survey([10.0, 40.0])
    with pytest.warns(NonPositiveCorrectionWarning):
        out = apply_bias_correction(s, 20.0)
    assert out.values == [0.0, 20.0]
    assert out.metadata["bias_correction_nonpositive"] == "0"
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        apply_bias_correction(s, 1.0)
    assert not math.isnan(out.values[0])
