import numpy as np
import pytest

from ciflimits.censoring import (KmCurve, ipcw_weight, km_censoring,
                                 weighted_response, weighted_response_matrix)
from ciflimits.datagen import CensoringSpec, generate_dataset
from ciflimits.dataset import Dataset, SubjectRecord
from ciflimits.errors import ConfigError, VarianceError
from ciflimits.process import IntensityModel


def _data(times, statuses, xs=None, tau=10.0):
    times = np.asarray(times, dtype=float)
    xs = np.zeros(len(times), dtype=int) if xs is None else np.asarray(xs)
    return Dataset(times, np.asarray(statuses), xs, tau=tau)


def test_km_hand_example():
    # censorings at 1 and 3, event at 2: G = 1 on (0,1], 2/3 on (1,3], 0 after
    data = _data([1.0, 2.0, 3.0], [0, 1, 0])
    curve = km_censoring(data)
    assert curve.evaluate(0.5) == 1.0
    assert curve.evaluate(1.0) == 1.0  # left limit at the first jump
    assert curve.evaluate(1.5) == pytest.approx(2.0 / 3.0)
    assert curve.evaluate(3.0) == pytest.approx(2.0 / 3.0)
    assert curve.evaluate(3.5) == 0.0


def test_km_no_censoring_is_one():
    data = _data([0.5, 1.2, 2.0], [1, 2, 1])
    curve = km_censoring(data)
    assert len(curve.times) == 0
    assert curve.evaluate(99.0) == 1.0


def test_km_ignores_administrative_censoring():
    data = _data([0.5, 10.0, 10.0], [1, 0, 0], tau=10.0)
    curve = km_censoring(data)
    assert len(curve.times) == 0


def test_km_invariant_to_duplication():
    data = _data([0.4, 0.9, 1.5, 2.2], [0, 1, 0, 2])
    doubled = _data([0.4, 0.9, 1.5, 2.2] * 2, [0, 1, 0, 2] * 2)
    c1, c2 = km_censoring(data), km_censoring(doubled)
    assert np.array_equal(c1.times, c2.times)
    assert np.allclose(c1.values, c2.values, atol=1e-15)


def test_km_invariant_to_event_type_labels():
    data = _data([0.4, 0.9, 1.5, 2.2], [0, 1, 0, 2])
    swapped = _data([0.4, 0.9, 1.5, 2.2], [0, 2, 0, 1])
    c1, c2 = km_censoring(data), km_censoring(swapped)
    assert np.array_equal(c1.times, c2.times)
    assert np.allclose(c1.values, c2.values, atol=1e-15)


def test_stratified_with_identical_strata_matches_unstratified():
    times = [0.4, 0.9, 1.5, 2.2]
    statuses = [0, 1, 0, 2]
    data = _data(times * 2, statuses * 2, xs=[0] * 4 + [1] * 4)
    curves = km_censoring(data, stratify_by_x=True)
    pooled = km_censoring(data)
    for arm in (0, 1):
        assert np.allclose(curves[arm].values, pooled.values, atol=1e-15)
        assert np.array_equal(curves[arm].times, pooled.times)


def test_ipcw_weight_trivial_one():
    curve = KmCurve(times=np.array([]), values=np.array([]))
    subj = SubjectRecord(0, 0.5, 1, 0)
    assert ipcw_weight(curve, subj, 0.9, tau=10.0) == 1.0


def test_ipcw_weight_event_subject():
    curve = KmCurve(times=np.array([0.3]), values=np.array([0.8]))
    subj = SubjectRecord(0, 0.5, 1, 0)
    assert ipcw_weight(curve, subj, 0.9, tau=10.0) == pytest.approx(1.25)
    # before the event, the weight sits at the evaluation time
    assert ipcw_weight(curve, subj, 0.2, tau=10.0) == 1.0


def test_ipcw_weight_censored_subject_zero():
    curve = KmCurve(times=np.array([0.3]), values=np.array([0.8]))
    subj = SubjectRecord(0, 0.3, 0, 0)
    assert ipcw_weight(curve, subj, 0.6, tau=10.0) == 0.0
    assert ipcw_weight(curve, subj, 0.3, tau=10.0) == 0.0  # strict indicator


def test_ipcw_weight_beyond_horizon_zero():
    curve = KmCurve(times=np.array([]), values=np.array([]))
    subj = SubjectRecord(0, 0.5, 1, 0)
    assert ipcw_weight(curve, subj, 1.2, tau=1.0) == 0.0


def test_ipcw_weight_overflow_error():
    curve = KmCurve(times=np.array([0.3]), values=np.array([0.0]))
    subj = SubjectRecord(0, 0.5, 1, 0)
    with pytest.raises(VarianceError):
        ipcw_weight(curve, subj, 0.9, tau=10.0)


def test_weighted_response_examples():
    curve = KmCurve(times=np.array([0.2]), values=np.array([0.9]))
    type1 = SubjectRecord(0, 0.4, 1, 0)
    type2 = SubjectRecord(1, 0.2, 2, 0)
    censd = SubjectRecord(2, 0.1, 0, 0)
    assert weighted_response(curve, type1, 0.6) == pytest.approx(1.0 / 0.9)
    assert weighted_response(curve, type2, 0.6) == 0.0
    assert weighted_response(curve, censd, 0.6) == 0.0
    assert weighted_response(curve, type1, 0.3) == 0.0  # event after s_r


def test_weighted_response_no_censoring_binary():
    curve = KmCurve(times=np.array([]), values=np.array([]))
    assert weighted_response(curve, SubjectRecord(0, 0.4, 1, 0), 0.6) == 1.0


def test_weighted_response_mean_unbiased():
    # with estimated G, mean weighted response tracks pooled F1(s)
    truth = IntensityModel.calibrated(0.6, 0.6, exp_hr1=0.8, exp_hr2=1.1)
    n = 10**5
    data = generate_dataset(truth, n, CensoringSpec(rate=0.55, tau=1.0), seed=2)
    curve = km_censoring(data)
    grid = np.array([0.3, 0.6, 0.9])
    nmat = weighted_response_matrix(curve, data, grid)
    for j, s in enumerate(grid):
        truth_val = 0.5 * (truth.cif(s, 0, 1) + truth.cif(s, 1, 1))
        mc_se = np.sqrt(truth_val * (1 - truth_val) / n)
        assert abs(nmat[:, j].mean() - truth_val) < 3 * mc_se


def test_weighted_response_matrix_consistent_with_scalar():
    truth = IntensityModel.calibrated(0.6, 0.6)
    data = generate_dataset(truth, 500, CensoringSpec(rate=0.5, tau=1.0), seed=3)
    curve = km_censoring(data)
    grid = np.array([0.25, 0.75])
    nmat = weighted_response_matrix(curve, data, grid)
    for i in list(range(0, 500, 83)):
        subj = data.subject(i)
        for j, s in enumerate(grid):
            assert nmat[i, j] == pytest.approx(
                weighted_response(curve, subj, s), abs=1e-14)


def test_curve_csv_roundtrip(tmp_path):
    curve = KmCurve(times=np.array([0.25, 0.5]), values=np.array([0.9, 0.6]))
    path = tmp_path / "km.csv"
    curve.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "time,value"
    assert len(rows) == 3


def test_empty_dataset_rejected():
    with pytest.raises(ConfigError):
        Dataset(np.array([]), np.array([]), np.array([]), tau=1.0)
