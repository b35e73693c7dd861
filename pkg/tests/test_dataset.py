import numpy as np
import pytest
from numpy.testing import assert_allclose

from lfsurv import (ParseError, SurvivalDataset, SurvivalRecord, ValidationError, counting_view,
                    kaplan_meier, load_csv, nelson_aalen)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_readback(tmp_path):
    ds = load_csv(write(tmp_path, "time,status\n1.0,1\n2.0,0\n3.0,1\n"))
    assert ds.n == 3
    assert ds.horizon == 3.0
    assert_allclose(ds.x, [1, 2, 3])
    assert_allclose(ds.delta, [1, 0, 1])
    assert ds.q == 0


def test_load_csv_negative_time(tmp_path):
    with pytest.raises(ValidationError):
        load_csv(write(tmp_path, "time,status\n-1.0,1\n"))


def test_load_csv_tie_order(tmp_path):
    ds = load_csv(write(tmp_path, "time,status\n2.0,0\n2.0,1\n"))
    assert_allclose(ds.delta, [1, 0])
    assert list(ds.ids) == [1, 0]


def test_load_csv_covariates_and_errors(tmp_path):
    ds = load_csv(write(tmp_path, "time,status,z2,z1\n1,1,5,0\n2,0,6,1\n"))
    assert ds.q == 2
    assert_allclose(ds.z, [[0, 5], [1, 6]])
    with pytest.raises(ParseError) as exc:
        load_csv(write(tmp_path, "time,status\n1,1\n2,x\n"))
    assert exc.value.line == 3
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "time,stat\n1,1\n"))
    with pytest.raises(ValidationError):
        load_csv(write(tmp_path, "time,status\n1,2\n"))
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "time,status\n1,1,3\n"))


def test_validation():
    with pytest.raises(ValidationError):
        SurvivalDataset([], [])
    with pytest.raises(ValidationError):
        SurvivalDataset([1.0, 2.0], [1])
    with pytest.raises(ValidationError):
        SurvivalDataset([np.nan], [1])
    with pytest.raises(ValidationError):
        SurvivalDataset([1.0], [1], horizon=0.0)


def test_dataset_is_immutable(toy_censored):
    with pytest.raises(ValueError):
        toy_censored.x[0] = 5.0


def test_horizon_truncation():
    ds = SurvivalDataset([1.0, 2.0, 5.0], [1, 1, 1], horizon=3.0)
    assert_allclose(ds.x, [1, 2, 3])
    assert_allclose(ds.delta, [1, 1, 0])


def test_records_roundtrip(toy_censored):
    recs = toy_censored.records
    assert recs[1] == SurvivalRecord(2.0, 0, ())
    back = SurvivalDataset.from_records(recs)
    assert_allclose(back.x, toy_censored.x)


def test_counting_view_examples():
    cv = counting_view(SurvivalDataset([1, 2, 3], [1, 0, 1]))
    assert_allclose(cv.at_risk([1, 2, 3]), [3, 2, 1])
    assert_allclose(cv.event_times, [1, 3])
    cv = counting_view(SurvivalDataset([5.0], [0]))
    assert cv.event_times.size == 0
    assert cv.at_risk(5.0) == 1
    cv = counting_view(SurvivalDataset([1.0, 1.0], [1, 1]))
    assert_allclose(cv.dN, [2])
    assert_allclose(cv.at_risk_events, [2])


def test_nelson_aalen(oracle, toy_censored):
    na = nelson_aalen(toy_censored)
    assert_allclose(na([1, 3]), oracle["counting_hand"]["nelson_aalen"], rtol=1e-15)
    assert_allclose(nelson_aalen(SurvivalDataset([1, 2], [0, 0]))([0.5, 1, 5]), 0)
    assert_allclose(nelson_aalen(SurvivalDataset([1.0], [1]))(1.0), 1.0)


def test_kaplan_meier(oracle, toy_censored):
    km = kaplan_meier(toy_censored)
    assert_allclose(km([1, 2, 3]), oracle["counting_hand"]["kaplan_meier"], rtol=1e-15)
    G = kaplan_meier(SurvivalDataset([1, 2, 3], [1, 1, 1]), "censoring")
    assert_allclose(G.left(np.linspace(0, 3, 7)), 1.0)
    G = kaplan_meier(SurvivalDataset([1, 2], [1, 0]), "censoring")
    assert_allclose(G.jump_times, [2])
    assert_allclose(G.left([0.5, 1, 2]), 1.0)
    with pytest.raises(ValidationError):
        kaplan_meier(toy_censored, "other")


def test_censoring_km_tie_rule():
    # event and censoring at t=2: the event leaves the risk set first
    G = kaplan_meier(SurvivalDataset([1, 2, 2, 3], [1, 1, 0, 1]), "censoring")
    assert_allclose(G(2.0), 1 - 1 / 2)


def test_subset_and_without(toy_censored):
    sub = toy_censored.without(0)
    assert sub.n == 2
    assert_allclose(sub.x, [2, 3])
    assert sub.horizon == toy_censored.horizon
