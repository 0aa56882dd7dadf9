import json

import numpy as np
import pytest

from ffu import mechanism as mech
from ffu import workloads as wl
from ffu.errors import DimensionMismatch, NegativeCount, ParseError
from ffu.privacy import Covariance


@pytest.fixture
def toy():
    w = wl.gen_identity_sum(2)
    dec = wl.decompose(w, "identity")
    return dec, Covariance([[1.0, -0.3], [-0.3, 0.5]]), np.array([10.0, 4.0])


def test_same_seed_same_release(toy):
    dec, cov, x = toy
    a, b = mech.release(dec, cov, x, 7), mech.release(dec, cov, x, 7)
    np.testing.assert_array_equal(a.answers, b.answers)
    assert not np.array_equal(a.answers, mech.release(dec, cov, x, 8).answers)


def test_expected_variances(toy):
    dec, cov, _ = toy
    np.testing.assert_allclose(mech.expected_variances(dec, cov), [1.0, 0.5, 0.9])


def test_answers_consistent_with_representation(toy):
    # the total is released as the sum of the two noisy cells
    dec, cov, x = toy
    r = mech.release(dec, cov, x, 3)
    assert r.answers[2] == pytest.approx(r.answers[0] + r.answers[1])


def test_release_many_statistics(toy):
    dec, cov, x = toy
    draws = mech.release_many(dec, cov, x, seed=1, n=20_000)
    se = np.sqrt(np.diag(dec.representation @ cov.sigma @ dec.representation.T) / 20_000)
    assert np.all(np.abs(draws.mean(axis=0) - dec.W @ x) < 4 * se)
    np.testing.assert_allclose(np.cov(draws.T), dec.representation @ cov.sigma @ dec.representation.T, atol=0.03)


def test_dimension_checks(toy):
    dec, cov, x = toy
    with pytest.raises(DimensionMismatch):
        mech.release(dec, cov, np.ones(3), 0)
    with pytest.raises(DimensionMismatch):
        mech.release(dec, Covariance(np.eye(3)), x, 0)


def test_serialization(toy):
    dec, cov, x = toy
    r = mech.release(dec, cov, x, 2, labels=["a", "b", "a+b"])
    data = json.loads(r.to_json())
    assert data["seed"] == 2 and len(data["answers"]) == 3
    lines = r.to_csv().splitlines()
    assert lines[0] == "label,answer,variance"
    assert lines[3].startswith("a+b,")
    assert float(lines[1].split(",")[1]) == r.answers[0]


class TestIngest:
    def test_one_column(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("3\n0\n2.5\n")
        np.testing.assert_array_equal(mech.ingest_histogram(p), [3, 0, 2.5])

    def test_sparse_pairs(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("0,5\n2,3\n")
        np.testing.assert_array_equal(mech.ingest_histogram(p, d=4), [5, 0, 3, 0])
        np.testing.assert_array_equal(mech.ingest_histogram(p), [5, 0, 3])

    @pytest.mark.parametrize("text,err", [
        ("1\n-2\n", NegativeCount),
        ("0,1\n0,2\n", ParseError),
        ("0,1\n9,2\n", ParseError),
        ("a\n", ParseError),
        ("1,2,3\n", ParseError),
        ("", ParseError),
        ("nan\n", ParseError),
    ])
    def test_bad_inputs(self, tmp_path, text, err):
        p = tmp_path / "x.csv"
        p.write_text(text)
        with pytest.raises(err):
            mech.ingest_histogram(p, d=3 if "9" in text else None)

    def test_length_mismatch(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("1\n2\n")
        with pytest.raises(DimensionMismatch):
            mech.ingest_histogram(p, d=3)
