import json

import numpy as np
import pytest
from sklearn.base import clone

from flowbench.detect import FAMILIES, make_detector
from flowbench.detect.serialize import load_model, model_from_dict, model_to_dict, save_model
from flowbench.exceptions import DimensionMismatch

SMALL = {"AE": {"epochs": 30}}


def build(family, **kw):
    return make_detector(family, random_state=4, **{**SMALL.get(family, {}), **kw})


@pytest.fixture
def train(rng):
    return rng.normal(size=(120, 4))


@pytest.mark.parametrize("family", FAMILIES)
def test_planted_outlier_below_fifth_percentile(family, train):
    m = build(family).fit(train)
    inside = m.score_samples(train)
    far = m.score_samples(np.full((1, 4), 12.0))[0]
    assert far < np.percentile(inside, 5)


@pytest.mark.parametrize("family", FAMILIES)
def test_bit_identical_refit(family, train):
    a = build(family).fit(train).score_samples(train)
    b = build(family).fit(train).score_samples(train)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("family", FAMILIES)
def test_serialized_model_scores_identically(family, train, tmp_path):
    m = build(family).fit(train)
    path = tmp_path / "m.json"
    save_model(m, path)
    back, std = load_model(path)
    assert std is None and back.hyper_ == m.hyper_
    np.testing.assert_array_equal(back.score_samples(train), m.score_samples(train))
    doc = json.loads(path.read_text())
    assert doc["schema"] == 1 and doc["family"] == family


@pytest.mark.parametrize("family", FAMILIES)
def test_dimension_mismatch(family, train):
    m = build(family).fit(train)
    with pytest.raises(DimensionMismatch):
        m.score_samples(train[:, :3])


@pytest.mark.parametrize("family", FAMILIES)
def test_estimator_protocol(family, train):
    m = build(family)
    c = clone(m)
    assert c.get_params() == m.get_params()
    c.fit(train)
    np.testing.assert_array_equal(c.decision_function(train[:5]), c.score_samples(train[:5]))


def test_bad_schema_rejected(train):
    from flowbench.exceptions import FlowbenchError
    doc = model_to_dict(build("KDE").fit(train))
    doc["schema"] = 99
    with pytest.raises(FlowbenchError):
        model_from_dict(doc)


def test_unknown_family():
    with pytest.raises(ValueError):
        make_detector("LOF")
