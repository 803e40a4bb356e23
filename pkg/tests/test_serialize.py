import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpgame.core import CollusionChannel, ContinuousPrior, FiniteSpectrumPrior, interleaving_channel
from fpgame.errors import InvalidPriorError
from fpgame.games import capacity_bounds
from fpgame.serialize import (
    channel_from_dict,
    channel_to_dict,
    csv_text,
    dumps,
    format_float,
    loads,
    prior_from_dict,
    prior_to_dict,
    to_plain,
)

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(finite)
def test_float_round_trip(x):
    assert float(format_float(x)) == x


def test_special_floats():
    assert format_float(math.nan) == "NaN"
    assert format_float(-math.inf) == "-Infinity"


def test_seventeen_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert dumps([1 / 3], indent=0) == "[0.33333333333333331]\n"


@given(st.integers(2, 30), st.data())
def test_channel_round_trip(k, data):
    free = data.draw(st.lists(st.floats(0, 1), min_size=k - 1, max_size=k - 1))
    c = CollusionChannel(k, np.array([0.0, *free, 1.0]))
    back = channel_from_dict(loads(dumps(channel_to_dict(c))))
    assert back.k == k
    np.testing.assert_array_equal(back.p, c.p)


def test_channel_field_order():
    assert list(channel_to_dict(interleaving_channel(3))) == ["k", "p"]


def test_finite_prior_round_trip():
    prior = FiniteSpectrumPrior.symmetric([0.1234567890123, 0.5], [0.6, 0.4])
    d = loads(dumps(prior_to_dict(prior)))
    assert list(d) == ["support", "masses"]
    back = prior_from_dict(d)
    np.testing.assert_array_equal(back.support, prior.support)
    np.testing.assert_array_equal(back.masses, prior.masses)


@pytest.mark.parametrize("prior", [ContinuousPrior.arcsine(), ContinuousPrior.beta(1 / 3)])
def test_continuous_prior_round_trip(prior):
    d = prior_to_dict(prior)
    assert list(d) == ["kind", "theta"]
    back = prior_from_dict(loads(dumps(d)))
    assert back.kind == prior.kind and back.theta == prior.theta


def test_custom_prior_not_rebuilt():
    prior = ContinuousPrior.custom(lambda w: np.ones_like(w))
    d = prior_to_dict(prior)
    assert d["kind"] == "custom"
    with pytest.raises(InvalidPriorError):
        prior_from_dict(d)


def test_deterministic_and_valid_json():
    obj = {"b": [1.0, 2.5], "a": {"x": True, "y": None}, "bounds": capacity_bounds(10, "joint")}
    text = dumps(obj)
    assert text == dumps(obj)
    parsed = json.loads(text)
    assert list(parsed) == ["b", "a", "bounds"]
    assert parsed["bounds"]["lower_arcsine"] == capacity_bounds(10, "joint").lower_arcsine


def test_to_plain_numpy():
    plain = to_plain({"v": np.float64(0.5), "a": np.arange(3), "c": interleaving_channel(2)})
    assert plain == {"v": 0.5, "a": [0, 1, 2], "c": {"k": 2, "p": [0.0, 0.5, 1.0]}}


def test_unknown_type():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_csv():
    text = csv_text(["k", "value", "ok"], [(2, 0.25, True), (3, 1 / 3, False)])
    assert text == "k,value,ok\n2,0.25,true\n3,0.33333333333333331,false\n"
