import os.path
import sys
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime
from fractions import Fraction
from pathlib import Path
from unittest import mock

import numpy as np
import pytest

from steinbias.exceptions import DegenerateException, RejectionLimitException
from steinbias.utils import (
    AliasTable,
    atom_key,
    concat_batches,
    confirm_dc_type,
    distinct_tuples,
    encoder_factory,
    falling_factorial,
    import_class,
    random_distinct_tuples,
    rejection_sample,
    substream,
    tally,
)
from tests.conftest import test_pair


@dataclass
class FakeCheck:
    name: str = "gap"
    passed: bool = True


@dataclass
class FakeBatch:
    y: np.ndarray
    label: str = "block"


test_args_encoder_factory = [
    test_pair(input=date(2024, 6, 1), expected="2024-06-01"),
    test_pair(input=datetime(2024, 6, 1, 12, 0, 1), expected="2024-06-01 12:00:01"),
    test_pair(input=Fraction(1, 4), expected=0.25),
    test_pair(input=Path("/tmp/steinbias-output/reports.json"), expected="/tmp/steinbias-output/reports.json"),
    test_pair(input=FakeCheck(), expected={"name": "gap", "passed": True}),
    test_pair(input=np.array([1, 2]), expected=[1, 2]),
    test_pair(input=np.float64(0.5), expected=0.5),
    test_pair(input=np.bool_(True), expected=True),
    test_pair(input={"seed": 7}, expected={"seed": 7}),
]


@pytest.mark.parametrize("test", test_args_encoder_factory)
def test_encoder_factory(test: test_pair):
    encoder = encoder_factory(raise_error=False)
    assert encoder(test.input) == test.expected


test_mutation_args_encoder_factory = [
    test_pair(input=date(2024, 6, 1), expected="2024/06/01"),
    test_pair(input=datetime(2024, 6, 1, 12, 0, 1), expected="20240601 120001"),
    test_pair(input=Fraction(7, 2), expected="7/2"),
    test_pair(input=Path("/tmp/steinbias-output/spool/window.f8"), expected="window.f8"),
    test_pair(input={"spool": None}, expected={"spool": None}),
]


@pytest.mark.parametrize("test", test_mutation_args_encoder_factory)
def test_encoder_factory_mutation(test: test_pair):
    encoder = encoder_factory(
        date_fmt="%Y/%m/%d",
        dt_fmt="%Y%m%d %H%M%S",
        fraction_factory=str,
        path_factory=lambda x: os.path.basename(x),
        raise_error=False,
    )
    assert encoder(test.input) == test.expected


def test_encoder_factory_exception():
    encoder = encoder_factory()
    with pytest.raises(TypeError):
        encoder(range(3))


test_args_confirm_dc_type = [
    test_pair(input=[FakeCheck(name="oracle", passed=False), FakeCheck], expected=FakeCheck("oracle", False)),
    test_pair(input=[dict(name="oracle", passed=False), FakeCheck], expected=FakeCheck("oracle", False)),
    test_pair(input=[dict(name="linearity", threshold=4.0), FakeCheck], expected=FakeCheck("linearity")),
    test_pair(input=[None, FakeCheck], expected=None),
    test_pair(input=[["gap"], FakeCheck], expected=["gap"]),
]


@pytest.mark.parametrize("test", test_args_confirm_dc_type)
def test_confirm_dc_type(test: test_pair):
    assert test.expected == confirm_dc_type(*test.input)


def test_import_class():
    assert import_class("") is None
    assert import_class("steinbias.contrib.construction.local") is None
    assert import_class("steinbias::construction::BaseConstruction") is None
    assert import_class("steinbias.utils::NoSuchClass") is None

    with mock.patch("importlib.import_module") as fake_import:
        fake_import.return_value = sys.modules[__name__]
        assert import_class(f"my.constructions::{FakeCheck.__name__}") is FakeCheck
        fake_import.assert_called_once_with("my.constructions")


def test_substream_is_reproducible_and_split():
    a = substream(11, 0).random(5)
    np.testing.assert_array_equal(a, substream(11, 0).random(5))
    assert not np.array_equal(a, substream(11, 1).random(5))
    assert not np.array_equal(a, substream(12, 0).random(5))
    np.testing.assert_array_equal(a, np.random.default_rng(np.random.SeedSequence(11).spawn(1)[0]).random(5))


def test_alias_table_frequencies(rng):
    weights = [0.0, 1.0, 3.0, 0.0, 6.0]
    table = AliasTable(weights)
    assert table.size == 5
    np.testing.assert_array_equal(table.atoms, [1, 2, 4])
    draws = table.sample(rng, 200_000)
    assert set(np.unique(draws)) == {1, 2, 4}
    frequencies = np.bincount(draws, minlength=5) / draws.size
    np.testing.assert_allclose(frequencies, table.probabilities, atol=0.005)


test_exception_args_alias_table = [
    test_pair(input=[], expected=DegenerateException),
    test_pair(input=[0.0, 0.0], expected=DegenerateException),
    test_pair(input=[1.0, -0.5], expected=DegenerateException),
    test_pair(input=[1.0, float("nan")], expected=DegenerateException),
]


@pytest.mark.parametrize("test", test_exception_args_alias_table)
def test_alias_table_exception(test: test_pair):
    with pytest.raises(test.expected):
        AliasTable(test.input)


test_args_distinct_tuples = [
    test_pair(input=(4, 0), expected=1),
    test_pair(input=(4, 2), expected=12),
    test_pair(input=(5, 3), expected=60),
    test_pair(input=(3, 3), expected=6),
]


@pytest.mark.parametrize("test", test_args_distinct_tuples)
def test_distinct_tuples(test: test_pair):
    n, k = test.input
    table = distinct_tuples(n, k)
    assert table.shape == (test.expected, k) == (falling_factorial(n, k), k)
    assert len({tuple(row) for row in table}) == test.expected
    assert all(len(set(row)) == k for row in table)


def test_random_distinct_tuples(rng):
    table = random_distinct_tuples(rng, 6, 3, 1000)
    assert table.shape == (1000, 3)
    assert all(len(set(row)) == 3 for row in table)
    assert random_distinct_tuples(rng, 6, 0, 4).shape == (4, 0)


def test_atom_key_and_tally():
    assert atom_key(-0.0) == (0.0,)
    assert atom_key(0.1 + 0.2) == atom_key(0.3)
    assert tally([1.0, 1.0, 2.0], [0.0, 0.0, 1.0]) == Counter({(1.0, 0.0): 2, (2.0, 1.0): 1})


def test_concat_batches_keeps_block_order():
    merged = concat_batches([FakeBatch(y=np.array([1, 2])), FakeBatch(y=np.array([3]))])
    np.testing.assert_array_equal(merged.y, [1, 2, 3])
    assert merged.label == "block"


def test_rejection_sample(rng):
    # accept in proportion to x on [0, 1): density 2x
    sample = rejection_sample(rng, 20_000, lambda r, m: r.random(m), lambda x: x, envelope=1.0)
    assert sample.shape == (20_000,)
    assert sample.mean() == pytest.approx(2 / 3, abs=0.01)


def test_rejection_sample_limit(rng):
    with pytest.raises(RejectionLimitException):
        rejection_sample(rng, 10, lambda r, m: r.random(m), lambda x: np.zeros_like(x), envelope=1.0, limit=5000)
    with pytest.raises(DegenerateException):
        rejection_sample(rng, 10, lambda r, m: r.random(m), lambda x: x, envelope=0.0)
