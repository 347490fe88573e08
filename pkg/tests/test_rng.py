import numpy as np

from nngp_ldp import SeedSpec
from nngp_ldp.rng import as_seed


def test_replay():
    a = SeedSpec(5, 1).rng("x", 3).standard_normal(10)
    b = SeedSpec(5, 1).child("x").rng(3).standard_normal(10)
    np.testing.assert_array_equal(a, b)


def test_streams_differ():
    draws = {s: SeedSpec(*s).rng().standard_normal() for s in [(0, 0), (0, 1), (1, 0)]}
    assert len(set(draws.values())) == 3
    assert SeedSpec().rng("a").random() != SeedSpec().rng("b").random()


def test_as_seed():
    assert as_seed(None) == SeedSpec()
    assert as_seed(7) == SeedSpec(7)
    s = SeedSpec(1, 2, (3,))
    assert as_seed(s) is s
    assert s.to_dict() == {"master_seed": 1, "stream_id": 2, "path": [3]}
