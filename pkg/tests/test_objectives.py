import math
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from modedse.codec import feature_ids
from modedse.objectives import (
    ENERGY_RESOLUTION,
    EnergyTable,
    UnknownFeature,
    default_energy_table,
    estimate_energy,
    psnr,
)

IDS = sorted(feature_ids())
counts = st.dictionaries(st.sampled_from(IDS), st.integers(0, 10**6), max_size=len(IDS))


def test_psnr_30db():
    n = 1000
    assert psnr(255**2 * n // 1000, n) == pytest.approx(30.0, abs=1e-12)


def test_psnr_cap():
    assert psnr(0, 64) == 100.0


def test_default_table_covers_codec():
    table = default_energy_table()
    assert table.missing(IDS) == []


def test_quantised_energies():
    t = EnergyTable({"bits": 0.1})
    assert t["bits"] % ENERGY_RESOLUTION == 0
    assert abs(t["bits"] - 0.1) <= ENERGY_RESOLUTION / 2


def test_unknown_feature():
    with pytest.raises(UnknownFeature):
        estimate_energy({"nope": 1}, default_energy_table())


def test_parse_and_dump_roundtrip():
    t = default_energy_table()
    assert dict(EnergyTable.parse(t.dumps()).items()) == dict(t.items())
    with pytest.raises(ValueError):
        EnergyTable.parse("bits 1 2")
    with pytest.raises(ValueError):
        EnergyTable({"bits": -1})


@given(counts, counts)
def test_energy_additive(a, b):
    t = default_energy_table()
    assert estimate_energy(Counter(a) + Counter(b), t) == estimate_energy(a, t) + estimate_energy(b, t)


@given(counts, st.integers(0, 1000))
def test_energy_homogeneous(a, k):
    t = default_energy_table()
    assert estimate_energy({f: k * n for f, n in a.items()}, t) == k * estimate_energy(a, t)


def test_energy_hand_value():
    t = default_energy_table()
    c = {"intra_pred_8": 3, "bits": 100}
    assert estimate_energy(c, t) == 3 * (8 + 0.25 * 64) + 100 * 0.75
    assert estimate_energy({}, t) == 0.0
