import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decoyrate.model import (
    BasisConfig,
    ChannelParams,
    CoarseGrained,
    GaussianWindow,
    IntensitySet,
    IntensitySetting,
    ModelConfig,
    ProtocolParams,
    TruncatedGaussian,
    enumerate_histories,
    validate,
)
from decoyrate.pipeline import coarse_scenario


def make_intensities(probs=(0.5, 0.25, 0.25)):
    labels = ("mu", "nu", "omega")
    values = (0.48, 0.1, 1e-4)
    return IntensitySet(
        settings=tuple(
            IntensitySetting(l, v, p) for l, v, p in zip(labels, values, probs)
        ),
        signal="mu",
    )


def test_validate_ok():
    cfg = coarse_scenario()
    assert validate(cfg).ok


def test_probabilities_sum_ok():
    cfg = dataclasses.replace(coarse_scenario(), intensities=make_intensities())
    assert validate(cfg).ok


def test_probabilities_sum_violation():
    cfg = dataclasses.replace(
        coarse_scenario(), intensities=make_intensities((0.5, 0.3, 0.3))
    )
    result = validate(cfg)
    assert not result.ok
    assert any("sum != 1" in v for v in result.violations)


def test_delta_max_boundary_violation():
    cfg = dataclasses.replace(
        coarse_scenario(), correlation=CoarseGrained(delta_max=1.0, xi=1)
    )
    result = validate(cfg)
    assert any("delta_max" in v for v in result.violations)


def test_signal_must_be_member():
    bad = dataclasses.replace(make_intensities(), signal="tau")
    cfg = dataclasses.replace(coarse_scenario(), intensities=bad)
    assert any("signal" in v for v in validate(cfg).violations)


def test_duplicate_intensity_rejected():
    s = IntensitySet(
        settings=(
            IntensitySetting("a", 0.3, 0.5),
            IntensitySetting("b", 0.3, 0.5),
        ),
        signal="a",
    )
    cfg = dataclasses.replace(coarse_scenario(), intensities=s)
    assert any("distinct" in v for v in validate(cfg).violations)


def test_coarse_bound_domain_guard():
    # 0.8 * (1 + 0.3) > 1: the closed-form photon bounds would be invalid.
    s = IntensitySet(
        settings=(IntensitySetting("a", 0.8, 0.5), IntensitySetting("b", 0.1, 0.5)),
        signal="a",
    )
    cfg = dataclasses.replace(
        coarse_scenario(),
        intensities=s,
        correlation=CoarseGrained(delta_max=0.3, xi=1),
    )
    assert any("intensity*(1+delta)" in v for v in validate(cfg).violations)


def test_gaussian_table_missing_entry():
    intens = make_intensities((0.5, 0.25, 0.25))
    table = {(("mu",), "mu"): GaussianWindow(0.48, 0.01, 0.45, 0.51)}
    cfg = dataclasses.replace(
        coarse_scenario(),
        intensities=intens,
        correlation=TruncatedGaussian(xi=1, table=table),
    )
    result = validate(cfg)
    assert any("missing entry" in v for v in result.violations)


def test_gaussian_window_ordering_checked():
    intens = make_intensities((0.5, 0.25, 0.25))
    table = {}
    for h in intens.labels:
        for s in intens.settings:
            table[((h,), s.label)] = GaussianWindow(
                s.intensity, 0.01, s.intensity + 0.1, s.intensity + 0.2
            )
    cfg = dataclasses.replace(
        coarse_scenario(),
        intensities=intens,
        correlation=TruncatedGaussian(xi=1, table=table),
    )
    assert any("lower < mean < upper" in v for v in validate(cfg).violations)


def test_validate_is_pure(iii_config):
    r1 = validate(iii_config)
    r2 = validate(iii_config)
    assert r1 == r2


def test_enumerate_histories_counts():
    intens = make_intensities((0.5, 0.25, 0.25))
    assert len(enumerate_histories(intens, 1)) == 3
    assert len(enumerate_histories(intens, 3)) == 27


def test_enumerate_histories_single_round():
    intens = make_intensities((0.5, 0.25, 0.25))
    pats = enumerate_histories(intens, 1)
    assert [p.labels for p in pats] == [("mu",), ("nu",), ("omega",)]
    assert [p.probability for p in pats] == [0.5, 0.25, 0.25]


def test_enumerate_histories_empty():
    intens = make_intensities((0.5, 0.25, 0.25))
    pats = enumerate_histories(intens, 0)
    assert len(pats) == 1
    assert pats[0].labels == ()
    assert pats[0].probability == 1.0


def test_enumerate_histories_uniform_product():
    intens = make_intensities((1 / 3, 1 / 3, 1 / 3))
    pats = enumerate_histories(intens, 3)
    assert len(pats) == 27
    for p in pats:
        assert p.probability == pytest.approx(1 / 27, abs=1e-15)


def test_enumerate_histories_cap():
    intens = make_intensities((0.5, 0.25, 0.25))
    with pytest.raises(ValueError):
        enumerate_histories(intens, 7)
    with pytest.raises(ValueError):
        enumerate_histories(intens, -1)


@given(
    st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=2, max_size=4),
    st.integers(min_value=0, max_value=3),
)
@settings(max_examples=50, deadline=None)
def test_history_probabilities_sum_to_one(weights, xi):
    total = sum(weights)
    probs = [w / total for w in weights]
    # exact renormalisation drift is what the tolerance must absorb
    settings_ = tuple(
        IntensitySetting(f"s{i}", 0.1 * (i + 1), p) for i, p in enumerate(probs)
    )
    intens = IntensitySet(settings=settings_, signal="s0")
    pats = enumerate_histories(intens, xi)
    assert len(pats) == len(weights) ** xi
    assert abs(sum(p.probability for p in pats) - 1.0) < 1e-12
