import numpy as np
import pytest

from decoyrate.cs_band import band
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
)
from decoyrate.pipeline import coarse_scenario
from decoyrate.programs import CsConstraint, EstimationProgram, LinearConstraint, VariableIndex, VarKind


@pytest.fixture
def iii_config():
    """The bundled coarse-grained scenario at delta=1e-2, xi=1."""
    return coarse_scenario(delta_max=1e-2, xi=1)


def point_mass_table(intensities: IntensitySet, xi: int = 1):
    """Truncated-Gaussian table that degenerates to point masses at the
    nominal intensities (history independent)."""
    table = {}
    labels = intensities.labels
    import itertools

    for hist in itertools.product(labels, repeat=xi):
        for s in intensities.settings:
            table[(tuple(hist), s.label)] = GaussianWindow(
                mean=s.intensity,
                std=1e-9,
                lower=s.intensity - 1e-6,
                upper=s.intensity + 1e-6,
            )
    return table


def synthetic_gauss_table(intensities: IntensitySet, xi: int = 1, rel_std=0.004):
    """History-shifted synthetic truncated-Gaussian table (means move by up to
    ~0.2% depending on the previous setting)."""
    shift = {}
    for i, label in enumerate(intensities.labels):
        shift[label] = 1.0 + 0.0015 * (1 - i)  # mu: +0.15%, nu: 0%, omega: -0.15%
    table = {}
    import itertools

    for hist in itertools.product(intensities.labels, repeat=xi):
        factor = 1.0
        for h in hist:
            factor *= shift[h] ** (1.0 / max(len(hist), 1))
        for s in intensities.settings:
            mean = s.intensity * factor
            std = rel_std * mean + 1e-7
            table[(tuple(hist), s.label)] = GaussianWindow(
                mean=mean, std=std, lower=mean - 4 * std, upper=mean + 4 * std
            )
    return table


def toy_cs_program(seed: int) -> EstimationProgram:
    """Tiny two-variable estimation program with one CS pair (both
    directions) and a few random linear rows, feasible by construction."""
    rng = np.random.default_rng(seed)
    tau = float(rng.uniform(0.3, 0.99))
    y_a = float(rng.uniform(0.15, 0.85))
    lo, hi = band(y_a, tau)
    y_b = float(rng.uniform(lo + 0.05 * (hi - lo + 1e-9), hi - 0.05 * (hi - lo + 1e-9)))
    anchor = np.array([y_a, y_b])
    rows = []
    for _ in range(int(rng.integers(1, 4))):
        w = rng.normal(size=2)
        w /= max(np.max(np.abs(w)), 1e-9)
        margin = 0.02 + 0.1 * float(rng.random())
        rows.append(LinearConstraint(w, "<=", float(w @ anchor) + margin))
    kind = rng.integers(0, 3)
    if kind == 0:
        obj = np.array([1.0, 0.0])
    elif kind == 1:
        obj = np.array([0.0, 1.0])
    else:
        obj = rng.uniform(-1.0, 1.0, size=2)
    sense = "min" if rng.random() < 0.5 else "max"
    return EstimationProgram(
        sense=sense,
        objective=obj,
        variables=(
            VariableIndex(VarKind.YIELD_Z, 0, "a"),
            VariableIndex(VarKind.YIELD_Z, 0, "b"),
        ),
        linear=tuple(rows),
        cs=(CsConstraint(0, 1, tau), CsConstraint(1, 0, tau)),
    )


def two_intensity_config(delta_max=0.05, xi=1, n_cut=1) -> ModelConfig:
    """Small two-intensity scenario for builder-based toy programs."""
    return ModelConfig(
        intensities=IntensitySet(
            settings=(
                IntensitySetting("mu", 0.4, 0.9),
                IntensitySetting("nu", 0.08, 0.1),
            ),
            signal="mu",
        ),
        basis=BasisConfig(q_z=0.9, q_x=0.1),
        correlation=CoarseGrained(delta_max=delta_max, xi=xi),
        channel=ChannelParams(
            eta_det=0.6, dark_count=1e-7, misalignment_rad=0.05, loss_db_per_km=0.2
        ),
        protocol=ProtocolParams(f_ec=1.16, n_cut=n_cut),
    )
