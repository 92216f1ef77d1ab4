"""Channel and detector model: simulated observables and Fock-state reference points.

A two-detector receiver with misalignment angle delta_A, per-detector dark
count probability p_d, and end-to-end transmittance eta. Double clicks are
assigned a random bit. The same model generates both the observable click and
error fractions for weak coherent pulses and the n-photon (Fock) yields and
error rates used as canonical linearization reference points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .model import CoarseGrained, ModelConfig, TruncatedGaussian, enumerate_histories

ObsKey = tuple[str, tuple[str, ...] | None]


@dataclass(frozen=True)
class Observables:
    """Normalised observables per (intensity label, history-or-None).

    z_norm = Z_a / (q_Z^2 p_a), x_norm = X_a / (q_X^2 p_a), e_norm =
    E_a / (q_X^2 p_a); z_qber is the Z-basis error rate implied by the same
    (basis-symmetric) model at the signal intensity, used for E_tol.
    """

    z_norm: Mapping[ObsKey, float]
    x_norm: Mapping[ObsKey, float]
    e_norm: Mapping[ObsKey, float]
    z_qber: float


@dataclass(frozen=True)
class CanonicalReferences:
    """Fock-state yields and error rates per photon number (intensity independent)."""

    y_ref: tuple[float, ...]
    h_ref: tuple[float, ...]


def fock_detection(
    n: int, eta: float, misalignment_rad: float, dark_count: float
) -> tuple[float, float]:
    """Yield and error probability of an n-photon input.

    Click patterns for the photons alone are p_00 = (1-eta)^n,
    p_10 = (eta cos^2 dA + 1 - eta)^n - p_00, p_01 analogous with sin^2, and
    p_11 the remainder; dark counts are folded in afterwards, with double
    clicks contributing a random bit.
    """
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    c2 = math.cos(misalignment_rad) ** 2
    s2 = math.sin(misalignment_rad) ** 2
    p00 = (1.0 - eta) ** n
    p10 = (eta * c2 + 1.0 - eta) ** n - p00
    p01 = (eta * s2 + 1.0 - eta) ** n - p00
    p11 = max(0.0, 1.0 - p00 - p01 - p10)
    pd = dark_count
    y_ref = 1.0 - (1.0 - pd) ** 2 * p00
    err_a = p01 + 0.5 * p11
    err_b = 0.5 * (p01 + p11)
    err_c = p00 + p01 + 0.5 * (p10 + p11)
    err_d = 0.5
    h_ref = (
        (1.0 - pd) ** 2 * err_a
        + pd * (1.0 - pd) * (err_b + err_c)
        + pd**2 * err_d
    )
    return y_ref, h_ref


def canonical_references(config: ModelConfig, distance_km: float) -> CanonicalReferences:
    """Reference points for n = 0..n_cut at the given distance."""
    eta = config.channel.eta(distance_km)
    ys, hs = [], []
    for n in range(config.protocol.n_cut + 1):
        y, h = fock_detection(n, eta, config.channel.misalignment_rad, config.channel.dark_count)
        ys.append(y)
        hs.append(h)
    return CanonicalReferences(tuple(ys), tuple(hs))


def _click_fraction(eta: float, a: float, pd: float) -> float:
    return 1.0 - (1.0 - pd) ** 2 * math.exp(-eta * a)


def _error_fraction(eta: float, a: float, pd: float, misalignment_rad: float) -> float:
    c2 = math.cos(misalignment_rad) ** 2
    s2 = math.sin(misalignment_rad) ** 2
    h = 0.5 * (math.exp(-eta * a * c2) - math.exp(-eta * a * s2))
    return (
        pd**2 / 2.0
        + pd * (1.0 - pd) * (1.0 + h)
        + (1.0 - pd) ** 2 * (0.5 + h - math.exp(-eta * a) / 2.0)
    )


def observables(config: ModelConfig, distance_km: float) -> Observables:
    """Simulated normalised observables for every intensity (and history, in
    fine-grained mode, where the effective intensity is the mean of the
    truncating Gaussian)."""
    eta = config.channel.eta(distance_km)
    pd = config.channel.dark_count
    da = config.channel.misalignment_rad
    z: dict[ObsKey, float] = {}
    x: dict[ObsKey, float] = {}
    e: dict[ObsKey, float] = {}

    corr = config.correlation
    if isinstance(corr, TruncatedGaussian):
        for hist in enumerate_histories(config.intensities, corr.xi):
            for s in config.intensities.settings:
                a_eff = corr.window(hist.labels, s.label).mean
                key = (s.label, hist.labels)
                z[key] = x[key] = _click_fraction(eta, a_eff, pd)
                e[key] = _error_fraction(eta, a_eff, pd, da)
        signal = config.intensities.signal
        hists = enumerate_histories(config.intensities, corr.xi)
        z_sig = sum(h.probability * z[(signal, h.labels)] for h in hists)
        e_sig = sum(h.probability * e[(signal, h.labels)] for h in hists)
    elif isinstance(corr, CoarseGrained):
        for s in config.intensities.settings:
            key = (s.label, None)
            z[key] = x[key] = _click_fraction(eta, s.intensity, pd)
            e[key] = _error_fraction(eta, s.intensity, pd, da)
        z_sig = z[(config.intensities.signal, None)]
        e_sig = e[(config.intensities.signal, None)]
    else:
        raise TypeError(f"unsupported correlation spec {type(corr).__name__}")

    z_qber = e_sig / z_sig if z_sig > 0.0 else 0.0
    return Observables(z_norm=z, x_norm=x, e_norm=e, z_qber=z_qber)
