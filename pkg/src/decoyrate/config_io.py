"""TOML scenario files <-> ModelConfig."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import (
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


def _intensities(table: dict[str, Any]) -> IntensitySet:
    settings = tuple(
        IntensitySetting(
            label=str(s["label"]),
            intensity=float(s["intensity"]),
            probability=float(s["probability"]),
        )
        for s in table["settings"]
    )
    return IntensitySet(settings=settings, signal=str(table["signal"]))


def _correlation(table: dict[str, Any]):
    model = table["model"]
    xi = int(table["xi"])
    if model == "coarse-grained":
        return CoarseGrained(delta_max=float(table["delta_max"]), xi=xi)
    if model == "truncated-gaussian":
        windows = {}
        for w in table["windows"]:
            key = (tuple(str(h) for h in w["history"]), str(w["current"]))
            windows[key] = GaussianWindow(
                mean=float(w["mean"]),
                std=float(w["std"]),
                lower=float(w["lower"]),
                upper=float(w["upper"]),
            )
        return TruncatedGaussian(xi=xi, table=windows)
    raise ValueError(f"unknown correlation model {model!r}")


def load_scenario(path: str | Path) -> tuple[ModelConfig, dict[str, Any]]:
    """Parse a scenario file; returns the config plus the raw [sweep] table
    (empty dict when absent) for CLI defaults."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    basis = raw["basis"]
    q_z = float(basis["q_z"])
    q_x = float(basis.get("q_x", 1.0 - q_z))
    channel = raw["channel"]
    protocol = raw["protocol"]
    config = ModelConfig(
        intensities=_intensities(raw["intensities"]),
        basis=BasisConfig(q_z=q_z, q_x=q_x),
        correlation=_correlation(raw["correlation"]),
        channel=ChannelParams(
            eta_det=float(channel["eta_det"]),
            dark_count=float(channel["dark_count"]),
            misalignment_rad=float(channel["misalignment_rad"]),
            loss_db_per_km=float(channel["loss_db_per_km"]),
            distance_km=float(channel.get("distance_km", 0.0)),
        ),
        protocol=ProtocolParams(
            f_ec=float(protocol["f_ec"]),
            n_cut=int(protocol["n_cut"]),
            e_tol=float(protocol["e_tol"]) if "e_tol" in protocol else None,
        ),
    )
    return config, raw.get("sweep", {})
