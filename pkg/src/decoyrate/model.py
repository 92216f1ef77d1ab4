"""Configuration and domain types shared by the whole pipeline.

All types are frozen dataclasses: immutable after construction, safe to share
across threads. Construction does not validate physics; :func:`validate`
collects every violated invariant in one pass.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Union

PROB_SUM_TOL = 1e-12
MAX_CORRELATION_RANGE = 6


@dataclass(frozen=True)
class IntensitySetting:
    """One intensity choice: a label, its nominal mean photon number, and its probability."""

    label: str
    intensity: float
    probability: float


@dataclass(frozen=True)
class IntensitySet:
    """Ordered intensity settings plus the designated signal label."""

    settings: tuple[IntensitySetting, ...]
    signal: str

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(self.settings))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.settings)

    def setting(self, label: str) -> IntensitySetting:
        for s in self.settings:
            if s.label == label:
                return s
        raise KeyError(label)

    def intensity(self, label: str) -> float:
        return self.setting(label).intensity

    def probability(self, label: str) -> float:
        return self.setting(label).probability

    @property
    def signal_setting(self) -> IntensitySetting:
        return self.setting(self.signal)


@dataclass(frozen=True)
class BasisConfig:
    """Basis choice probabilities for Alice and Bob (identical on both sides)."""

    q_z: float
    q_x: float


@dataclass(frozen=True)
class CoarseGrained:
    """Model-independent correlation spec: bounded relative intensity deviation.

    ``delta_by_history`` optionally refines ``delta_max`` per (history, current
    label) key; any key not present falls back to the global value.
    """

    delta_max: float
    xi: int
    delta_by_history: Mapping[tuple[tuple[str, ...], str], float] | None = None

    def delta_for(self, history: tuple[str, ...], label: str) -> float:
        if self.delta_by_history is not None:
            return self.delta_by_history.get((tuple(history), label), self.delta_max)
        return self.delta_max


@dataclass(frozen=True)
class GaussianWindow:
    """Truncated-Gaussian parameters of the actual intensity for one history pattern."""

    mean: float
    std: float
    lower: float
    upper: float


@dataclass(frozen=True)
class TruncatedGaussian:
    """History-resolved correlation spec: one truncated Gaussian per (history, current)."""

    xi: int
    table: Mapping[tuple[tuple[str, ...], str], GaussianWindow]

    def window(self, history: tuple[str, ...], label: str) -> GaussianWindow:
        return self.table[(tuple(history), label)]


CorrelationSpec = Union[CoarseGrained, TruncatedGaussian]


@dataclass(frozen=True)
class ChannelParams:
    """Detector and fibre parameters; eta(distance) is the end-to-end transmittance."""

    eta_det: float
    dark_count: float
    misalignment_rad: float
    loss_db_per_km: float
    distance_km: float = 0.0

    def eta_channel(self, distance_km: float) -> float:
        return 10.0 ** (-self.loss_db_per_km * distance_km / 10.0)

    def eta(self, distance_km: float) -> float:
        return self.eta_channel(distance_km) * self.eta_det


@dataclass(frozen=True)
class ProtocolParams:
    """Error correction efficiency, photon-number cut-off, and tolerated-error policy.

    ``e_tol=None`` means: derive the tolerated bit-error rate from the channel
    model (Z-basis QBER of the signal intensity); a float pins it.
    """

    f_ec: float
    n_cut: int
    e_tol: float | None = None


@dataclass(frozen=True)
class ModelConfig:
    """Complete scenario description for one key-rate computation."""

    intensities: IntensitySet
    basis: BasisConfig
    correlation: CorrelationSpec
    channel: ChannelParams
    protocol: ProtocolParams


@dataclass(frozen=True)
class HistoryPattern:
    """A record of the last xi intensity labels (most-recent-last) and its probability."""

    labels: tuple[str, ...]
    probability: float


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def enumerate_histories(intensities: IntensitySet, xi: int) -> list[HistoryPattern]:
    """All |A|^xi history patterns in lexicographic label-index order.

    The probability of a pattern is the exact product of the member
    probabilities (i.i.d. intensity choices). ``xi`` above
    ``MAX_CORRELATION_RANGE`` is rejected to bound memory.
    """
    if xi < 0:
        raise ValueError(f"correlation range must be non-negative, got {xi}")
    if xi > MAX_CORRELATION_RANGE:
        raise ValueError(
            f"correlation range {xi} exceeds cap {MAX_CORRELATION_RANGE}"
        )
    patterns = []
    for combo in itertools.product(intensities.settings, repeat=xi):
        prob = 1.0
        for s in combo:
            prob *= s.probability
        patterns.append(HistoryPattern(tuple(s.label for s in combo), prob))
    return patterns


def _check_intensities(s: IntensitySet, out: list[str]) -> None:
    if not s.settings:
        out.append("intensities.settings: empty")
        return
    seen_labels = set()
    values = []
    for i, st in enumerate(s.settings):
        path = f"intensities.settings[{i}]"
        if st.label in seen_labels:
            out.append(f"{path}.label: duplicate label {st.label!r}")
        seen_labels.add(st.label)
        if not st.intensity > 0.0:
            out.append(f"{path}.intensity: must be > 0, got {st.intensity}")
        if not st.probability > 0.0:
            out.append(f"{path}.probability: must be > 0, got {st.probability}")
        values.append(st.intensity)
    if len(set(values)) != len(values):
        out.append("intensities.settings: nominal intensities must be strictly distinct")
    total = sum(st.probability for st in s.settings)
    if abs(total - 1.0) > PROB_SUM_TOL:
        out.append(f"intensities.settings: probabilities sum != 1 (got {total!r})")
    if s.signal not in seen_labels:
        out.append(f"intensities.signal: {s.signal!r} is not a member of the set")


def _check_correlation(cfg: ModelConfig, out: list[str]) -> None:
    corr = cfg.correlation
    if isinstance(corr, CoarseGrained):
        if not 0.0 <= corr.delta_max < 1.0:
            out.append(f"correlation.delta_max: must be in [0, 1), got {corr.delta_max}")
        if corr.xi < 0 or corr.xi > MAX_CORRELATION_RANGE:
            out.append(
                f"correlation.xi: must be in 0..{MAX_CORRELATION_RANGE}, got {corr.xi}"
            )
        if 0.0 <= corr.delta_max < 1.0:
            for st in cfg.intensities.settings:
                if st.intensity * (1.0 + corr.delta_max) > 1.0:
                    out.append(
                        f"correlation.delta_max: {st.label} has intensity*(1+delta) "
                        f"= {st.intensity * (1 + corr.delta_max)} > 1; the closed-form "
                        "photon-number bounds require the deviation interval inside (0, 1]"
                    )
        if corr.delta_by_history is not None:
            for key, d in corr.delta_by_history.items():
                if not 0.0 <= d < 1.0:
                    out.append(f"correlation.delta_by_history[{key}]: must be in [0, 1), got {d}")
    elif isinstance(corr, TruncatedGaussian):
        if corr.xi < 0 or corr.xi > MAX_CORRELATION_RANGE:
            out.append(
                f"correlation.xi: must be in 0..{MAX_CORRELATION_RANGE}, got {corr.xi}"
            )
            return
        labels = cfg.intensities.labels
        for combo in itertools.product(labels, repeat=corr.xi):
            for cur in labels:
                key = (tuple(combo), cur)
                if key not in corr.table:
                    out.append(f"correlation.table: missing entry for history={combo}, current={cur!r}")
                    continue
                w = corr.table[key]
                path = f"correlation.table[{key}]"
                if not w.lower > 0.0:
                    out.append(f"{path}.lower: must be > 0, got {w.lower}")
                if not w.lower < w.mean < w.upper:
                    out.append(f"{path}: requires lower < mean < upper, got ({w.lower}, {w.mean}, {w.upper})")
                if not w.std > 0.0:
                    out.append(f"{path}.std: must be > 0, got {w.std}")
    else:
        out.append(f"correlation: unknown correlation spec {type(corr).__name__}")


def validate(config: ModelConfig) -> ValidationResult:
    """Collect every violated invariant (field paths included); empty means OK.

    Pure and idempotent: equal configs give equal results, nothing is mutated.
    """
    out: list[str] = []
    _check_intensities(config.intensities, out)

    b = config.basis
    if not 0.0 < b.q_z < 1.0:
        out.append(f"basis.q_z: must be in (0, 1), got {b.q_z}")
    if not 0.0 < b.q_x < 1.0:
        out.append(f"basis.q_x: must be in (0, 1), got {b.q_x}")
    if abs(b.q_z + b.q_x - 1.0) > PROB_SUM_TOL:
        out.append(f"basis: q_Z + q_X != 1 (got {b.q_z + b.q_x!r})")

    _check_correlation(config, out)

    ch = config.channel
    if not 0.0 < ch.eta_det <= 1.0:
        out.append(f"channel.eta_det: must be in (0, 1], got {ch.eta_det}")
    if not 0.0 <= ch.dark_count < 1.0:
        out.append(f"channel.dark_count: must be in [0, 1), got {ch.dark_count}")
    if ch.loss_db_per_km < 0.0:
        out.append(f"channel.loss_db_per_km: must be >= 0, got {ch.loss_db_per_km}")
    if ch.distance_km < 0.0:
        out.append(f"channel.distance_km: must be >= 0, got {ch.distance_km}")

    p = config.protocol
    if p.f_ec < 1.0:
        out.append(f"protocol.f_ec: must be >= 1, got {p.f_ec}")
    if not isinstance(p.n_cut, int) or p.n_cut < 1:
        out.append(f"protocol.n_cut: must be an integer >= 1, got {p.n_cut!r}")
    if p.e_tol is not None and not 0.0 < p.e_tol < 0.5:
        out.append(f"protocol.e_tol: fixed value must be in (0, 0.5), got {p.e_tol}")

    return ValidationResult(tuple(out))
