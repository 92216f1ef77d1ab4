"""Estimation problems as solver-agnostic constrained programs.

Each program is a linear objective over box-bounded yield/error variables,
subject to per-intensity decoy linear constraints and Cauchy-Schwarz band
constraints G_-(x_a, tau) <= x_b <= G_+(x_a, tau). Builders cover the
standard uncorrelated LP, the coarse-grained correlated problems, and the
history-resolved fine-grained problems.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .channel import Observables
from .model import ModelConfig, enumerate_histories
from .photon_stats import PhotonBounds, TauTable


class ConfigMismatch(ValueError):
    """Bounds and tau table were built from inconsistent correlation parameters."""


class MissingHistory(KeyError):
    """A required (intensity, history) entry is absent from observables or bounds."""


class VarKind(enum.Enum):
    YIELD_Z = "YZ"
    YIELD_X = "YX"
    ERR_X = "HX"


class Problem(enum.Enum):
    P1 = "P1"  # lower bound on the Z-basis single-photon yield term
    P2 = "P2"  # lower bound on the X-basis single-photon yield term
    P3 = "P3"  # upper bound on the X-basis single-photon error term


_PROBLEM_KIND = {Problem.P1: VarKind.YIELD_Z, Problem.P2: VarKind.YIELD_X, Problem.P3: VarKind.ERR_X}
_PROBLEM_SENSE = {Problem.P1: "min", Problem.P2: "min", Problem.P3: "max"}


@dataclass(frozen=True)
class VariableIndex:
    kind: VarKind
    n: int
    intensity: str | None = None
    history: tuple[str, ...] | None = None

    def name(self) -> str:
        parts = [self.kind.value, str(self.n)]
        if self.intensity is not None:
            parts.append(self.intensity)
        if self.history is not None:
            parts.append("|" + ",".join(self.history))
        return "_".join(parts)


@dataclass(frozen=True)
class LinearConstraint:
    """coeffs . x  <relation>  rhs, with relation in {'<=', '>='}."""

    coeffs: np.ndarray
    relation: Literal["<=", ">="]
    rhs: float
    label: str = ""


@dataclass(frozen=True)
class CsConstraint:
    """G_-(x[a], tau) <= x[b] <= G_+(x[a], tau) over variable positions a, b."""

    a: int
    b: int
    tau: float


@dataclass(frozen=True)
class EstimationProgram:
    sense: Literal["min", "max"]
    objective: np.ndarray
    variables: tuple[VariableIndex, ...]
    linear: tuple[LinearConstraint, ...]
    cs: tuple[CsConstraint, ...]
    # True when the objective already carries the q^2 p_mu p_history p(1|..)
    # weights, i.e. its optimum is the key-rate term itself.
    prescaled: bool = False

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def index_of(self, var: VariableIndex) -> int:
        return self.variables.index(var)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def _obs_map(problem: Problem, observables: Observables):
    if problem is Problem.P1:
        return observables.z_norm
    if problem is Problem.P2:
        return observables.x_norm
    return observables.e_norm


def _decoy_rows(
    n_vars: int,
    var_pos: dict,
    kind: VarKind,
    label: str | None,
    history: tuple[str, ...] | None,
    row,
    obs_value: float,
    tag: str,
) -> list[LinearConstraint]:
    """The two linear decoy constraints of one (intensity[, history]) block."""
    n_cut = row.n_cut
    lo = np.zeros(n_vars)
    up = np.zeros(n_vars)
    for n in range(n_cut + 1):
        pos = var_pos[(kind, n, label, history)]
        lo[pos] = row.p_low[n]
        up[pos] = row.p_up[n]
    return [
        LinearConstraint(_freeze(lo), "<=", obs_value, label=f"lower[{tag}]"),
        LinearConstraint(_freeze(up), ">=", obs_value - row.tail_mass_ub, label=f"upper[{tag}]"),
    ]


def build_standard_lp(
    observables: Observables,
    bounds: PhotonBounds,
    basis: Literal["Z", "X"],
    target: Literal["yield", "error"],
) -> EstimationProgram:
    """Standard decoy LP: intensity-independent variables, no CS constraints.

    Valid only in the uncorrelated regime; with delta_max = 0 bounds the
    p_low/p_up coefficients coincide with the exact Poisson probabilities and
    the program is exactly the textbook one.
    """
    if basis == "Z" and target == "error":
        raise ValueError("error estimation is defined in the X basis only")
    kind = (
        VarKind.ERR_X
        if target == "error"
        else (VarKind.YIELD_Z if basis == "Z" else VarKind.YIELD_X)
    )
    obs = {
        VarKind.YIELD_Z: observables.z_norm,
        VarKind.YIELD_X: observables.x_norm,
        VarKind.ERR_X: observables.e_norm,
    }[kind]
    n_cut = bounds.n_cut
    variables = tuple(VariableIndex(kind, n) for n in range(n_cut + 1))
    var_pos = {(kind, n, None, None): n for n in range(n_cut + 1)}
    rows: list[LinearConstraint] = []
    for (label, history), row in sorted(
        bounds.rows.items(), key=lambda kv: (kv[0][0], kv[0][1] or ())
    ):
        key = (label, history)
        tag = label if history is None else f"{label}|{','.join(history)}"
        rows.extend(
            _decoy_rows(len(variables), var_pos, kind, None, None, row, obs[key], tag)
        )
    objective = np.zeros(len(variables))
    objective[1] = 1.0
    sense = "max" if target == "error" else "min"
    return EstimationProgram(
        sense=sense,
        objective=_freeze(objective),
        variables=variables,
        linear=tuple(rows),
        cs=(),
    )


def build_coarse(
    problem: Problem,
    observables: Observables,
    bounds: PhotonBounds,
    tau_table: TauTable,
    config: ModelConfig,
) -> EstimationProgram:
    """Coarse-grained correlated problem: per-intensity variables, decoy rows
    with p_low/p_up coefficients and the printed tail completion term, and CS
    band constraints for every ordered pair of distinct intensities at every
    photon number."""
    if bounds.xi != tau_table.xi or bounds.delta_max != tau_table.delta_max:
        raise ConfigMismatch(
            f"bounds built at (delta={bounds.delta_max}, xi={bounds.xi}) but tau table "
            f"at (delta={tau_table.delta_max}, xi={tau_table.xi})"
        )
    if bounds.n_cut != config.protocol.n_cut or tau_table.n_cut != config.protocol.n_cut:
        raise ConfigMismatch("bounds/tau table n_cut differs from protocol n_cut")
    kind = _PROBLEM_KIND[problem]
    labels = config.intensities.labels
    n_cut = config.protocol.n_cut
    variables = []
    var_pos: dict = {}
    for label in labels:
        for n in range(n_cut + 1):
            var_pos[(kind, n, label, None)] = len(variables)
            variables.append(VariableIndex(kind, n, label))
    obs = _obs_map(problem, observables)
    rows: list[LinearConstraint] = []
    for label in labels:
        rows.extend(
            _decoy_rows(
                len(variables), var_pos, kind, label, None,
                bounds.row(label), obs[(label, None)], label,
            )
        )
    cs = []
    for a in labels:
        for b in labels:
            if a == b:
                continue
            for n in range(n_cut + 1):
                cs.append(
                    CsConstraint(
                        var_pos[(kind, n, a, None)],
                        var_pos[(kind, n, b, None)],
                        tau_table.tau(a, b, n),
                    )
                )
    objective = np.zeros(len(variables))
    objective[var_pos[(kind, 1, config.intensities.signal, None)]] = 1.0
    return EstimationProgram(
        sense=_PROBLEM_SENSE[problem],
        objective=_freeze(objective),
        variables=tuple(variables),
        linear=tuple(rows),
        cs=tuple(cs),
    )


def build_fine(
    problem: Problem,
    observables: Observables,
    bounds: PhotonBounds,
    tau_table: TauTable,
    config: ModelConfig,
) -> EstimationProgram:
    """History-resolved problem: variables per (n, intensity, history), decoy
    rows per (intensity, history), CS constraints only between patterns that
    differ in the current setting, and the weighted single-photon quantity as
    the objective (the optimum is the key-rate term directly)."""
    corr = config.correlation
    xi = corr.xi
    if xi < 1:
        raise ValueError("fine-grained problems require xi >= 1")
    if bounds.xi != xi or tau_table.xi != xi:
        raise ConfigMismatch(
            f"bounds/tau built at xi=({bounds.xi}, {tau_table.xi}), config has xi={xi}"
        )
    kind = _PROBLEM_KIND[problem]
    labels = config.intensities.labels
    n_cut = config.protocol.n_cut
    histories = enumerate_histories(config.intensities, xi)

    variables = []
    var_pos: dict = {}
    for hist in histories:
        for label in labels:
            for n in range(n_cut + 1):
                var_pos[(kind, n, label, hist.labels)] = len(variables)
                variables.append(VariableIndex(kind, n, label, hist.labels))

    obs = _obs_map(problem, observables)
    rows: list[LinearConstraint] = []
    for hist in histories:
        for label in labels:
            key = (label, hist.labels)
            if key not in obs:
                raise MissingHistory(f"observables missing {key}")
            if key not in bounds.rows:
                raise MissingHistory(f"photon bounds missing {key}")
            rows.extend(
                _decoy_rows(
                    len(variables), var_pos, kind, label, hist.labels,
                    bounds.row(label, hist.labels), obs[key],
                    f"{label}|{','.join(hist.labels)}",
                )
            )

    cs = []
    for hist in histories:
        for a in labels:
            for b in labels:
                if a == b:
                    continue
                for n in range(n_cut + 1):
                    cs.append(
                        CsConstraint(
                            var_pos[(kind, n, a, hist.labels)],
                            var_pos[(kind, n, b, hist.labels)],
                            tau_table.tau(a, b, n, hist.labels),
                        )
                    )

    q = config.basis.q_z if problem is Problem.P1 else config.basis.q_x
    signal = config.intensities.signal
    p_mu = config.intensities.probability(signal)
    objective = np.zeros(len(variables))
    for hist in histories:
        row = bounds.row(signal, hist.labels)
        # p_low for the minimised yields, p_up for the maximised error term.
        p1 = row.p_up[1] if problem is Problem.P3 else row.p_low[1]
        pos = var_pos[(kind, 1, signal, hist.labels)]
        objective[pos] = q**2 * p_mu * hist.probability * p1
    return EstimationProgram(
        sense=_PROBLEM_SENSE[problem],
        objective=_freeze(objective),
        variables=tuple(variables),
        linear=tuple(rows),
        cs=tuple(cs),
        prescaled=True,
    )
