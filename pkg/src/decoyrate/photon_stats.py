"""Photon-number probability bounds and Cauchy-Schwarz overlap parameters.

Two correlation models are covered:

* coarse-grained: only the maximal relative deviation delta of the actual
  intensity is known; closed-form record-independent bounds on p(n|a) and a
  closed-form overlap tau per (pair, n);
* truncated-Gaussian: the actual intensity of each round follows a truncated
  Gaussian conditioned on the last xi settings; p(n|...) is bracketed by
  Gauss-Legendre quadrature and tau is the future-averaged Bhattacharyya
  overlap of the history-shifted distributions.

Every bracketed quantity keeps (lower, upper) so downstream constraints stay
sound in the presence of numerical integration error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Mapping

import numpy as np

from .model import (
    CoarseGrained,
    GaussianWindow,
    IntensitySet,
    TruncatedGaussian,
    enumerate_histories,
)

# Gaussian mass beyond 10 sigma is ~1.5e-23; restricting quadrature to this
# window loses nothing at the target bracket width of 1e-9.
_SIGMA_WINDOW = 10.0
_BRACKET_TARGET = 1e-9

PnSource = Callable[[tuple[str, ...], int], tuple[float, float]]


class IntegrationNotConverged(RuntimeError):
    """Quadrature bracket failed to reach the target width after node doubling."""


def poisson_pmf(n: int, a: float) -> float:
    """e^{-a} a^n / n!, stable for large n."""
    if a <= 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-a + n * math.log(a) - math.lgamma(n + 1))


def poisson_tail(n_cut: int, a: float) -> float:
    """P[Poisson(a) > n_cut] = 1 - sum_{n<=n_cut} pmf, computed by direct summation."""
    total = 0.0
    for n in range(n_cut + 1):
        total += poisson_pmf(n, a)
    return max(0.0, 1.0 - total)


@dataclass(frozen=True)
class BoundsRow:
    """Per (intensity[, history]): bracketing probabilities for n = 0..n_cut.

    ``tail_mass_ub`` is the completion term of the upper linear constraint: an
    upper bound on the photon-number mass beyond n_cut, P[Poisson(a_plus) > n_cut]
    evaluated at the largest admissible actual intensity.
    """

    p_low: tuple[float, ...]
    p_up: tuple[float, ...]
    tail_mass_ub: float

    @property
    def n_cut(self) -> int:
        return len(self.p_low) - 1

    @property
    def tail_U(self) -> float:
        """1 - sum of the lower brackets: the generic upper bound on truncated mass."""
        return max(0.0, 1.0 - sum(self.p_low))


@dataclass(frozen=True)
class PhotonBounds:
    """Bound rows keyed by (intensity label, history-or-None), plus provenance."""

    n_cut: int
    rows: Mapping[tuple[str, tuple[str, ...] | None], BoundsRow]
    xi: int
    delta_max: float | None  # None for quadrature-based bounds

    def row(self, label: str, history: tuple[str, ...] | None = None) -> BoundsRow:
        return self.rows[(label, None if history is None else tuple(history))]


@dataclass(frozen=True)
class TauTable:
    """Overlap parameters keyed by (a, b, history-or-None, n), plus provenance."""

    values: Mapping[tuple[str, str, tuple[str, ...] | None, int], float]
    n_cut: int
    xi: int
    delta_max: float | None

    def tau(self, a: str, b: str, n: int, history: tuple[str, ...] | None = None) -> float:
        return self.values[(a, b, None if history is None else tuple(history), n)]


def coarse_bounds(a: float, delta_max: float, n_cut: int) -> BoundsRow:
    """Closed-form record-independent bounds for one intensity.

    n = 0: [e^{-a+}, e^{-a-}]; n >= 1: [pmf(n; a-), pmf(n; a+)],
    with a_pm = a (1 +- delta_max).
    """
    if a <= 0.0:
        raise ValueError(f"intensity must be positive, got {a}")
    if not 0.0 <= delta_max < 1.0:
        raise ValueError(f"delta_max must be in [0, 1), got {delta_max}")
    a_lo = a * (1.0 - delta_max)
    a_hi = a * (1.0 + delta_max)
    p_low = [math.exp(-a_hi)]
    p_up = [math.exp(-a_lo)]
    for n in range(1, n_cut + 1):
        p_low.append(poisson_pmf(n, a_lo))
        p_up.append(poisson_pmf(n, a_hi))
    return BoundsRow(tuple(p_low), tuple(p_up), poisson_tail(n_cut, a_hi))


def coarse_photon_bounds(
    intensities: IntensitySet, spec: CoarseGrained, n_cut: int
) -> PhotonBounds:
    """Bound rows for every intensity; per-history rows when a delta table is given."""
    rows: dict[tuple[str, tuple[str, ...] | None], BoundsRow] = {}
    if spec.delta_by_history is None:
        for s in intensities.settings:
            rows[(s.label, None)] = coarse_bounds(s.intensity, spec.delta_max, n_cut)
    else:
        for hist in enumerate_histories(intensities, spec.xi):
            for s in intensities.settings:
                d = spec.delta_for(hist.labels, s.label)
                rows[(s.label, hist.labels)] = coarse_bounds(s.intensity, d, n_cut)
    return PhotonBounds(n_cut=n_cut, rows=rows, xi=spec.xi, delta_max=spec.delta_max)


def coarse_tau(
    a: float,
    b: float,
    n: int,
    xi: int,
    intensities: IntensitySet,
    delta_max: float,
) -> float:
    """Coarse-grained overlap tau for intensities a != b at photon number n.

    n = 0 branch: e^{a- + b- - (a+ + b+)}; n >= 1 branch:
    e^{a+ + b+ - (a- + b-)} (a- b- / a+ b+)^n; both times the record bracket
    [1 - sum_c p_c (e^{-c-} - e^{-c+})]^{2 xi}.
    """
    if a == b:
        raise ValueError("tau is defined for distinct intensities only")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    a_lo, a_hi = a * (1.0 - delta_max), a * (1.0 + delta_max)
    b_lo, b_hi = b * (1.0 - delta_max), b * (1.0 + delta_max)
    bracket = 1.0 - sum(
        s.probability * (math.exp(-s.intensity * (1.0 - delta_max))
                         - math.exp(-s.intensity * (1.0 + delta_max)))
        for s in intensities.settings
    )
    record_factor = bracket ** (2 * xi)
    if n == 0:
        return math.exp(a_lo + b_lo - (a_hi + b_hi)) * record_factor
    ratio = (a_lo * b_lo) / (a_hi * b_hi)
    return math.exp(a_hi + b_hi - (a_lo + b_lo)) * ratio**n * record_factor


def coarse_tau_table(
    intensities: IntensitySet, spec: CoarseGrained, n_cut: int
) -> TauTable:
    values: dict[tuple[str, str, tuple[str, ...] | None, int], float] = {}
    for sa in intensities.settings:
        for sb in intensities.settings:
            if sa.label == sb.label:
                continue
            for n in range(n_cut + 1):
                values[(sa.label, sb.label, None, n)] = coarse_tau(
                    sa.intensity, sb.intensity, n, spec.xi, intensities, spec.delta_max
                )
    return TauTable(values=values, n_cut=n_cut, xi=spec.xi, delta_max=spec.delta_max)


@lru_cache(maxsize=32)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _gauss_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _poisson_pmf_vec(n: int, alpha: np.ndarray) -> np.ndarray:
    return np.exp(-alpha + n * np.log(alpha) - math.lgamma(n + 1))


def _quad_pn(window: GaussianWindow, n: int, order: int) -> tuple[float, float]:
    """One Gauss-Legendre pass over the sigma-restricted interval.

    Works in the centered variable t = alpha - mean (the Gaussian argument is
    then exact even when the window is far narrower than the mean, e.g. the
    std -> 0 limit). Returns (value, neglected-upper-mass): the integral
    estimate over [lower, upper] ∩ mean±10σ, and an upper bound on the
    contribution of the part of the truncation interval outside that window.
    """
    m, s, lo, hi = window.mean, window.std, window.lower, window.upper
    norm = _gauss_cdf((hi - m) / s) - _gauss_cdf((lo - m) / s)
    t_lo = max(lo - m, -_SIGMA_WINDOW * s)
    t_hi = min(hi - m, _SIGMA_WINDOW * s)
    nodes, weights = _leggauss(order)
    t = 0.5 * (t_hi - t_lo) * nodes + 0.5 * (t_hi + t_lo)
    dens = np.exp(-0.5 * (t / s) ** 2) / (s * math.sqrt(2.0 * math.pi) * norm)
    value = 0.5 * (t_hi - t_lo) * float(np.dot(weights, dens * _poisson_pmf_vec(n, m + t)))
    outside = max(0.0, 1.0 - (_gauss_cdf(t_hi / s) - _gauss_cdf(t_lo / s)) / norm)
    pois_max = max(poisson_pmf(n, lo), poisson_pmf(n, hi), poisson_pmf(n, max(lo, min(hi, float(n)))))
    return value, outside * pois_max


def trunc_gauss_pn(
    window: GaussianWindow, n: int, quad_nodes: int = 64
) -> tuple[float, float]:
    """Bracket of integral_g(alpha) * e^{-alpha} alpha^n / n! d alpha.

    g is the Gaussian density renormalised on [lower, upper]. The bracket is
    (min, max) of evaluations at quad_nodes and 2*quad_nodes Gauss-Legendre
    nodes, widened by their absolute difference (plus the bounded mass outside
    the sigma window on the upper side). Nodes are doubled up to twice more if
    the bracket is wider than 1e-9; IntegrationNotConverged after that.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if quad_nodes < 8:
        raise ValueError(f"quad_nodes must be >= 8, got {quad_nodes}")
    order = quad_nodes
    for _ in range(3):
        v1, miss1 = _quad_pn(window, n, order)
        v2, miss2 = _quad_pn(window, n, 2 * order)
        diff = abs(v1 - v2)
        lo = max(0.0, min(v1, v2) - diff)
        hi = max(v1, v2) + diff + max(miss1, miss2)
        if hi - lo <= _BRACKET_TARGET:
            return lo, hi
        order *= 2
    raise IntegrationNotConverged(
        f"bracket width {hi - lo:.3e} > {_BRACKET_TARGET} at {4 * quad_nodes} nodes "
        f"for window {window}, n={n}"
    )


class TruncGaussPn:
    """Cached bracket source for the photon-number integrals of one correlation table."""

    def __init__(self, spec: TruncatedGaussian, quad_nodes: int = 64):
        self.spec = spec
        self.quad_nodes = quad_nodes
        self._cache: dict[tuple[tuple[str, ...], str, int], tuple[float, float]] = {}

    def window_of(self, window_labels: tuple[str, ...]) -> GaussianWindow:
        history, current = tuple(window_labels[:-1]), window_labels[-1]
        return self.spec.window(history, current)

    def __call__(self, window_labels: tuple[str, ...], n: int) -> tuple[float, float]:
        key = (tuple(window_labels[:-1]), window_labels[-1], n)
        if key not in self._cache:
            self._cache[key] = trunc_gauss_pn(self.window_of(window_labels), n, self.quad_nodes)
        return self._cache[key]


def general_tau(
    v: tuple[str, ...],
    w: tuple[str, ...],
    xi: int,
    intensities: IntensitySet,
    pn_source: PnSource,
    n_trunc: int,
    params_key: Callable[[tuple[str, ...]], object] | None = None,
) -> float:
    """Future-averaged squared Bhattacharyya overlap of two setting patterns.

    ``v`` and ``w`` are the (history..., current) label windows of length
    xi + 1; they must agree on the history and differ in the current setting.
    For each future pattern f in A^xi and each j = 1..xi, the per-round overlap
    sum_{n<=n_trunc} sqrt(P_n(v[j:]+f[:j]) P_n(w[j:]+f[:j])) is evaluated with
    the lower brackets, making the result a valid lower bound on tau.

    When ``params_key`` is given and maps both shifted windows to equal keys,
    the per-round overlap is exactly 1 (a distribution's overlap with itself);
    this keeps degenerate tables exact instead of quadrature-limited.
    """
    if len(v) != xi + 1 or len(w) != xi + 1:
        raise ValueError(f"patterns must have length xi+1={xi + 1}, got {len(v)}, {len(w)}")
    if tuple(v[:-1]) != tuple(w[:-1]):
        raise ValueError("patterns must agree on all past entries")
    if v[-1] == w[-1]:
        raise ValueError("patterns must differ in the current setting")
    if xi == 0:
        return 1.0

    labels = intensities.labels
    probs = {s.label: s.probability for s in intensities.settings}

    @lru_cache(maxsize=None)
    def round_overlap(win_v: tuple[str, ...], win_w: tuple[str, ...]) -> float:
        if params_key is not None and params_key(win_v) == params_key(win_w):
            return 1.0
        total = 0.0
        for n in range(n_trunc + 1):
            lo_v, _ = pn_source(win_v, n)
            lo_w, _ = pn_source(win_w, n)
            total += math.sqrt(max(lo_v, 0.0) * max(lo_w, 0.0))
        return min(total, 1.0)

    acc = 0.0
    all_unit = True
    for future in product(labels, repeat=xi):
        weight = 1.0
        inner = 1.0
        for j in range(1, xi + 1):
            weight *= probs[future[j - 1]]
            win_v = tuple(v[j:]) + tuple(future[:j])
            win_w = tuple(w[j:]) + tuple(future[:j])
            inner *= round_overlap(win_v, win_w)
        all_unit = all_unit and inner == 1.0
        acc += weight * inner
    if all_unit:
        # every per-round overlap is exactly one, so tau is exactly
        # (sum of future probabilities)^2 = 1; skip the float re-summation
        return 1.0
    return min(acc, 1.0) ** 2


def default_n_trunc(spec: TruncatedGaussian, tail_tol: float = 1e-12) -> int:
    """Smallest N whose Poisson tail beyond N is < tail_tol at the largest upper truncation."""
    u_max = max(w.upper for w in spec.table.values())
    n = 0
    while poisson_tail(n, u_max) >= tail_tol:
        n += 1
        if n > 500:
            raise RuntimeError("n_trunc search did not terminate")
    return n


def trunc_gauss_photon_bounds(
    intensities: IntensitySet,
    spec: TruncatedGaussian,
    n_cut: int,
    quad_nodes: int = 64,
) -> PhotonBounds:
    """Quadrature-bracketed bound rows per (intensity, history)."""
    pn = TruncGaussPn(spec, quad_nodes)
    rows: dict[tuple[str, tuple[str, ...] | None], BoundsRow] = {}
    for hist in enumerate_histories(intensities, spec.xi):
        for s in intensities.settings:
            window = spec.window(hist.labels, s.label)
            lows, ups = [], []
            for n in range(n_cut + 1):
                lo, hi = pn(hist.labels + (s.label,), n)
                lows.append(lo)
                ups.append(min(hi, 1.0))
            rows[(s.label, hist.labels)] = BoundsRow(
                tuple(lows), tuple(ups), poisson_tail(n_cut, window.upper)
            )
    return PhotonBounds(n_cut=n_cut, rows=rows, xi=spec.xi, delta_max=None)


def trunc_gauss_tau_table(
    intensities: IntensitySet,
    spec: TruncatedGaussian,
    n_cut: int,
    quad_nodes: int = 64,
    tail_tol: float = 1e-12,
) -> TauTable:
    """General tau per (ordered pair, history); the value is n-independent and
    replicated across n = 0..n_cut for a uniform table layout."""
    pn = TruncGaussPn(spec, quad_nodes)
    n_trunc = default_n_trunc(spec, tail_tol)

    def key(window_labels: tuple[str, ...]) -> GaussianWindow:
        return pn.window_of(window_labels)

    values: dict[tuple[str, str, tuple[str, ...] | None, int], float] = {}
    for hist in enumerate_histories(intensities, spec.xi):
        for sa in intensities.settings:
            for sb in intensities.settings:
                if sa.label == sb.label:
                    continue
                tau = general_tau(
                    hist.labels + (sa.label,),
                    hist.labels + (sb.label,),
                    spec.xi,
                    intensities,
                    pn,
                    n_trunc,
                    params_key=key,
                )
                for n in range(n_cut + 1):
                    values[(sa.label, sb.label, hist.labels, n)] = tau
    return TauTable(values=values, n_cut=n_cut, xi=spec.xi, delta_max=None)
