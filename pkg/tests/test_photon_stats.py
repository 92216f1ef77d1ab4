import math

import numpy as np
import pytest
from scipy import integrate

from decoyrate.model import (
    CoarseGrained,
    GaussianWindow,
    IntensitySet,
    IntensitySetting,
    TruncatedGaussian,
)
from decoyrate.photon_stats import (
    TruncGaussPn,
    coarse_bounds,
    coarse_photon_bounds,
    coarse_tau,
    coarse_tau_table,
    default_n_trunc,
    general_tau,
    poisson_pmf,
    trunc_gauss_photon_bounds,
    trunc_gauss_pn,
    trunc_gauss_tau_table,
)

IIISET = IntensitySet(
    settings=(
        IntensitySetting("mu", 0.48, 0.999),
        IntensitySetting("nu", 0.1, 0.0005),
        IntensitySetting("omega", 1e-4, 0.0005),
    ),
    signal="mu",
)


class TestCoarseBounds:
    def test_delta_zero_bounds_coincide(self):
        row = coarse_bounds(0.48, 0.0, 10)
        assert row.p_low[1] == pytest.approx(0.48 * math.exp(-0.48), abs=1e-15)
        assert row.p_up[1] == row.p_low[1]

    def test_upper_single_photon(self):
        # direct evaluation of the closed form: 0.4848 e^{-0.4848}
        row = coarse_bounds(0.48, 0.01, 10)
        assert row.p_up[1] == pytest.approx(0.4848 * math.exp(-0.4848), abs=1e-15)
        assert row.p_up[1] == pytest.approx(0.29855, abs=5e-5)

    def test_lower_vacuum(self):
        row = coarse_bounds(0.1, 0.01, 10)
        assert row.p_low[0] == pytest.approx(math.exp(-0.101), abs=1e-15)
        assert row.p_low[0] == pytest.approx(0.90393, abs=5e-6)

    def test_bounds_sandwich_poisson(self):
        for a in (0.48, 0.1, 1e-4):
            row = coarse_bounds(a, 0.01, 10)
            for n in range(11):
                p = poisson_pmf(n, a)
                assert row.p_low[n] <= p <= row.p_up[n]
                if n <= 3 and a > 1e-3:
                    assert row.p_low[n] < p < row.p_up[n]

    def test_mass_normalisation(self):
        row = coarse_bounds(0.48, 0.01, 200)
        assert sum(row.p_low) <= 1.0 + 1e-12
        assert sum(row.p_up) >= 1.0 - 1e-12

    def test_tail_bound_covers_true_tail(self):
        row = coarse_bounds(0.48, 0.01, 10)
        true_tail = 1.0 - sum(poisson_pmf(n, 0.48) for n in range(11))
        assert row.tail_mass_ub >= true_tail
        assert row.tail_U >= row.tail_mass_ub - 1e-15

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            coarse_bounds(-0.1, 0.01, 10)
        with pytest.raises(ValueError):
            coarse_bounds(0.5, 1.0, 10)


class TestCoarseTau:
    def test_no_deviation_gives_full_overlap(self):
        for a, b, n, xi in ((0.48, 0.1, 0, 1), (0.48, 1e-4, 3, 3), (0.1, 1e-4, 7, 2)):
            assert coarse_tau(a, b, n, xi, IIISET, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_independent_expression(self):
        # single-expression transcription, evaluated independently of the library
        d = 0.01
        pairs = [(s.intensity, s.probability) for s in IIISET.settings]
        bracket = 1.0 - sum(
            p * (math.exp(-c * (1 - d)) - math.exp(-c * (1 + d))) for c, p in pairs
        )
        a, b = 0.48, 0.1
        am, ap, bm, bp = a * (1 - d), a * (1 + d), b * (1 - d), b * (1 + d)
        expected0 = math.exp(am + bm - (ap + bp)) * bracket**2
        expected1 = math.exp(ap + bp - (am + bm)) * ((am * bm) / (ap * bp)) * bracket**2
        assert coarse_tau(a, b, 0, 1, IIISET, d) == pytest.approx(expected0, rel=1e-14)
        assert coarse_tau(a, b, 1, 1, IIISET, d) == pytest.approx(expected1, rel=1e-14)

    def test_range_scaling(self):
        d = 0.01
        pairs = [(s.intensity, s.probability) for s in IIISET.settings]
        bracket = 1.0 - sum(
            p * (math.exp(-c * (1 - d)) - math.exp(-c * (1 + d))) for c, p in pairs
        )
        t1 = coarse_tau(0.48, 0.1, 0, 1, IIISET, d)
        t3 = coarse_tau(0.48, 0.1, 0, 3, IIISET, d)
        assert t3 / t1 == pytest.approx(bracket**4, rel=1e-12)

    def test_symmetry(self):
        for n in (0, 1, 5):
            assert coarse_tau(0.48, 0.1, n, 1, IIISET, 0.01) == pytest.approx(
                coarse_tau(0.1, 0.48, n, 1, IIISET, 0.01), rel=1e-15
            )

    def test_non_increasing_in_delta(self):
        deltas = (0.0, 1e-4, 1e-3, 1e-2)
        for n in (0, 1, 4):
            taus = [coarse_tau(0.48, 0.1, n, 1, IIISET, d) for d in deltas]
            assert all(b <= a + 1e-15 for a, b in zip(taus, taus[1:]))
            assert all(0.0 <= t <= 1.0 for t in taus)

    def test_table_layout(self):
        spec = CoarseGrained(delta_max=0.01, xi=1)
        table = coarse_tau_table(IIISET, spec, 10)
        assert len(table.values) == 6 * 11
        assert table.tau("mu", "nu", 0) == pytest.approx(
            coarse_tau(0.48, 0.1, 0, 1, IIISET, 0.01), rel=1e-15
        )


class TestTruncGaussPn:
    def test_point_mass_limit(self):
        m = 0.37
        w = GaussianWindow(mean=m, std=1e-9, lower=m - 1e-6, upper=m + 1e-6)
        for n in (0, 1, 2, 5):
            lo, hi = trunc_gauss_pn(w, n)
            target = poisson_pmf(n, m)
            assert lo <= hi
            assert abs(lo - target) < 1e-6
            assert abs(hi - target) < 1e-6

    def test_normalisation_bracket(self):
        w = GaussianWindow(mean=0.48, std=0.01, lower=0.45, upper=0.51)
        lows = sum(trunc_gauss_pn(w, n)[0] for n in range(201))
        highs = sum(trunc_gauss_pn(w, n)[1] for n in range(201))
        assert lows <= 1.0 <= highs

    def test_rectangle_rule_oracle(self):
        # brute-force midpoint rule on one million cells
        w = GaussianWindow(mean=0.48, std=0.01, lower=0.45, upper=0.51)
        n = 1
        alpha = np.linspace(w.lower, w.upper, 1_000_001)
        mid = 0.5 * (alpha[1:] + alpha[:-1])
        norm = 0.5 * (
            math.erf((w.upper - w.mean) / (w.std * math.sqrt(2)))
            - math.erf((w.lower - w.mean) / (w.std * math.sqrt(2)))
        )
        dens = np.exp(-0.5 * ((mid - w.mean) / w.std) ** 2) / (
            w.std * math.sqrt(2 * math.pi) * norm
        )
        pois = np.exp(-mid) * mid**n
        oracle = float(np.sum(dens * pois) * (alpha[1] - alpha[0]))
        lo, hi = trunc_gauss_pn(w, n)
        assert abs(0.5 * (lo + hi) - oracle) < 1e-8
        assert lo - 1e-8 <= oracle <= hi + 1e-8

    def test_bracket_is_tight(self):
        w = GaussianWindow(mean=0.1, std=0.002, lower=0.09, upper=0.11)
        for n in range(6):
            lo, hi = trunc_gauss_pn(w, n)
            assert 0.0 <= lo <= hi
            assert hi - lo <= 1e-9

    def test_rejects_small_node_counts(self):
        w = GaussianWindow(mean=0.1, std=0.002, lower=0.09, upper=0.11)
        with pytest.raises(ValueError):
            trunc_gauss_pn(w, 0, quad_nodes=4)


def two_intensity_table():
    intens = IntensitySet(
        settings=(IntensitySetting("a", 0.4, 0.7), IntensitySetting("b", 0.1, 0.3)),
        signal="a",
    )
    table = {}
    means = {"a": 0.4, "b": 0.1}
    shifts = {"a": 1.002, "b": 0.997}
    for h in ("a", "b"):
        for cur in ("a", "b"):
            m = means[cur] * shifts[h]
            s = 0.01 * m + 1e-5
            table[((h,), cur)] = GaussianWindow(m, s, m - 4 * s, m + 4 * s)
    return intens, TruncatedGaussian(xi=1, table=table)


class TestGeneralTau:
    def test_identical_parameters_give_unity(self):
        intens = IIISET
        table = {}
        for h in intens.labels:
            for s in intens.settings:
                table[((h,), s.label)] = GaussianWindow(0.3, 0.01, 0.26, 0.34)
        spec = TruncatedGaussian(xi=1, table=table)
        pn = TruncGaussPn(spec)
        tau = general_tau(
            ("mu", "mu"), ("mu", "nu"), 1, intens, pn, 40,
            params_key=pn.window_of,
        )
        assert abs(tau - 1.0) <= 2e-9

    def test_point_mass_matches_coarse_delta_zero(self):
        intens = IIISET
        table = {}
        for h in intens.labels:
            for s in intens.settings:
                table[((h,), s.label)] = GaussianWindow(
                    s.intensity, 1e-9, s.intensity - 1e-6, s.intensity + 1e-6
                )
        spec = TruncatedGaussian(xi=1, table=table)
        pn = TruncGaussPn(spec)
        tau = general_tau(
            ("nu", "mu"), ("nu", "nu"), 1, intens, pn, 40, params_key=pn.window_of
        )
        # coarse model at delta = 0 has tau = 1 exactly
        assert abs(tau - coarse_tau(0.48, 0.1, 1, 1, intens, 0.0)) <= 2e-9

    def test_term_by_term_transcription_oracle(self):
        intens, spec = two_intensity_table()
        pn = TruncGaussPn(spec)
        n_trunc = default_n_trunc(spec)

        def exact_pn(window_labels, n):
            w = spec.window(window_labels[:-1], window_labels[-1])
            norm = 0.5 * (
                math.erf((w.upper - w.mean) / (w.std * math.sqrt(2)))
                - math.erf((w.lower - w.mean) / (w.std * math.sqrt(2)))
            )

            def integrand(alpha):
                dens = math.exp(-0.5 * ((alpha - w.mean) / w.std) ** 2) / (
                    w.std * math.sqrt(2 * math.pi) * norm
                )
                return dens * math.exp(-alpha + n * math.log(alpha) - math.lgamma(n + 1))

            value, _ = integrate.quad(integrand, w.lower, w.upper, epsabs=1e-13)
            return value

        # direct transcription: sum over futures of the per-round overlap
        expected = 0.0
        for f in ("a", "b"):
            p_f = intens.probability(f)
            bc = sum(
                math.sqrt(exact_pn(("a", f), n) * exact_pn(("b", f), n))
                for n in range(n_trunc + 1)
            )
            expected += p_f * bc
        expected = min(expected, 1.0) ** 2

        tau = general_tau(("x", "a"), ("x", "b"), 1, intens, lambda wl, n: pn((wl[0], wl[1]), n), n_trunc)
        assert tau == pytest.approx(expected, abs=1e-6)
        assert 0.0 <= tau <= 1.0

    def test_requires_common_history(self):
        intens, spec = two_intensity_table()
        pn = TruncGaussPn(spec)
        with pytest.raises(ValueError):
            general_tau(("a", "a"), ("b", "b"), 1, intens, pn, 20)
        with pytest.raises(ValueError):
            general_tau(("a", "a"), ("a", "a"), 1, intens, pn, 20)

    def test_table_builder_bounds_and_layout(self):
        intens, spec = two_intensity_table()
        bounds = trunc_gauss_photon_bounds(intens, spec, 5)
        assert set(k[0] for k in bounds.rows) == {"a", "b"}
        for row in bounds.rows.values():
            for lo, hi in zip(row.p_low, row.p_up):
                assert 0.0 <= lo <= hi <= 1.0
        taus = trunc_gauss_tau_table(intens, spec, 5)
        # per history (2) x ordered pairs (2) x n (6)
        assert len(taus.values) == 2 * 2 * 6
        for v in taus.values.values():
            assert 0.0 <= v <= 1.0
