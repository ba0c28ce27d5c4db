"""End-to-end checks on the saturation example: simulation, region, certificate and fit agree"""

import math

import numpy as np
import pytest

import cli
from conftest import FEASIBLE_POINTS, REFERENCE_POINT
from history_core import History
from jump_system import simulate, simulate_ensemble
from lyapunov import (
    HistorySampler,
    check_theorem1,
    eval_LV,
    feasible_region,
    lift_to_W,
    omega_bounds,
    sat_candidate,
    sat_sup_term,
    unit_grid,
)
from markov_chain import substream
from moments import MomentCurve, emss_check, fit_decay
from sat_example import SatSystemSpec, build_sat_system, certify_sat

REGION_PAIRS = [(5.2, 1.0), (5.2, 1.2), (math.e, 1.0), (math.e, 1.2)]


@pytest.fixture(scope="module")
def reference_ensemble():
    sys_ = build_sat_system(SatSystemSpec(**REFERENCE_POINT))
    return simulate_ensemble(sys_, History.constant(2, 1.0), horizon=60, n_runs=1000, seed=7)


@pytest.fixture(scope="module")
def regions():
    grid = unit_grid(200)
    return {(c, gamma): feasible_region(gamma, c, grid, grid) for c, gamma in REGION_PAIRS}


def feasible_point_setup(gamma, c, p, q):
    sys_ = build_sat_system(SatSystemSpec(gamma=gamma, p=p, q=q, c=c))
    row = feasible_region(gamma, c, [p], [q]).iloc[0]
    assert row["feasible"]
    ratio = float(row["lambda_ratio"])
    return sys_, ratio, omega_bounds(p, q, 1.0, ratio, gamma, c)


class TestReferenceEnsemble:
    def test_mean_square_decays(self, reference_ensemble):
        assert reference_ensemble.mean_sq[60] < 1e-3
        fit = fit_decay(reference_ensemble.to_moment_curve(1.0))
        assert fit.zeta_hat < 1.0

    def test_certificate_dominates_ensemble(self, reference_ensemble):
        assert not certify_sat(SatSystemSpec(**REFERENCE_POINT)).has_certificate
        report = certify_sat(SatSystemSpec(c=5.2, **REFERENCE_POINT))
        assert report.has_certificate
        assert report.zeta < 1.0
        curve = reference_ensemble.to_moment_curve(1.0)
        assert emss_check(curve, report.M, report.zeta, 1.0).passed


class TestRegionConsistency:
    @pytest.mark.slow
    @pytest.mark.parametrize("c, gamma", REGION_PAIRS)
    def test_feasible_cells_have_positive_omegas(self, regions, c, gamma):
        region = regions[(c, gamma)]
        feasible = region[region["feasible"]]
        assert len(feasible) > 0
        assert (feasible["omega1"] > 0).all()
        assert (feasible["omega2"] > 0).all()

    @pytest.mark.slow
    @pytest.mark.parametrize("c, gamma", REGION_PAIRS)
    def test_boundary_cells_have_no_witness(self, regions, c, gamma):
        region = regions[(c, gamma)]
        mask = region["feasible"].to_numpy().reshape(200, 200)
        neighbour = np.zeros_like(mask)
        neighbour[1:, :] |= mask[:-1, :]
        neighbour[:-1, :] |= mask[1:, :]
        neighbour[:, 1:] |= mask[:, :-1]
        neighbour[:, :-1] |= mask[:, 1:]
        candidates = np.flatnonzero((neighbour & ~mask).ravel())
        assert candidates.size > 0
        chosen = np.random.default_rng(0).choice(candidates, size=min(100, candidates.size), replace=False)

        for index in chosen:
            cell = region.iloc[int(index)]
            endpoints = [v for v in (cell["L_B"], cell["U_B"]) if np.isfinite(v)]
            ratios = [r for v in endpoints for r in (v - 1e-9, v + 1e-9) if r > 0] or [1.0]
            for ratio in ratios:
                bounds = omega_bounds(cell["p"], cell["q"], 1.0, ratio, gamma, c)
                assert min(bounds.omega1, bounds.omega2) <= 0.0


class TestRegionTrends:
    @staticmethod
    def aggregates(region):
        feasible = region[region["feasible"]]
        return len(feasible), feasible["q"].max(), (1.0 - feasible["p"]).max()

    @pytest.mark.slow
    @pytest.mark.parametrize("gamma", [1.0, 1.2])
    def test_larger_c_trades_q_for_one_minus_p(self, regions, gamma):
        _, max_q_e, max_1p_e = self.aggregates(regions[(math.e, gamma)])
        _, max_q_52, max_1p_52 = self.aggregates(regions[(5.2, gamma)])
        assert max_q_52 < max_q_e
        assert max_1p_52 > max_1p_e

    @pytest.mark.slow
    @pytest.mark.parametrize("c", [math.e, 5.2])
    def test_larger_gamma_shrinks_region(self, regions, c):
        count_1, _, _ = self.aggregates(regions[(c, 1.0)])
        count_12, _, _ = self.aggregates(regions[(c, 1.2)])
        assert count_12 < count_1


def enumerate_LV(V, sys_, gamma, phi, i):
    """Build both successor histories slot by slot and weight by row i"""
    delay = sys_.chain.bijection.inverse(i)[0]
    values = phi.values.ravel()
    current, delayed = values[-1], values[-1 - delay]
    nxt = float(np.clip(current, -1, 1) - gamma * np.clip(delayed, -1, 1))
    successor = History.from_slots(list(values[1:]) + [nxt])
    total = 0.0
    for j in range(1, sys_.s + 1):
        total += sys_.chain.tpm.p(i, j) * V(successor, j)
    return total - V(phi, i)


class TestLVEquivalence:
    def test_matches_enumeration(self):
        gamma, c, p, q = FEASIBLE_POINTS[0]
        sys_ = build_sat_system(SatSystemSpec(gamma=gamma, p=p, q=q))
        V = sat_candidate(1.0, 7.5, gamma, c)
        rng = np.random.default_rng(17)
        for _ in range(1000):
            phi = History.from_slots(rng.uniform(-3.0, 3.0, size=3))
            i = int(rng.integers(1, 3))
            assert eval_LV(V, sys_, phi, i) == pytest.approx(enumerate_LV(V, sys_, gamma, phi, i), abs=1e-12)


class TestDecreaseInequalities:
    @pytest.mark.slow
    @pytest.mark.parametrize("gamma, c, p, q", FEASIBLE_POINTS)
    def test_LV_below_omega_sup_term(self, gamma, c, p, q):
        sys_, ratio, bounds = feasible_point_setup(gamma, c, p, q)
        assert bounds.omega1 > 0 and bounds.omega2 > 0
        V = sat_candidate(1.0, ratio, gamma, c)
        omegas = (bounds.omega1, bounds.omega2)
        violations = 0
        for _, phi in HistorySampler(2, radius=10.0, seed=3).samples(10_000):
            sup_term = sat_sup_term(phi, gamma, c)
            for mode in (1, 2):
                if eval_LV(V, sys_, phi, mode) > -omegas[mode - 1] * sup_term + 1e-9:
                    violations += 1
        assert violations == 0

    @pytest.mark.slow
    @pytest.mark.parametrize("gamma, c, p, q", FEASIBLE_POINTS)
    def test_lifted_functional_conditions(self, gamma, c, p, q):
        sys_, ratio, bounds = feasible_point_setup(gamma, c, p, q)
        V = sat_candidate(1.0, ratio, gamma, c)
        sampler = HistorySampler(2, radius=10.0, seed=4)
        base = check_theorem1(V, sys_, bounds.alpha3, sampler, 10_000)
        assert base.verdict == "pass"

        W = lift_to_W(V, bounds.alpha3, 2)
        lifted = check_theorem1(W, sys_, W.beta3, sampler, 10_000, decay_on="history")
        assert lifted.verdict == "pass"
        assert W.beta1 == V.alpha1
        assert W.beta2 == pytest.approx(V.alpha2 + bounds.alpha3)


class TestInstabilityWitness:
    def test_locked_delayed_mode_does_not_decay(self, locked_system):
        sys_ = locked_system(gamma=1.2)
        trajectory = simulate(sys_, History.constant(2, 0.1), 2, 200, substream(0, 0))
        assert np.min(np.abs(trajectory.states[100:201, 0])) > 1e-3


def output_tree(root):
    """Relative path -> bytes for every file written under root"""
    return {
        path.relative_to(root).as_posix(): path.read_bytes()
        for path in sorted(root.rglob("*")) if path.is_file()
    }


class TestDeterminism:
    SIMULATE = ["simulate", "--gamma", "1.2", "--p", "0.95", "--q", "0.01", "--runs", "300", "--horizon", "40",
                "--seed", "7", "--dump-runs", "2", "--gnuplot"]
    CERTIFY = ["certify", "--gamma", "1.2", "--p", "0.95", "--q", "0.01", "--c", "5.2"]

    @pytest.fixture
    def fit_inputs(self, tmp_path):
        inputs = tmp_path / "inputs"
        assert cli.main(self.SIMULATE + ["--out-dir", str(inputs / "sim")]) == 0
        assert cli.main(self.CERTIFY + ["--out-dir", str(inputs / "cert")]) == 0
        return ["fit", "--curve", str(inputs / "sim" / "ensemble.csv"),
                "--certificate", str(inputs / "cert" / "certificate.json")]

    @pytest.mark.parametrize("command", ["simulate", "region", "certify", "fit"])
    def test_threads_and_reruns_byte_identical(self, request, tmp_path, command):
        args = {
            "simulate": lambda: self.SIMULATE,
            "region": lambda: ["region", "--gamma", "1", "--c", "e", "--grid", "50", "--gnuplot"],
            "certify": lambda: self.CERTIFY,
            "fit": lambda: request.getfixturevalue("fit_inputs"),
        }[command]()
        trees = []
        for name, threads in (("a", "1"), ("b", "1"), ("c", "8")):
            out = tmp_path / name
            assert cli.main(args + ["--threads", threads, "--out-dir", str(out)]) == 0
            trees.append(output_tree(out))
        assert "manifest.json" in trees[0]
        assert len(trees[0]) > 1
        assert trees[0] == trees[1] == trees[2]


class TestFitRecovery:
    def test_exact_geometric_curve(self):
        curve = MomentCurve(4.0 * 0.5 ** np.arange(61), np.zeros(61))
        fit = fit_decay(curve)
        assert fit.M_hat == pytest.approx(4.0, abs=1e-9)
        assert fit.zeta_hat == pytest.approx(0.5, abs=1e-9)
