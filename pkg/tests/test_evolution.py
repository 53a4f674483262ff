"""Time stepping, energy identities, forcings and weighted norms."""
from __future__ import annotations

import csv

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from microsolids import zoo
from microsolids.blocks import BlockOperator
from microsolids.evolution import (
    EvoProblem,
    SolverError,
    StepSolver,
    antiderivative,
    block_conserved_quantity,
    constant_forcing,
    energy_balance_residual,
    gaussian_pulse,
    run,
    weighted_norm,
    write_energy_csv,
)
from microsolids.grid import Grid
from microsolids.materials import Block, MaterialLaw

SMALL = Grid.unit(3)


def scalar_problem(m0=1.0, m1=0.0, m2=0.0, f=None, T=1.0):
    """One-component ``m0 u' + m1 u + m2 int u = f`` with no spatial operator."""
    spaces = [("u", 1)]
    law = MaterialLaw(
        [Block("u", 0)],
        BlockOperator(spaces, blocks={("u", "u"): m0}),
        BlockOperator(spaces, blocks={("u", "u"): m1} if m1 else {}),
        BlockOperator(spaces, blocks={("u", "u"): m2} if m2 else {}),
    )
    forcing = f or (lambda t: None)
    return EvoProblem(law, BlockOperator(spaces), [Block("u", 0)], None, forcing, T, allow_indefinite_M2=True)


def pulse_problem(name="cosserat", block="v", onset=0.2, T=0.6, grid=SMALL, params=None):
    p = zoo.build(name, params, grid, T=T)
    f = gaussian_pulse(p.layout, grid, block, 0, onset=onset, center=onset + 0.1, width=0.02)
    return p.with_forcing(f, onset)


class TestStepSolver:
    def test_solves(self, rng):
        K = sp.random(50, 50, density=0.1, random_state=3) + 5 * sp.identity(50)
        b = rng.standard_normal(50)
        x = StepSolver(K).solve(b)
        assert np.linalg.norm(K @ x - b) <= 1e-12 * np.linalg.norm(b)

    def test_zero_rhs(self):
        x = StepSolver(sp.identity(4)).solve(np.zeros(4))
        np.testing.assert_array_equal(x, 0.0)

    def test_singular_reported(self):
        K = sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-17]]))
        with pytest.raises((SolverError, RuntimeError)):
            StepSolver(K).solve(np.array([1.0, 0.0]))


class TestScalarOracles:
    def test_oscillator_second_order(self):
        # u' + k int u = 1 gives u = sin(sqrt(k) t) / sqrt(k)
        k = 4.0
        errs = []
        for dt in (0.02, 0.01, 0.005):
            p = scalar_problem(m2=k, f=lambda t: np.ones(1), T=1.0)
            tr = run(p, dt, keep="last")
            errs.append(abs(tr.states[-1][0] - np.sin(2.0) / 2.0))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert rates.min() > 1.95

    def test_rotation_first_order_implicit_euler(self):
        # u' + M1 u = 0 with M1 = [[0, c, 0], [-c, 0, 0], [0, 0, 0]] rotates u(0) = e1
        c = 2.0
        M1 = np.array([[0.0, c, 0.0], [-c, 0.0, 0.0], [0.0, 0.0, 0.0]])
        spaces = [("u", 3)]
        law = MaterialLaw([Block("u", 1)], BlockOperator(spaces, blocks={("u", "u"): np.eye(3)}),
                          BlockOperator(spaces, blocks={("u", "u"): M1}))
        errs = []
        for dt in (0.02, 0.01, 0.005):
            p = EvoProblem(law, BlockOperator(spaces), [Block("u", 1)], None, T=1.0)
            tr = run(p, dt, "implicit_euler", keep="last", U0=np.array([1.0, 0.0, 0.0]))
            errs.append(np.abs(tr.states[-1] - [np.cos(c), np.sin(c), 0.0]).max())
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all((rates > 0.95) & (rates < 1.1))


class TestRunContract:
    def test_zero_forcing_stays_zero(self):
        tr = run(zoo.build("classical", None, SMALL, T=0.1), 0.01)
        assert tr.first_nonzero_time() is None
        np.testing.assert_array_equal(tr.E_total, 0.0)

    def test_horizon_must_be_multiple(self):
        with pytest.raises(ValueError):
            run(zoo.build("classical", None, SMALL, T=0.1), 0.03)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            run(zoo.build("classical", None, SMALL, T=0.1), 0.01, "rk4")

    def test_invalid_problem_refused(self):
        p = zoo.build("classical", {"mu": -1.0}, SMALL, T=0.1, check=False)
        with pytest.raises(ValueError, match="not admissible"):
            run(p, 0.01)

    def test_indefinite_M2_needs_opt_in(self):
        p = scalar_problem(m2=-1.0)
        p.allow_indefinite_M2 = False
        with pytest.raises(ValueError, match="indefinite"):
            run(p, 0.1)

    def test_keep_every(self):
        tr = run(zoo.build("classical", None, SMALL, T=0.1), 0.01, keep=5)
        assert tr.stored == [0, 5, 10]

    def test_observer_called(self):
        seen = []
        run(zoo.build("classical", None, SMALL, T=0.05), 0.01, observer=lambda k, t, U, V: seen.append(k))
        assert seen == list(range(6))

    @pytest.mark.parametrize("scheme", ["midpoint", "implicit_euler"])
    def test_linearity(self, scheme):
        p = pulse_problem(onset=0.0, T=0.2)
        a = run(p, 0.01, scheme, keep="last").states[-1]
        doubled = p.with_forcing(lambda t, f=p.forcing: None if f(t) is None else 2.0 * f(t))
        b = run(doubled, 0.01, scheme, keep="last").states[-1]
        np.testing.assert_allclose(b, 2.0 * a, rtol=1e-12, atol=1e-15)


class TestCausality:
    @pytest.mark.parametrize("scheme", ["midpoint", "implicit_euler"])
    @pytest.mark.parametrize("name,block", [("cosserat", "w"), ("microstretch", "phidot"), ("micromorphic", "psidot")])
    def test_nothing_before_onset(self, scheme, name, block):
        p = pulse_problem(name, block, onset=0.2, T=0.4)
        tr = run(p, 0.01, scheme, keep="all")
        before = [k for k in tr.stored if tr.times[k] < 0.2]
        assert all(np.abs(tr.states[k]).max() == 0.0 for k in before)
        assert tr.first_nonzero_time() >= 0.2


class TestEnergy:
    @pytest.mark.parametrize("name,block", [("cosserat", "v"), ("microstretch", "udot"), ("hemitropic", "w"),
                                            ("micromorphic", "udot")])
    def test_midpoint_balance_exact(self, name, block):
        p = pulse_problem(name, block, onset=0.0, T=0.3)
        tr = run(p, 0.01)
        scale = np.abs(tr.E_total).max()
        assert tr.residual_series().max() <= 1e-12 * scale

    def test_implicit_euler_dissipation_identity(self):
        # E' - E = dt <U', f'> - |U' - U|^2_M0 / 2 - |V' - V|^2_M2 / 2
        p = pulse_problem("microstretch", "udot", onset=0.0, T=0.2)
        tr = run(p, 0.01, "implicit_euler", keep="all")
        M0, M2 = p.matrix("M0"), p.matrix("M2")
        X, Y = tr.state_array(), np.asarray(tr.aux)
        for k in range(tr.steps):
            dU, dV = X[k + 1] - X[k], Y[k + 1] - Y[k]
            loss = 0.5 * dU @ (M0 @ dU) + 0.5 * dV @ (M2 @ dV)
            lhs = tr.E_total[k + 1] - tr.E_total[k] - (tr.work[k + 1] - tr.work[k])
            assert abs(lhs + loss) <= 1e-12 * max(tr.E_total.max(), 1e-30)

    def test_midpoint_conserves_after_pulse(self):
        p = pulse_problem("cosserat", "v", onset=0.0, T=0.5)
        tr = run(p, 0.01)
        k = int(round(0.25 / 0.01))
        E = tr.E_total
        assert np.abs(E[k:] - E[k]).max() <= 1e-12 * E[k]

    def test_residual_window(self):
        p = pulse_problem(onset=0.0, T=0.2)
        tr = run(p, 0.01)
        assert energy_balance_residual(tr, 3, 10) <= 1e-14
        with pytest.raises(ValueError):
            energy_balance_residual(tr, 10, 3)

    def test_block_conserved_quantity(self):
        p = pulse_problem("classical", "v", onset=0.0, T=0.4)
        tr = run(p, 0.005, keep="all")
        q = block_conserved_quantity(p, tr, ["v"], ["T"])
        k = int(round(0.25 / 0.005))
        assert np.abs(q[k:] - q[k]).max() <= 1e-10 * q[k]

    def test_block_conserved_quantity_needs_all_states(self):
        p = pulse_problem("classical", "v", onset=0.0, T=0.1)
        with pytest.raises(ValueError):
            block_conserved_quantity(p, run(p, 0.01), ["v"], ["T"])


class TestForcing:
    def test_pulse_support(self):
        f = gaussian_pulse(zoo.MODELS["classical"].layout, SMALL, "v", 1, onset=0.3, center=0.4, width=0.05)
        assert f(0.2999) is None and f(0.5001) is None
        assert f.support == (0.3, pytest.approx(0.5))
        peak = f(0.4)
        assert peak.shape == (9 * SMALL.nodes,)
        assert np.count_nonzero(peak) == SMALL.nodes
        assert np.all(peak[1 : 3 * SMALL.nodes : 3] > 0)

    def test_pulse_arguments_checked(self):
        layout = zoo.MODELS["classical"].layout
        with pytest.raises(ValueError):
            gaussian_pulse(layout, SMALL, "v", 0, onset=0.5, center=0.4)
        with pytest.raises(ValueError):
            gaussian_pulse(layout, SMALL, "v", 3)
        with pytest.raises(ValueError):
            gaussian_pulse(layout, SMALL, "w")

    def test_constant(self):
        f = constant_forcing(zoo.MODELS["classical"].layout, SMALL, "T", 2, onset=0.1)
        assert f(0.05) is None
        assert np.count_nonzero(f(0.2)) == SMALL.nodes


class TestWeightedNorm:
    def test_indicator_ratio(self):
        for rho in (0.5, 1.0, 2.0):
            t = np.linspace(0.0, 40.0 / rho, 40001)
            phi = np.ones_like(t)
            ratio = weighted_norm(antiderivative(phi, t), t, rho) / weighted_norm(phi, t, rho)
            assert ratio == pytest.approx(1.0 / (np.sqrt(2.0) * rho), rel=1e-4)

    @given(st.floats(0.2, 3.0), st.integers(0, 1000))
    def test_bound(self, rho, seed):
        r = np.random.default_rng(seed)
        dt = 1e-2
        t = np.arange(0.0, 20.0 / rho + dt, dt)
        phi = r.standard_normal() * (t > r.uniform(0, 5)) * (t < r.uniform(5, 10))
        lhs = weighted_norm(antiderivative(phi, t), t, rho)
        assert lhs <= (1.0 + 10 * dt) / rho * weighted_norm(phi, t, rho) + 1e-15

    def test_antiderivative(self):
        t = np.linspace(0, 1, 11)
        np.testing.assert_allclose(antiderivative(np.ones(11), t), t, atol=1e-15)

    def test_rho_positive(self):
        with pytest.raises(ValueError):
            weighted_norm(np.ones(3), np.arange(3.0), 0.0)


class TestEnergyCsv:
    def test_format_and_determinism(self, tmp_path):
        p = pulse_problem(onset=0.0, T=0.1)
        a = write_energy_csv(tmp_path / "a.csv", run(p, 0.01))
        b = write_energy_csv(tmp_path / "b.csv", run(p, 0.01))
        assert a.read_bytes() == b.read_bytes()
        rows = list(csv.reader(a.open()))
        assert rows[0] == ["t", "E_total", "E_M0", "E_M2", "work_integral", "residual"]
        assert len(rows) == 12
        mantissa = rows[5][1].split("e")[0].replace("-", "").replace(".", "")
        assert len(mantissa) == 18  # 17 significant digits after the leading one
