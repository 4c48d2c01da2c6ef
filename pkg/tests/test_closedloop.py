import dataclasses

import numpy as np
import pytest

from outreg.closedloop import (
    DecaySamples,
    Trajectory,
    assemble,
    error_metrics,
    expanded_form,
    similarity_transform,
    similarity_triangularization,
    simulate,
    write_boundary_csv,
    write_decay_csv,
    write_trajectory_csv,
)
from outreg.exosystem import build_periodic, exo_state, heat_example_profiles
from outreg.numerics import integrate_trajectory, opnorm, spectral_abscissa
from outreg.plant import build_heat2d, heat_stabilizers
from outreg.synthesis import (
    ControllerRealization,
    SynthesisParams,
    synth_new_structure,
    synth_observer_based,
)

from testbeds import scalar_toy_plant, zero_gains


@pytest.fixture(scope="module")
def heat_setup():
    plant = build_heat2d(16)
    gains = heat_stabilizers(plant)
    exo = heat_example_profiles(10)
    ctrl = synth_new_structure(plant, gains, exo, SynthesisParams(gamma0=12.0, kappa=0.125))
    cl = assemble(plant, ctrl, exo)
    return plant, gains, exo, ctrl, cl


@pytest.fixture(scope="module")
def toy_setup():
    plant = scalar_toy_plant()
    exo = build_periodic(2 * np.pi, 0)
    ctrl = synth_new_structure(plant, zero_gains(plant), exo, SynthesisParams(gamma0=1.0))
    cl = assemble(plant, ctrl, exo)
    return plant, exo, ctrl, cl


def zero_gain_controller(plant, exo):
    z0 = exo.dim
    n = plant.n
    p, m = plant.outputs, plant.inputs
    im_G1 = np.diag(1j * exo.omegas.astype(complex))
    zeros = lambda *s: np.zeros(s, dtype=complex)
    G1 = np.zeros((z0 + n, z0 + n), dtype=complex)
    G1[:z0, :z0] = im_G1
    G1[z0:, z0:] = plant.A
    return ControllerRealization(
        variant="new-structure",
        omegas=exo.omegas.copy(),
        block_sizes=np.ones(exo.dim, dtype=int),
        im_G1=im_G1,
        im_G2=zeros(z0, p),
        K1=zeros(m, z0),
        K2=zeros(m, n),
        L=zeros(n, p),
        H=zeros(n, z0),
        G1=G1,
        G2=zeros(z0 + n, p),
        K=zeros(m, z0 + n),
        dim_plant=n,
        L1=zeros(n, p),
        K21=zeros(m, n),
    )


class TestAssemble:
    def test_zero_gains_block_diagonal(self):
        plant = scalar_toy_plant()
        exo = build_periodic(2 * np.pi, 1)
        cl = assemble(plant, zero_gain_controller(plant, exo), exo)
        n = plant.n
        assert np.allclose(cl.Ae[:n, n:], 0.0)
        assert np.allclose(cl.Ae[n:, :n], 0.0)

    def test_heat_dimension(self, heat_setup):
        *_, cl = heat_setup
        assert cl.dim == 256 + 21 + 256 == 533
        assert cl.blocks["plant"] == slice(0, 256)
        assert cl.blocks["internal_model"] == slice(256, 277)
        assert cl.blocks["observer_copy"] == slice(277, 533)

    def test_scalar_toy_hand_oracle(self, toy_setup):
        _, _, _, cl = toy_setup
        expected = np.array([
            [-1.0, 1.0, 0.0],
            [-1.0, 0.0, -1.0],
            [-1.0, 0.0, -2.0],
        ])
        assert np.allclose(cl.Ae, expected, atol=1e-14)

    def test_expanded_form_consistency(self, heat_setup):
        plant, _, exo, ctrl, cl = heat_setup
        res = opnorm(cl.Ae - expanded_form(plant, ctrl)) / opnorm(cl.Ae)
        assert res <= 1e-12

    def test_De_equals_F(self, heat_setup):
        _, _, exo, _, cl = heat_setup
        assert np.array_equal(cl.De, exo.F.astype(complex))

    def test_dimension_mismatch_names_blocks(self, heat_setup):
        plant, _, exo, ctrl, _ = heat_setup
        other = build_heat2d(8)
        with pytest.raises(ValueError, match="dimension"):
            assemble(other, ctrl, exo)


class TestSimilarityTriangularization:
    def test_zero_blocks_vanish(self, heat_setup):
        ctrl, cl = heat_setup[3], heat_setup[4]
        rep = similarity_triangularization(cl, ctrl)
        assert rep["relative_zero_residual"] <= 1e-8
        assert rep["involution_residual"] <= 1e-12
        assert rep["diag_abscissas"]["plant_block"] < -1.0
        assert rep["diag_abscissas"]["observer_block"] < -1.0
        assert rep["diag_abscissas"]["internal_model_block"] < 0.0

    def test_corrupted_H_detected_and_scales_linearly(self, heat_setup):
        plant, _, exo, ctrl, cl = heat_setup
        rng = np.random.default_rng(3)
        noise = rng.standard_normal(ctrl.H.shape)
        noise /= opnorm(noise)
        residuals = []
        for eps in (1e-3, 2e-3):
            bad = dataclasses.replace(ctrl, H=ctrl.H + eps * noise)
            rep = similarity_triangularization(cl, bad)
            residuals.append(rep["relative_zero_residual"])
        assert residuals[0] >= 1e-4
        assert residuals[1] / residuals[0] == pytest.approx(2.0, rel=0.2)

    def test_observer_variant_triangularizes(self, heat_setup):
        plant, gains, exo, *_ = heat_setup
        ctrl = synth_observer_based(plant, gains, exo,
                                    SynthesisParams(variant="observer", gamma0=12.0, kappa=0.125))
        cl = assemble(plant, ctrl, exo)
        rep = similarity_triangularization(cl, ctrl)
        assert rep["relative_zero_residual"] <= 1e-8
        assert rep["involution_residual"] <= 1e-12


class TestSimulate:
    def test_zero_data_zero_trajectory(self, toy_setup):
        _, exo, _, cl = toy_setup
        traj = simulate(cl, exo, T=3.0, dt=1e-2)
        assert np.max(traj.e_norm) == 0.0
        assert np.max(np.abs(traj.y)) == 0.0

    def test_bounded_on_stable_loop(self, heat_setup):
        exo, cl = heat_setup[2], heat_setup[4]
        traj = simulate(cl, exo, T=2.0, dt=5e-3)
        assert np.isfinite(traj.e_norm).all()
        assert np.max(traj.e_norm) < 1e3

    def test_superposition(self, toy_setup):
        plant, exo0, ctrl, cl = toy_setup
        exo = build_periodic(2 * np.pi, 0)
        exo.v0[:] = 0.7
        exo.E[0, 0] = 1.3
        exo.F[0, 0] = -0.4
        cl = assemble(plant, ctrl, exo)
        xe0 = np.array([0.5, -0.2, 0.1], dtype=complex)
        both = simulate(cl, exo, xe0=xe0, T=4.0, dt=1e-2)
        only_x = simulate(cl, dataclasses.replace(exo, v0=np.zeros(1, dtype=complex)), xe0=xe0, T=4.0, dt=1e-2)
        only_v = simulate(cl, exo, xe0=None, T=4.0, dt=1e-2)
        gap = np.max(np.abs(both.y - only_x.y - only_v.y))
        assert gap <= 1e-10

    def test_matches_generic_integrator(self, toy_setup):
        plant, _, ctrl, _ = toy_setup
        exo = build_periodic(2 * np.pi, 0)
        exo.v0[:] = 1.0
        exo.E[0, 0] = 0.5
        exo.F[0, 0] = 0.25
        cl = assemble(plant, ctrl, exo)
        xe0 = np.array([0.1, 0.2, -0.3], dtype=complex)
        traj = simulate(cl, exo, xe0=xe0, T=2.0, dt=1e-2, snapshot_stride=1)
        f = lambda s: cl.Be @ exo_state(exo, s)
        _, X = integrate_trajectory(cl.Ae, f, xe0, T=2.0, dt=1e-2)
        assert np.max(np.abs(X - traj.snapshots)) <= 1e-10

    def test_definitional_error_identity(self, heat_setup):
        _, _, exo, _, cl = heat_setup
        traj = simulate(cl, exo, T=1.0, dt=5e-3, snapshot_stride=20)
        for j, ts in enumerate(traj.snapshot_t):
            v = exo_state(exo, ts)
            e_def = cl.Ce @ traj.snapshots[:, j] + cl.De @ v
            jt = int(round(ts / traj.dt))
            assert np.max(np.abs(e_def - traj.e[:, jt])) <= 1e-12 * max(1.0, np.max(traj.e_norm))

    def test_heat_run_real_valued(self, heat_setup):
        _, _, exo, _, cl = heat_setup
        traj = simulate(cl, exo, T=1.0, dt=5e-3)
        assert traj.max_imag_residue <= 1e-8
        assert traj.real_valued


class TestErrorMetrics:
    def fake_traj(self, fn, T=20.0, dt=1e-3):
        t = dt * np.arange(int(round(T / dt)) + 1)
        e = fn(t)[None, :]
        return Trajectory(
            t=t, y=e, y_ref=np.zeros_like(e), e=e, u=np.zeros_like(e),
            e_norm=np.abs(e[0]), snapshot_t=t[:1], snapshots=np.zeros((1, 1)),
            max_imag_residue=0.0, dt=dt,
        )

    def test_zero_error(self):
        dec = error_metrics(self.fake_traj(lambda t: np.zeros_like(t)))
        assert np.all(dec.I == 0.0)

    def test_exponential_closed_form(self):
        dec = error_metrics(self.fake_traj(lambda t: np.exp(-t)))
        expected = np.exp(-dec.t) * (1 - np.exp(-1.0))
        assert np.max(np.abs(dec.I - expected)) <= 1e-6

    def test_stride(self):
        dec = error_metrics(self.fake_traj(lambda t: np.ones_like(t), T=3.0, dt=1e-3))
        assert dec.t[1] - dec.t[0] == pytest.approx(0.1)

    def test_short_horizon_rejected(self):
        with pytest.raises(ValueError):
            error_metrics(self.fake_traj(lambda t: np.ones_like(t), T=1.5, dt=1e-3))

    def test_heat_error_integrals_decay_tenfold(self, heat_setup):
        _, _, exo, _, cl = heat_setup
        traj = simulate(cl, exo, T=12 * np.pi, dt=2e-3)
        dec = error_metrics(traj)
        I_pi = dec.I[np.argmin(np.abs(dec.t - np.pi))]
        I_10pi = dec.I[np.argmin(np.abs(dec.t - 10 * np.pi))]
        assert I_pi / I_10pi >= 10.0


class TestCsvWriters:
    def test_round_trip(self, toy_setup, tmp_path):
        plant, exo, ctrl, cl = toy_setup
        exo = build_periodic(2 * np.pi, 0)
        exo.v0[:] = 1.0
        exo.F[0, 0] = 0.5
        cl = assemble(plant, ctrl, exo)
        traj = simulate(cl, exo, T=3.0, dt=1e-2)
        dec = error_metrics(traj)
        tpath = tmp_path / "traj.csv"
        dpath = tmp_path / "dec.csv"
        write_trajectory_csv(traj, tpath)
        write_decay_csv(dec, dpath)
        data = np.genfromtxt(tpath, delimiter=",", names=True)
        assert set(data.dtype.names) == {"t", "y", "y_ref", "e_norm", "u"}
        assert np.allclose(data["t"], traj.t)
        assert np.allclose(data["y"], traj.y[0].real, atol=1e-14)
        ddata = np.genfromtxt(dpath, delimiter=",", names=True)
        assert set(ddata.dtype.names) == {"t", "I"}

    def test_boundary_surface(self, heat_setup, tmp_path):
        plant, _, exo, _, cl = heat_setup
        traj = simulate(cl, exo, T=1.0, dt=1e-2, snapshot_stride=10)
        path = tmp_path / "gamma3.csv"
        write_boundary_csv(traj, plant.geometry, path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert len(data.dtype.names) == 1 + plant.geometry.n
