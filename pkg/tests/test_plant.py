import numpy as np
import pytest

from outreg.numerics import eigenvalues, resolvent_norm, spectral_abscissa
from outreg.plant import (
    PerturbationSpec,
    TransferPole,
    build_heat2d,
    heat_stabilizers,
    identity_perturbation,
    perturb,
    restrict_grid,
    transfer,
    transfer_PK,
    transfer_PL,
    transfer_disturbance,
    weighted_symmetry_residual,
)


@pytest.fixture(scope="module")
def heat16():
    return build_heat2d(16)


@pytest.fixture(scope="module")
def gains16(heat16):
    return heat_stabilizers(heat16)


@pytest.fixture(scope="module")
def heat41():
    return build_heat2d(41)


class TestBuildHeat2d:
    def test_state_dimension(self, heat16):
        assert heat16.n == 256
        assert heat16.inputs == 1 and heat16.outputs == 1

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            build_heat2d(3)

    def test_row_sums_zero(self, heat16):
        assert np.max(np.abs(heat16.A.sum(axis=1))) <= 1e-9

    def test_zero_eigenvalue_constant_kernel(self, heat16):
        vals = eigenvalues(heat16.A)
        assert np.min(np.abs(vals)) <= 1e-8
        assert np.max(np.abs(heat16.A @ np.ones(256))) <= 1e-10
        others = vals[np.abs(vals) > 1e-8]
        assert np.all(others.real < 0)
        assert np.max(np.abs(others.imag)) <= 1e-8  # spectrum is real

    def test_quadrature_self_adjointness(self, heat16):
        assert weighted_symmetry_residual(heat16) <= 1e-13

    def test_interior_eigenvalues_match_analytic(self, heat41):
        # Neumann Laplacian on the unit square: eigenvalues -pi^2 (m^2 + q^2)
        vals = np.sort(eigenvalues(heat41.A).real)
        for m in range(0, 3):
            for q in range(0, 3):
                if m == q == 0:
                    continue
                target = -np.pi**2 * (m * m + q * q)
                best = vals[np.argmin(np.abs(vals - target))]
                assert abs(best - target) <= 0.03 * abs(target)


class TestHeatStabilizers:
    def test_K2_is_scaled_quadrature(self, heat16, gains16):
        # quadrature of the constant-1 state is exactly 1 (weights sum to the area)
        assert (gains16.K2 @ np.ones(256))[0] == pytest.approx(-np.pi**2, rel=1e-12)

    def test_L1_entries(self, gains16):
        assert np.allclose(gains16.L1, -np.pi**2)

    def test_stabilized_abscissas(self, heat16, gains16):
        assert spectral_abscissa(heat16.A + heat16.B @ gains16.K2) < -1.0
        assert spectral_abscissa(heat16.A + gains16.L1 @ heat16.C) < -1.0


class TestTransfer:
    def test_matches_one_over_lambda(self, heat16):
        for lam in (1.0, 1j, 2j, 4j):
            P = transfer(heat16, lam)[0, 0]
            assert abs(P - 1.0 / lam) <= 0.02 * abs(1.0 / lam)

    def test_pole_at_zero(self, heat16):
        with pytest.raises(TransferPole):
            transfer(heat16, 0.0)


class TestTransferDisturbance:
    def test_strictly_proper_decay_along_reals(self, heat16):
        vals = [abs(transfer_disturbance(heat16, lam)[0, 0]) for lam in (1.0, 10.0, 100.0)]
        assert np.isfinite(vals).all()
        assert vals[2] < vals[1] < vals[0]

    def test_value_at_one(self, heat16, heat41):
        v16 = transfer_disturbance(heat16, 1.0)[0, 0]
        v41 = transfer_disturbance(heat41, 1.0)[0, 0]
        assert 0.0 < abs(v16) < 1.0
        assert abs(v16 - v41) <= 0.05 * abs(v41)

    def test_high_frequency_bound(self, heat16):
        # regularity bound: |P_d(ik)| <~ 1/k; the fit must not decay slower
        ks = np.arange(4, 21)
        vals = np.array([abs(transfer_disturbance(heat16, 1j * k)[0, 0]) for k in ks])
        slope = np.polyfit(np.log(ks), np.log(vals), 1)[0]
        assert slope <= -0.9
        assert np.max(vals * ks) <= 1.2 * vals[0] * ks[0]


class TestTransferPL:
    def test_matches_closed_form(self, heat16, gains16):
        for lam in (0.0, 1j, 4j):
            PL = transfer_PL(heat16, gains16, lam)[0, 0]
            exact = 1.0 / (lam + np.pi**2)
            assert abs(PL - exact) <= 0.02 * abs(exact)

    def test_pole_detected_near_minus_pi_squared(self, heat16, gains16):
        AL = heat16.A + gains16.L1 @ heat16.C
        lam = eigenvalues(AL)[np.argmax(eigenvalues(AL).real)]
        try:
            val = transfer_PL(heat16, gains16, lam)
            blowup = abs(val[0, 0]) >= 1e6
        except TransferPole:
            blowup = True
        assert blowup
        assert resolvent_norm(AL, lam) >= 1e6


class TestTransferPK:
    def test_finite_at_zero(self, heat16, gains16):
        val = transfer_PK(heat16, gains16, 0.0)[0, 0]
        assert np.isfinite(val)

    def test_consistency_identity(self, heat16, gains16):
        # (I - C R(lam, A) L1) P_L(lam) = P(lam) at a common regular point
        lam = 2j
        R = np.linalg.solve(lam * np.eye(heat16.n) - heat16.A, gains16.L1.astype(complex))
        lhs = (np.eye(1) - heat16.C @ R) @ transfer_PL(heat16, gains16, lam)
        rhs = transfer(heat16, lam)
        assert np.abs(lhs - rhs)[0, 0] <= 1e-8 * abs(rhs[0, 0])

    def test_nonzero_at_exosystem_frequencies(self, heat16, gains16):
        for k in range(1, 11):
            assert abs(transfer_PK(heat16, gains16, 1j * k)[0, 0]) > 1e-6


class TestPerturb:
    def test_identity_is_bitwise_equal(self, heat16):
        q = perturb(heat16, identity_perturbation())
        assert np.array_equal(q.A, heat16.A)
        assert np.array_equal(q.B, heat16.B)
        assert np.array_equal(q.C, heat16.C)

    def test_diffusion_scaling_preserves_structure(self, heat16):
        q = perturb(heat16, PerturbationSpec(label="diffusion", A_scale=1.05))
        assert np.max(np.abs(q.A.sum(axis=1))) <= 1e-9
        assert weighted_symmetry_residual(q) <= 1e-13

    def test_B_scaling_scales_transfer_linearly(self, heat16):
        q = perturb(heat16, PerturbationSpec(label="b-scale", B_scale=0.9))
        assert transfer(q, 1.0)[0, 0] == pytest.approx(0.9 * transfer(heat16, 1.0)[0, 0], rel=1e-12)

    def test_dimension_mismatch_rejected(self, heat16):
        with pytest.raises(ValueError):
            perturb(heat16, PerturbationSpec(B_add=np.ones((2, 2))))


class TestGridConvergence:
    def test_transfer_16_vs_41(self, heat16, heat41):
        for lam in (1.0, 1j, 4j):
            a = transfer(heat16, lam)[0, 0]
            b = transfer(heat41, lam)[0, 0]
            assert abs(a - b) <= 0.05 * abs(b)


class TestRestrictGrid:
    def test_bilinear_functions_exact(self):
        nf, nc = 41, 16
        x = np.linspace(0, 1, nf)
        X, Y = np.meshgrid(x, x, indexing="xy")
        f = 2 * X - 3 * Y + 5 * X * Y + 1.0  # bilinear => restriction exact
        out = restrict_grid(f.reshape(-1), nf, nc)
        xc = np.linspace(0, 1, nc)
        Xc, Yc = np.meshgrid(xc, xc, indexing="xy")
        assert np.allclose(out, (2 * Xc - 3 * Yc + 5 * Xc * Yc + 1.0).reshape(-1), atol=1e-12)
