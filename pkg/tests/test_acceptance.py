"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.

Three gates (AC-2, AC-6, AC-8) pin thresholds stricter than what the
modeled system measurably does in their parameter windows (see README,
"Acceptance status"); they are kept strict and fail with the measured
values in the message.  They carry the `strict_gate` marker, so
`pytest -m "not strict_gate"` runs the attainable subset.
"""

import dataclasses

import numpy as np
import pytest
import scipy.linalg

from outreg.analysis import (
    fit_decay,
    fit_growth,
    im_norm_identity,
    regulator_residuals,
    resolvent_scan,
    robustness_suite,
)
from outreg.closedloop import assemble, error_metrics, similarity_triangularization, simulate
from outreg.exosystem import build_periodic, heat_example_profiles
from outreg.numerics import opnorm, spectral_abscissa
from outreg.plant import PerturbationSpec, build_heat2d, heat_stabilizers, transfer, transfer_PL
from outreg.synthesis import (
    SynthesisParams,
    synth_new_structure,
    synth_nonrobust,
    synth_observer_based,
    synth_reduced_im,
)

from testbeds import diagonal_decay_plant, mimo_exo, mimo_plant, zero_gains

GAMMA0 = 12.0
KAPPA = 0.125


def verdict(name, ok, detail):
    line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def heat():
    plant = build_heat2d(16)
    gains = heat_stabilizers(plant)
    exo = heat_example_profiles(10)
    return plant, gains, exo


@pytest.fixture(scope="module")
def heat_new(heat):
    plant, gains, exo = heat
    return synth_new_structure(plant, gains, exo, SynthesisParams(gamma0=GAMMA0, kappa=KAPPA))


@pytest.fixture(scope="module")
def heat_observer(heat):
    plant, gains, exo = heat
    return synth_observer_based(
        plant, gains, exo, SynthesisParams(variant="observer", gamma0=GAMMA0, kappa=KAPPA)
    )


@pytest.fixture(scope="module")
def heat_loop(heat, heat_new):
    plant, _, exo = heat
    return assemble(plant, heat_new, exo)


@pytest.fixture(scope="module")
def heat_decay(heat, heat_loop):
    _, _, exo = heat
    traj = simulate(heat_loop, exo, T=12 * np.pi, dt=1e-3)
    return error_metrics(traj)


def test_ac1_stability(heat, heat_new, heat_observer):
    plant, _, exo = heat
    a_new = spectral_abscissa(assemble(plant, heat_new, exo).Ae)
    a_obs = spectral_abscissa(assemble(plant, heat_observer, exo).Ae)
    verdict("AC-1", a_new < 0 and a_obs < 0,
            f"spectral abscissas: new structure {a_new:.5g}, observer {a_obs:.5g}")


@pytest.mark.strict_gate
def test_ac2_tracking(heat_decay):
    dec = heat_decay
    I_pi = dec.I[np.argmin(np.abs(dec.t - np.pi))]
    I_10pi = dec.I[np.argmin(np.abs(dec.t - 10 * np.pi))]
    ratio = I_10pi / I_pi
    verdict("AC-2", ratio <= 0.05,
            f"I(10pi)/I(pi) = {ratio:.4f} (gate 0.05; I(pi)={I_pi:.4f}, I(10pi)={I_10pi:.5f})")


def test_ac3_synthesis_formula_fidelity(heat_new):
    worst = 0.0
    for k in range(-10, 11):
        idx = k + 10
        K1_exact = GAMMA0 / (1 + abs(k) ** (0.5 + KAPPA)) * (1j * k + np.pi**2) / np.sqrt(k**2 + np.pi**4)
        G2_exact = -GAMMA0 / ((1 + abs(k) ** (0.5 + KAPPA)) * np.sqrt(k**2 + np.pi**4))
        worst = max(worst,
                    abs(heat_new.K1[0, idx] - K1_exact) / abs(K1_exact),
                    abs(heat_new.im_G2[idx, 0] - G2_exact) / abs(G2_exact))
    verdict("AC-3", worst <= 0.02, f"worst relative gap to the closed forms: {worst:.2e}")


def test_ac4_transfer_fidelity(heat):
    plant, gains, _ = heat
    worst_P = max(abs(transfer(plant, lam)[0, 0] - 1.0 / lam) / abs(1.0 / lam)
                  for lam in (1.0, 1j, 2j, 4j))
    worst_PL = max(abs(transfer_PL(plant, gains, lam)[0, 0] - 1.0 / (lam + np.pi**2))
                   / abs(1.0 / (lam + np.pi**2)) for lam in (0.0, 1j, 4j))
    verdict("AC-4", worst_P <= 0.02 and worst_PL <= 0.02,
            f"max relative errors: P {worst_P:.2e}, P_L {worst_PL:.2e}")


def test_ac5_exact_identity_suite(heat, heat_new, heat_observer, heat_loop):
    plant, _, exo = heat
    # 100 seeded random internal models
    worst_rand = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(1, 9))
        p = int(rng.integers(1, 4))
        omegas = np.arange(-N, N + 1).astype(float) * (1.0 + rng.random())
        G1 = np.diag(np.repeat(1j * omegas, p))
        blocks = []
        for _ in range(2 * N + 1):
            while True:
                B = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
                if np.linalg.cond(B) < 100:
                    break
            blocks.append(0.5 * B)
        rows = im_norm_identity(G1, np.vstack(blocks), omegas)
        worst_rand = max(worst_rand, max(r["deviation"] for r in rows))
    rows = im_norm_identity(heat_new.im_G1, heat_new.im_G2, heat_new.omegas, heat_new.block_sizes)
    worst_heat = max(r["deviation"] for r in rows)

    checks = dict(heat_new.self_checks)
    checks.update({f"observer_{k}": v for k, v in heat_observer.self_checks.items()})
    worst_self = max(checks.values())

    tri = similarity_triangularization(heat_loop, heat_new)
    obs_loop = assemble(plant, heat_observer, exo)
    tri_obs = similarity_triangularization(obs_loop, heat_observer)
    worst_tri = max(tri["relative_zero_residual"], tri_obs["relative_zero_residual"])

    ok = worst_rand <= 1e-8 and worst_heat <= 1e-8 and worst_self <= 1e-8 and worst_tri <= 1e-8
    verdict("AC-5", ok,
            f"norm-identity deviation {max(worst_rand, worst_heat):.2e} (100 random + heat), "
            f"self-check residuals {worst_self:.2e}, triangular zero-blocks {worst_tri:.2e}")


@pytest.mark.strict_gate
def test_ac6_decay_rate_law():
    # bounded-operator testbed: diagonal plant a_j = -1/(1+j), unit couplings
    # => ||P_L(i w)^+|| ~ |w| (alpha0 = 1); gain law beta = 1/2 + kappa;
    # effective alpha = 2 (alpha0 + beta) = 3.25
    alpha = 2.0 * (1.0 + 0.5 + KAPPA)
    plant = diagonal_decay_plant(J=12, feedthrough=False)
    exo = build_periodic(2 * np.pi, 16)
    ctrl = synth_new_structure(plant, zero_gains(plant), exo,
                               SynthesisParams(gamma0=1.0, kappa=KAPPA, beta=0.5 + KAPPA))
    cl = assemble(plant, ctrl, exo)
    y = np.zeros(cl.dim, dtype=complex)
    y[plant.n:plant.n + exo.dim] = (1.0 + np.abs(exo.mode_indices)) ** -0.51
    xe0 = scipy.linalg.solve(cl.Ae, y)  # smooth data: ||Ae xe0|| = ||y|| bounded
    traj = simulate(cl, exo, xe0=xe0, T=210.0, dt=2e-3)
    fit = fit_decay(error_metrics(traj), (10.0, 200.0), alpha=alpha)
    target = -1.0 / alpha
    verdict("AC-6", abs(fit.slope_loglog - target) <= 0.25 * abs(target),
            f"log-log slope over [10,200] = {fit.slope_loglog:.4f}, target {target:.4f} +-25% "
            f"(r2 = {fit.r2:.3f})")


def test_ac6_supplementary_bound_respected():
    # the one-sided content of the decay theorem: the error integrals decay
    # at least as fast as t^(-1/alpha)
    alpha = 2.0 * (1.0 + 0.5 + KAPPA)
    plant = diagonal_decay_plant(J=12, feedthrough=False)
    exo = build_periodic(2 * np.pi, 16)
    ctrl = synth_new_structure(plant, zero_gains(plant), exo,
                               SynthesisParams(gamma0=1.0, kappa=KAPPA, beta=0.5 + KAPPA))
    cl = assemble(plant, ctrl, exo)
    y = np.zeros(cl.dim, dtype=complex)
    y[plant.n:plant.n + exo.dim] = (1.0 + np.abs(exo.mode_indices)) ** -0.51
    xe0 = scipy.linalg.solve(cl.Ae, y)
    traj = simulate(cl, exo, xe0=xe0, T=210.0, dt=2e-3)
    fit = fit_decay(error_metrics(traj), (10.0, 200.0), alpha=alpha)
    ok = fit.slope_loglog <= -1.0 / alpha * 0.75
    verdict("AC-6s", ok,
            f"measured slope {fit.slope_loglog:.4f} respects the t^(-1/alpha) bound "
            f"(-1/alpha = {-1/alpha:.4f}); envelope constant {fit.envelope_constant:.3g}")


def test_ac7_regulation_constraint(heat, heat_new, heat_observer):
    plant, gains, exo = heat
    nonrob = synth_nonrobust(plant, gains, exo,
                             SynthesisParams(variant="non-robust", gamma0=GAMMA0, kappa=KAPPA))
    worst_nominal = 0.0
    for ctrl in (heat_new, heat_observer, nonrob):
        sol = regulator_residuals(assemble(plant, ctrl, exo), exo)
        worst_nominal = max(worst_nominal, sol.max_relative_residual)

    # reduced-order internal model needs every i*omega_k off the spectrum of A
    # (the heat plant has 0 in its spectrum), so its nominal check runs on the
    # two-output synthetic plant; the robust/non-robust split likewise needs
    # dim Y >= 2 to be visible.
    mplant = mimo_plant()
    mexo = mimo_exo(N=2)
    mgains = zero_gains(mplant)
    from outreg.plant import identity_perturbation, perturb
    roim = synth_reduced_im(mplant, mgains, mexo, [identity_perturbation()],
                            SynthesisParams(variant="reduced-im", gamma0=1.0))
    sol = regulator_residuals(assemble(mplant, roim, mexo), mexo)
    worst_nominal = max(worst_nominal, sol.max_relative_residual)

    mrob = synth_new_structure(mplant, mgains, mexo, SynthesisParams(gamma0=1.0))
    mnon = synth_nonrobust(mplant, mgains, mexo, SynthesisParams(variant="non-robust", gamma0=1.0))
    pert = perturb(mplant, PerturbationSpec(label="B x 1.1", B_scale=1.1))
    res_non = regulator_residuals(assemble(pert, mnon, mexo), mexo).max_relative_residual
    res_rob = regulator_residuals(assemble(pert, mrob, mexo), mexo).max_relative_residual

    ok = worst_nominal <= 1e-8 and res_non >= 1e-3 and res_rob <= 1e-6
    verdict("AC-7", ok,
            f"nominal residual {worst_nominal:.2e} (4 variants); perturbed split: "
            f"non-robust {res_non:.2e} vs robust {res_rob:.2e}")


@pytest.mark.strict_gate
def test_ac8_resolvent_growth(heat_loop):
    ks = np.arange(3, 11, dtype=float)
    peaks = resolvent_scan(heat_loop.Ae, ks)
    fit = fit_growth(ks, peaks)
    target = 3.0 + 2.0 * KAPPA
    verdict("AC-8", abs(fit.exponent - target) <= 0.5,
            f"fitted peak exponent over k=3..10: {fit.exponent:.3f}, target {target} +-0.5 "
            f"(peaks {peaks[0]:.0f}..{peaks[-1]:.0f})")


def test_ac8_supplementary_asymptotic_law():
    # the stabilized internal model alone, far beyond the truncation window,
    # shows the k^(3+2 kappa) law of the resolvent peaks
    k = np.arange(-120, 121)
    g2 = -GAMMA0 / ((1 + np.abs(k) ** (0.5 + KAPPA)) * np.sqrt(k**2 + np.pi**4))
    S = np.diag(1j * k.astype(complex)) - np.outer(g2, g2.conj())
    ks = np.arange(20, 101, 5, dtype=float)
    fit = fit_growth(ks, resolvent_scan(S, ks))
    target = 3.0 + 2.0 * KAPPA
    verdict("AC-8s", abs(fit.exponent - target) <= 0.5,
            f"internal-model peak exponent over k=20..100: {fit.exponent:.3f}, target {target} +-0.5")


def test_ac9_robustness_suite(heat, heat_new):
    plant, _, exo = heat
    specs = [
        PerturbationSpec(label="diffusion x 0.95", A_scale=0.95),
        PerturbationSpec(label="diffusion x 1.05", A_scale=1.05),
        PerturbationSpec(label="B x 0.9", B_scale=0.9),
        PerturbationSpec(label="B x 1.1", B_scale=1.1),
    ]
    reports = robustness_suite(plant, heat_new, exo, specs, T=12 * np.pi, dt=1e-3)
    ok = all(r["stable"] and r["error_ratio"] <= 0.1 for r in reports)
    detail = "; ".join(f"{r['label']}: abscissa {r['abscissa']:.4f}, ratio {r['error_ratio']:.4f}"
                       for r in reports)
    verdict("AC-9", ok, detail)
