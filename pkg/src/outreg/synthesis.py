"""Construction of the four internal-model error-feedback controllers.

All variants share the controller state space Z = Z0 x X, where Z0 carries
the internal model: one diagonal block of frequency i*omega_k per exosystem
mode (block size = copies of that frequency).  The variants differ in how
the input directions K1k and the injection blocks G2k are chosen:

    new-structure   K1k from the pseudoinverse of the stabilized transfer
                    P_L(i omega_k); robust for the full perturbation class.
    reduced-im      K1k spans only the forced directions of a prescribed
                    perturbation family; internal-model blocks shrink.
    non-robust      one scalar copy per mode, aimed at the nominal forcing
                    directions only.
    observer        observer copy driven first; G2k prescribed, K1k from
                    P_K(i omega_k); requires square invertible P_K.

Per-mode computations are independent; assembly is a single pass.  All
tie-breaks are deterministic so synthesized controllers are reproducible.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .numerics import opnorm, pseudoinverse
from .plant import (
    TransferPole,
    perturb,
    perturb_exosystem,
    restrict_grid,
    transfer,
    transfer_PK,
    transfer_PL,
    transfer_disturbance,
)

VARIANTS = ("new-structure", "observer", "reduced-im", "non-robust")


class SynthesisPrecondition(RuntimeError):
    """A per-mode solvability assumption fails (e.g. transmission zero at a mode)."""


class SelfCheckFailure(RuntimeError):
    """A construction-time structural identity came out violated."""


@dataclass
class SynthesisParams:
    """Gain-sequence and variant selection knobs.

    gamma_k defaults to gamma0 / (1 + |k|^(1/2 + kappa)); setting `beta`
    switches to the polynomial law |omega_k|^(-beta) (gamma0 at omega = 0).
    `g2_scale` plays the role of the g_{2k} sequence for the observer
    variant; None reuses the gamma law.
    """

    variant: str = "new-structure"
    gamma0: float = 1.0
    kappa: float = 0.125
    beta: float | None = None
    g2_scale: np.ndarray | None = None
    zero_tol: float = 1e-10

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.beta is not None and self.beta <= 0.5:
            raise ValueError("beta must exceed 1/2 for a square-summable gain sequence")

    def gamma_sequence(self, mode_indices, omegas):
        k = np.abs(np.asarray(mode_indices, dtype=float))
        if self.beta is None:
            return self.gamma0 / (1.0 + k ** (0.5 + self.kappa))
        w = np.abs(np.asarray(omegas, dtype=float))
        g = np.full_like(w, self.gamma0)
        nz = w > 0
        g[nz] = w[nz] ** (-self.beta)
        return g


@dataclass
class ControllerRealization:
    """Internal-model controller (G1, G2, K) with its building blocks.

    G1/G2/K are the assembled controller matrices on Z = Z0 x X; the
    im_* fields hold the internal-model blocks, H the coupling operator,
    and K2/L the plant-sized gains entering the assembly.
    """

    variant: str
    omegas: np.ndarray
    block_sizes: np.ndarray
    im_G1: np.ndarray
    im_G2: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    L: np.ndarray
    H: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    K: np.ndarray
    dim_plant: int
    L1: np.ndarray | None = None   # raw stabilizing injection (L = L1 + H G2 for the new structure)
    K21: np.ndarray | None = None  # raw stabilizing feedback (K2 = K21 + K1 H for the observer)
    params: dict = field(default_factory=dict)
    self_checks: dict = field(default_factory=dict)

    @property
    def dim_im(self):
        return self.im_G1.shape[0]

    @property
    def dim(self):
        return self.G1.shape[0]

    def block_slices(self):
        offs = np.concatenate(([0], np.cumsum(self.block_sizes)))
        return [slice(int(offs[i]), int(offs[i + 1])) for i in range(len(self.block_sizes))]


def _im_diagonal(omegas, block_sizes):
    diag = np.concatenate([np.full(pk, 1j * w) for w, pk in zip(omegas, block_sizes)]) \
        if np.sum(block_sizes) else np.zeros(0, dtype=complex)
    return np.diag(diag)


def _phase_fixed_lead_vector(M):
    """Leading right singular vector with its largest entry made real positive."""
    _, _, Vh = np.linalg.svd(M)
    v = Vh[0].conj()
    j = int(np.argmax(np.abs(v)))
    v = v * (v[j].conj() / abs(v[j]))
    return v


def _assemble_new_structure(plant, K2, L, im_G1, im_G2, K1):
    CK = plant.C + plant.D @ K2
    z0 = im_G1.shape[0]
    n = plant.n
    G1 = np.zeros((z0 + n, z0 + n), dtype=complex)
    G1[:z0, :z0] = im_G1
    G1[:z0, z0:] = im_G2 @ CK
    G1[z0:, z0:] = plant.A + plant.B @ K2 + L @ CK
    G2 = np.vstack([im_G2, L]).astype(complex)
    K = np.hstack([K1, -K2]).astype(complex)
    return G1, G2, K


def _new_structure_core(plant, gains, exo, params, block_dirs, resolvent_ctx=None):
    """Shared Steps 3-4 for the new-structure family.

    block_dirs: list of (m x p_k) input-direction blocks K1k per mode
    (possibly empty for omitted modes).
    """
    AL = plant.A + gains.L1 @ plant.C
    BL = plant.B + gains.L1 @ plant.D
    n, p = plant.n, plant.outputs
    omegas = exo.omegas
    block_sizes = np.array([b.shape[1] for b in block_dirs])
    z0 = int(block_sizes.sum())

    K1 = np.zeros((plant.inputs, z0), dtype=complex)
    H = np.zeros((n, z0), dtype=complex)
    G2 = np.zeros((z0, p), dtype=complex)
    off = 0
    for w, K1k in zip(omegas, block_dirs):
        pk = K1k.shape[1]
        if pk == 0:
            continue
        sl = slice(off, off + pk)
        K1[:, sl] = K1k
        PLk = transfer_PL(plant, gains, 1j * w)
        G2[sl, :] = -(PLk @ K1k).conj().T
        if resolvent_ctx is None:
            H[:, sl] = scipy.linalg.solve(1j * w * np.eye(n) - AL, BL @ K1k)
        else:
            fine_plant, fine_gains = resolvent_ctx
            ALf = fine_plant.A + fine_gains.L1 @ fine_plant.C
            BLf = fine_plant.B + fine_gains.L1 @ fine_plant.D
            cols = scipy.linalg.solve(1j * w * np.eye(fine_plant.n) - ALf, BLf @ K1k)
            for c in range(pk):
                H[:, off + c] = restrict_grid(cols[:, c], fine_plant.geometry.n, plant.geometry.n)
        off += pk

    im_G1 = _im_diagonal(omegas, block_sizes)
    L = gains.L1 + H @ G2
    G1, G2full, K = _assemble_new_structure(plant, gains.K2, L, im_G1, G2, K1)

    checks = {
        "adjoint_coupling": opnorm(plant.C @ H + plant.D @ K1 + G2.conj().T)
        / max(opnorm(G2), 1e-300),
        "sylvester": opnorm(H @ im_G1 - AL @ H - BL @ K1)
        / max(opnorm(H) * max(opnorm(im_G1), 1.0), 1e-300),
    }
    strict = resolvent_ctx is None
    if strict and z0 > 0:
        for name, res in checks.items():
            if res > 1e-8:
                raise SelfCheckFailure(f"new-structure self-check '{name}' residual {res:.2e} > 1e-8")
    return ControllerRealization(
        variant=params.variant,
        omegas=omegas.copy(),
        block_sizes=block_sizes,
        im_G1=im_G1,
        im_G2=G2,
        K1=K1,
        K2=gains.K2.astype(complex),
        L=L.astype(complex),
        H=H,
        G1=G1,
        G2=G2full,
        K=K,
        dim_plant=n,
        L1=gains.L1.astype(complex),
        K21=gains.K2.astype(complex),
        params={"gamma0": params.gamma0, "kappa": params.kappa, "beta": params.beta},
        self_checks=checks,
    )


def synth_new_structure(plant, gains, exo, params=None, resolvent_plant=None, resolvent_gains=None):
    """Robust controller from the stabilized-transfer pseudoinverse directions.

    Per mode: K1k = gamma_k * P_L(i w_k)^+ / ||P_L(i w_k)^+||, the coupling
    H solves the per-mode resolvent systems, G2k = -(P_L(i w_k) K1k)^*, and
    L = L1 + H G2.  Construction verifies the adjoint-coupling identity
    C H + D K1 = -G2^* and the Sylvester equation for H to 1e-8 relative.

    An optional finer-grid (resolvent_plant, resolvent_gains) pair is used
    for the H columns, bilinearly restricted to the native grid (strict
    self-checks are then recorded but not enforced).
    """
    params = params or SynthesisParams(variant="new-structure")
    p = plant.outputs
    gammas = params.gamma_sequence(exo.mode_indices, exo.omegas)
    PLvals = [transfer_PL(plant, gains, 1j * w) for w in exo.omegas]
    # surjectivity is judged against the transfer scale over all modes, so a
    # vanishing square P_L (a transmission zero) is caught too
    scale = max(np.linalg.svd(M, compute_uv=False)[0] for M in PLvals)
    block_dirs = []
    for idx, PLk in enumerate(PLvals):
        s = np.linalg.svd(PLk, compute_uv=False)
        if p > PLk.shape[1] or s[p - 1] <= params.zero_tol * scale:
            raise SynthesisPrecondition(
                f"P_L(i*omega) loses surjectivity at mode k={exo.mode_indices[idx]} "
                f"(omega={exo.omegas[idx]:.6g}): transmission-zero collision"
            )
        Pp = pseudoinverse(PLk)
        block_dirs.append(gammas[idx] * Pp / opnorm(Pp))
    ctx = (resolvent_plant, resolvent_gains) if resolvent_plant is not None else None
    return _new_structure_core(plant, gains, exo, params, block_dirs, resolvent_ctx=ctx)


def synth_reduced_im(plant, gains, exo, perturbation_family, params=None):
    """Controller whose internal model covers only a prescribed perturbation family.

    Per mode, the forced input directions P~(i w_k)^{-1} (P~_d E~ phi_k +
    F~ phi_k) are collected over the family and orthonormalized (pivot
    order by descending column norm, rank tolerance 1e-10 relative); the
    block size p_k = dim of that span, capped at dim Y.  Modes with empty
    span are omitted from the internal model.
    """
    params = params or SynthesisParams(variant="reduced-im")
    p, m = plant.outputs, plant.inputs
    gammas = params.gamma_sequence(exo.mode_indices, exo.omegas)

    # per family member: transfer values and forced directions at every mode
    member_P = []
    member_y = []
    for fam_idx, spec in enumerate(perturbation_family):
        pplant = perturb(plant, spec)
        pexo = perturb_exosystem(exo, spec)
        Pvals, yvals = [], []
        for idx, w in enumerate(exo.omegas):
            try:
                Pvals.append(transfer(pplant, 1j * w))
                yvals.append(transfer_disturbance(pplant, 1j * w) @ pexo.E[:, idx] + pexo.F[:, idx])
            except TransferPole as exc:
                raise SynthesisPrecondition(
                    f"family member {fam_idx} ({spec.label}): i*omega in spectrum at mode "
                    f"k={exo.mode_indices[idx]}"
                ) from exc
        scale = max(np.linalg.svd(M, compute_uv=False)[0] for M in Pvals)
        for idx, Pk in enumerate(Pvals):
            s = np.linalg.svd(Pk, compute_uv=False)
            if Pk.shape[0] != Pk.shape[1] or s[-1] <= params.zero_tol * scale:
                raise SynthesisPrecondition(
                    f"family member {fam_idx} ({spec.label}): P~(i*omega) singular at mode "
                    f"k={exo.mode_indices[idx]}"
                )
        member_P.append(Pvals)
        member_y.append(yvals)

    block_dirs = []
    for idx, w in enumerate(exo.omegas):
        cols = [np.linalg.solve(member_P[f][idx], member_y[f][idx])
                for f in range(len(perturbation_family))]
        Q = _orthonormal_span(np.array(cols).T, tol=params.zero_tol) if cols else np.zeros((m, 0))
        pk = Q.shape[1]
        if pk >= p:
            Pinv = np.linalg.inv(transfer(plant, 1j * w))
            block_dirs.append(gammas[idx] * Pinv / opnorm(Pinv))
        else:
            block_dirs.append(gammas[idx] * Q)
    return _new_structure_core(plant, gains, exo, params, block_dirs)


def _orthonormal_span(V, tol=1e-10):
    """Rank-revealing orthonormal basis; pivoted Gram-Schmidt by column norm."""
    if V.size == 0:
        return np.zeros((V.shape[0], 0), dtype=complex)
    V = V.astype(complex).copy()
    norms0 = np.linalg.norm(V, axis=0)
    scale = norms0.max()
    if scale == 0:
        return np.zeros((V.shape[0], 0), dtype=complex)
    basis = []
    remaining = list(range(V.shape[1]))
    while remaining:
        norms = np.linalg.norm(V[:, remaining], axis=0)
        j = int(np.argmax(norms))
        if norms[j] <= tol * scale:
            break
        q = V[:, remaining[j]] / norms[j]
        jmax = int(np.argmax(np.abs(q)))
        q = q * (q[jmax].conj() / abs(q[jmax]))
        basis.append(q)
        remaining.pop(j)
        for idx in remaining:
            V[:, idx] -= q * (q.conj() @ V[:, idx])
    return np.array(basis).T if basis else np.zeros((V.shape[0], 0), dtype=complex)


def synth_nonrobust(plant, gains, exo, params=None):
    """Output-regulating controller without the robustness requirement.

    One scalar internal-model copy per mode.  Where the nominal forcing
    y_k = P_d(i w_k) E phi_k + F phi_k is nonzero, the input direction
    solves P(i w_k) u_k = y_k (least squares, range-membership enforced);
    where it vanishes, u_k is the deterministic leading right singular
    vector of the stabilized transfer.  Modes with i*omega_k in the
    spectrum of A are admitted only with vanishing forcing.
    """
    params = params or SynthesisParams(variant="non-robust")
    m = plant.inputs
    gammas = params.gamma_sequence(exo.mode_indices, exo.omegas)
    # global forcing scale for the y_k = 0 test
    fscale = max(float(np.max(np.abs(exo.E))) if exo.E.size else 0.0,
                 float(np.max(np.abs(exo.F))) if exo.F.size else 0.0, 1.0)
    block_dirs = []
    for idx, w in enumerate(exo.omegas):
        k = exo.mode_indices[idx]
        forcing_norm = float(np.linalg.norm(exo.E[:, idx]) + np.linalg.norm(exo.F[:, idx]))
        try:
            Pk = transfer(plant, 1j * w)
            in_spectrum = False
        except TransferPole:
            in_spectrum = True
        if in_spectrum:
            if forcing_norm > 1e-12 * fscale:
                raise SynthesisPrecondition(
                    f"untrackable mode k={k}: i*omega in spectrum of A with nonzero forcing"
                )
            u = _phase_fixed_lead_vector(transfer_PL(plant, gains, 1j * w))
        else:
            yk = transfer_disturbance(plant, 1j * w) @ exo.E[:, idx] + exo.F[:, idx]
            if np.linalg.norm(yk) <= 1e-12 * fscale:
                u = _phase_fixed_lead_vector(Pk)
            else:
                u = pseudoinverse(Pk) @ yk
                res = np.linalg.norm(Pk @ u - yk) / np.linalg.norm(yk)
                if res > 1e-8:
                    raise SynthesisPrecondition(
                        f"untrackable mode k={k}: forcing outside range(P(i*omega)) "
                        f"(residual {res:.2e})"
                    )
        block_dirs.append((gammas[idx] * u / np.linalg.norm(u)).reshape(m, 1))
    return _new_structure_core(plant, gains, exo, params, block_dirs)


def synth_observer_based(plant, gains, exo, params=None):
    """Observer-based robust controller (requires square invertible P_K).

    G2k = g_{2k} I_Y, the coupling rows H_k = G2k (C + D K21) R(i w_k,
    A + B K21), K1k = -(G2k P_K(i w_k))^*, and the plant-sized gain is
    K2 = K21 + K1 H.  Construction verifies H B + G2 D = -K1^* and the
    Sylvester identity G1 H = H (A + B K21) + G2 (C + D K21) to 1e-8.
    """
    params = params or SynthesisParams(variant="observer")
    n, p, m = plant.n, plant.outputs, plant.inputs
    if p != m:
        raise SynthesisPrecondition(
            "observer-based construction needs matching input and output dimensions"
        )
    K21 = gains.K2
    L = gains.L1
    AK = plant.A + plant.B @ K21
    CK = plant.C + plant.D @ K21
    omegas = exo.omegas
    g2 = params.g2_scale
    if g2 is None:
        g2 = params.gamma_sequence(exo.mode_indices, omegas)
    g2 = np.asarray(g2, dtype=complex).reshape(len(omegas))
    if np.any(g2 == 0):
        raise SynthesisPrecondition("g2 sequence must be nonzero at every mode")

    block_sizes = np.full(len(omegas), p)
    z0 = int(block_sizes.sum())
    H = np.zeros((z0, n), dtype=complex)
    K1 = np.zeros((m, z0), dtype=complex)
    G2 = np.zeros((z0, p), dtype=complex)
    PKvals = [transfer_PK(plant, gains, 1j * w) for w in omegas]
    scale = max(np.linalg.svd(M, compute_uv=False)[0] for M in PKvals)
    off = 0
    for idx, w in enumerate(omegas):
        PKk = PKvals[idx]
        s = np.linalg.svd(PKk, compute_uv=False)
        if s[-1] <= params.zero_tol * scale:
            raise SynthesisPrecondition(
                f"P_K(i*omega) singular at mode k={exo.mode_indices[idx]} (omega={w:.6g})"
            )
        sl = slice(off, off + p)
        G2k = g2[idx] * np.eye(p)
        G2[sl, :] = G2k
        # H_k = G2k (C + D K21) R(i w_k, A + B K21): solve the adjoint system
        RHS = CK.conj().T.astype(complex)
        Yk = scipy.linalg.solve((1j * w * np.eye(n) - AK).conj().T, RHS)
        H[sl, :] = G2k @ Yk.conj().T
        K1[:, sl] = -(G2k @ PKk).conj().T
        off += p

    im_G1 = _im_diagonal(omegas, block_sizes)
    K2full = K21 + K1 @ H
    CKfull = plant.C + plant.D @ K2full
    G1 = np.zeros((z0 + n, z0 + n), dtype=complex)
    G1[:z0, :z0] = im_G1
    G1[z0:, :z0] = (plant.B + L @ plant.D) @ K1
    G1[z0:, z0:] = plant.A + plant.B @ K2full + L @ CKfull
    G2full = np.vstack([G2, -L]).astype(complex)
    K = np.hstack([K1, K2full]).astype(complex)

    checks = {
        "adjoint_coupling": opnorm(H @ plant.B + G2 @ plant.D + K1.conj().T)
        / max(opnorm(K1), 1e-300),
        "sylvester": opnorm(im_G1 @ H - H @ AK - G2 @ CK)
        / max(opnorm(H) * max(opnorm(im_G1), 1.0), 1e-300),
    }
    for name, res in checks.items():
        if res > 1e-8:
            raise SelfCheckFailure(f"observer self-check '{name}' residual {res:.2e} > 1e-8")
    return ControllerRealization(
        variant="observer",
        omegas=omegas.copy(),
        block_sizes=block_sizes,
        im_G1=im_G1,
        im_G2=G2,
        K1=K1,
        K2=K2full.astype(complex),
        L=L.astype(complex),
        H=H,
        G1=G1,
        G2=G2full,
        K=K,
        dim_plant=n,
        L1=L.astype(complex),
        K21=K21.astype(complex),
        params={"gamma0": params.gamma0, "kappa": params.kappa, "beta": params.beta,
                "g2_custom": params.g2_scale is not None},
        self_checks=checks,
    )


def check_mode_invertibility(plant, gains, exo, which="PL", zero_tol=1e-10):
    """Per-mode surjectivity report for P, P_L, or P_K at the exosystem frequencies.

    Returns a list of dicts {k, omega, defined, sigma_min, sigma_max,
    invertible}; modes where the transfer itself is undefined (frequency in
    the spectrum of the relevant state matrix) are flagged with
    defined=False.
    """
    evaluators = {
        "P": lambda w: transfer(plant, 1j * w),
        "PL": lambda w: transfer_PL(plant, gains, 1j * w),
        "PK": lambda w: transfer_PK(plant, gains, 1j * w),
    }
    if which not in evaluators:
        raise ValueError(f"which must be one of {tuple(evaluators)}")
    rows = []
    for idx, w in enumerate(exo.omegas):
        entry = {"k": int(exo.mode_indices[idx]), "omega": float(w)}
        try:
            M = evaluators[which](w)
        except TransferPole:
            entry.update(defined=False, sigma_min=0.0, sigma_max=np.inf,
                         surjective_shape=False, invertible=False)
            rows.append(entry)
            continue
        s = np.linalg.svd(M, compute_uv=False)
        entry.update(
            defined=True,
            sigma_min=float(s[-1]),
            sigma_max=float(s[0]),
            surjective_shape=bool(M.shape[0] <= M.shape[1]),
        )
        rows.append(entry)
    # flag against the transfer scale over all (defined) modes, so vanishing
    # square transfers are caught
    scale = max((r["sigma_max"] for r in rows if r["defined"]), default=0.0)
    for r in rows:
        if r["defined"]:
            r["invertible"] = bool(r["surjective_shape"] and r["sigma_min"] > zero_tol * scale)
    return rows
