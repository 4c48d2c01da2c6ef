"""Closed-loop assembly, simulation, and regulation-error metrics.

The composite system on X x Z is

    Ae = [[A,      B K   ],      Be = [[Bd E],     Ce = [C, D K],   De = F,
          [G2 C,   G1 + G2 D K]]       [G2 F]]

driven by the exosystem state v(t); the regulation error is
e(t) = Ce x_e(t) + De v(t).  Simulation uses the implicit trapezoidal
scheme with the per-step factorization computed once; the exosystem
forcing is evaluated exactly at every step endpoint.
"""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exosystem import exo_state, reference_signal
from .numerics import opnorm, spectral_abscissa

FLOAT_FMT = "%.15g"


@dataclass
class ClosedLoopModel:
    Ae: np.ndarray
    Be: np.ndarray
    Ce: np.ndarray
    De: np.ndarray
    blocks: dict
    variant: str
    controller_K: np.ndarray
    dim_plant: int

    @property
    def dim(self):
        return self.Ae.shape[0]


@dataclass
class Trajectory:
    """Time samples of the closed-loop run.

    y, y_ref, e, u are complex-valued sample arrays (channels x steps);
    for conjugate-symmetric profiles their imaginary parts vanish up to
    `max_imag_residue`.  Full-state snapshots are kept every
    `snapshot_stride` steps.
    """

    t: np.ndarray
    y: np.ndarray
    y_ref: np.ndarray
    e: np.ndarray
    u: np.ndarray
    e_norm: np.ndarray
    snapshot_t: np.ndarray
    snapshots: np.ndarray
    max_imag_residue: float
    dt: float

    @property
    def real_valued(self):
        return self.max_imag_residue <= 1e-8


@dataclass
class DecaySamples:
    t: np.ndarray
    I: np.ndarray
    window: float = 1.0


def assemble(plant, controller, exo):
    """Compose plant, controller, and exosystem maps into the closed loop.

    For every variant the 2x2 block formula above is used; it is verified
    against the variant's expanded three-block form (plant, internal
    model, observer copy) to 1e-12 relative, which exercises the exact
    cancellation structure of the controller couplings.
    """
    n = plant.n
    if controller.dim_plant != n:
        raise ValueError(
            f"controller was synthesized for plant dimension {controller.dim_plant}, got {n}"
        )
    if plant.outputs != exo.F.shape[0] or plant.Bd.shape[1] != exo.E.shape[0]:
        raise ValueError("exosystem E/F dimensions do not match plant disturbance/output")
    zdim = controller.dim
    K = controller.K
    G2 = controller.G2
    Ae = np.zeros((n + zdim, n + zdim), dtype=complex)
    Ae[:n, :n] = plant.A
    Ae[:n, n:] = plant.B @ K
    Ae[n:, :n] = G2 @ plant.C
    Ae[n:, n:] = controller.G1 + G2 @ plant.D @ K
    Be = np.vstack([plant.Bd @ exo.E, G2 @ exo.F])
    Ce = np.hstack([plant.C, plant.D @ K]).astype(complex)
    De = exo.F.astype(complex)

    z0 = controller.dim_im
    blocks = {
        "plant": slice(0, n),
        "internal_model": slice(n, n + z0),
        "observer_copy": slice(n + z0, n + zdim),
    }
    cl = ClosedLoopModel(
        Ae=Ae, Be=Be, Ce=Ce, De=De, blocks=blocks,
        variant=controller.variant, controller_K=K, dim_plant=n,
    )
    expanded = expanded_form(plant, controller)
    res = opnorm(Ae - expanded) / max(opnorm(Ae), 1e-300)
    if res > 1e-12:
        raise RuntimeError(f"block-form consistency check failed (relative residual {res:.2e})")
    return cl


def expanded_form(plant, controller):
    """The three-block (plant, internal-model, observer-copy) form of Ae.

    The controller-internal couplings come from the stored controller
    blocks (which embed the nominal plant), while the loop couplings use
    the given plant, so the expansion is exact also when the plant passed
    in is a perturbed one.
    """
    n, z0 = controller.dim_plant, controller.dim_im
    A, B, C, D = plant.A, plant.B, plant.C, plant.D
    G1i, G2i = controller.im_G1, controller.im_G2
    K1, K2, L = controller.K1, controller.K2, controller.L
    Ae = np.zeros((n + z0 + n, n + z0 + n), dtype=complex)
    sx = slice(0, n)
    sz = slice(n, n + z0)
    s1 = slice(n + z0, n + z0 + n)
    if controller.variant == "observer":
        Ae[sx, sx] = A
        Ae[sx, sz] = B @ K1
        Ae[sx, s1] = B @ K2
        Ae[sz, sx] = G2i @ C
        Ae[sz, sz] = G1i + G2i @ D @ K1
        Ae[sz, s1] = G2i @ D @ K2
        Ae[s1, sx] = -L @ C
        Ae[s1, sz] = controller.G1[z0:, :z0] - L @ D @ K1
        Ae[s1, s1] = controller.G1[z0:, z0:] - L @ D @ K2
    else:
        Ae[sx, sx] = A
        Ae[sx, sz] = B @ K1
        Ae[sx, s1] = -B @ K2
        Ae[sz, sx] = G2i @ C
        Ae[sz, sz] = G1i + G2i @ D @ K1
        Ae[sz, s1] = controller.G1[:z0, z0:] - G2i @ D @ K2
        Ae[s1, sx] = L @ C
        Ae[s1, sz] = L @ D @ K1
        Ae[s1, s1] = controller.G1[z0:, z0:] - L @ D @ K2
    return Ae


def similarity_transform(controller):
    """The involutive block transform that triangularizes the closed loop."""
    n, z0 = controller.dim_plant, controller.dim_im
    In = np.eye(n)
    Q = np.zeros((2 * n + z0, 2 * n + z0), dtype=complex)
    sx = slice(0, n)
    sz = slice(n, n + z0)
    s1 = slice(n + z0, None)
    if controller.variant == "observer":
        Q[sx, sx] = -In
        Q[sz, sx] = controller.H  # H maps X -> Z0
        Q[sz, sz] = np.eye(z0)
        Q[s1, sx] = -In
        Q[s1, s1] = In
    else:
        Q[sx, sx] = In
        Q[sz, sz] = np.eye(z0)
        Q[s1, sx] = -In
        Q[s1, sz] = controller.H  # H maps Z0 -> X
        Q[s1, s1] = -In
    return Q


def similarity_triangularization(cl, controller):
    """Residuals of the block-triangular similarity of the closed loop.

    Transforms Ae with the variant's involution Q and reports the norms of
    the three blocks that vanish for a correctly synthesized controller,
    together with the spectral abscissas of the diagonal blocks
    (stabilized plant, stabilized internal model, stabilized observer
    copy) and the involution residual ||Q Q - I||.
    """
    n, z0 = controller.dim_plant, controller.dim_im
    Q = similarity_transform(controller)
    Ahat = Q @ cl.Ae @ Q
    sx = slice(0, n)
    sz = slice(n, n + z0)
    s1 = slice(n + z0, None)
    scale = opnorm(cl.Ae)
    return {
        "zero_block_norms": {
            "im_from_plant": opnorm(Ahat[sz, sx]),
            "copy_from_plant": opnorm(Ahat[s1, sx]),
            "copy_from_im": opnorm(Ahat[s1, sz]),
        },
        "relative_zero_residual": max(
            opnorm(Ahat[sz, sx]), opnorm(Ahat[s1, sx]), opnorm(Ahat[s1, sz])
        ) / max(scale, 1e-300),
        "diag_abscissas": {
            "plant_block": spectral_abscissa(Ahat[sx, sx]),
            "internal_model_block": spectral_abscissa(Ahat[sz, sz]),
            "observer_block": spectral_abscissa(Ahat[s1, s1]),
        },
        "involution_residual": opnorm(Q @ Q - np.eye(Q.shape[0])),
        "ae_norm": scale,
    }


def simulate(cl, exo, xe0=None, T=10.0, dt=1e-3, snapshot_stride=None):
    """Propagate the closed loop with exact exosystem forcing.

    Implicit trapezoidal stepping; the factorization of (I - dt/2 Ae) and
    the one-step propagator are formed once.  Outputs y, y_ref, e, u are
    recorded every step, the full state every `snapshot_stride` steps
    (default: every 0.1 s worth of steps).

    Returns a Trajectory.
    """
    dim = cl.dim
    n = cl.dim_plant
    if xe0 is None:
        xe0 = np.zeros(dim, dtype=complex)
    xe0 = np.asarray(xe0, dtype=complex).reshape(dim)
    nt = int(round(T / dt))
    if nt < 1:
        raise ValueError("horizon shorter than one step")
    if snapshot_stride is None:
        snapshot_stride = max(1, int(round(0.1 / dt)))
    t = dt * np.arange(nt + 1)

    I = np.eye(dim)
    lu = scipy.linalg.lu_factor(I - (dt / 2.0) * cl.Ae)
    diag = np.abs(np.diag(lu[0]))
    if np.any(diag <= 1e-14 * max(1.0, float(diag.max()))):
        raise RuntimeError("step size resonance: I - dt/2*Ae is singular; halve dt")
    G = scipy.linalg.lu_solve(lu, I + (dt / 2.0) * cl.Ae)
    W = scipy.linalg.lu_solve(lu, (dt / 2.0) * cl.Be)

    V = exo_state(exo, t)  # (modes, nt+1), exact phases
    p = cl.Ce.shape[0]
    m = cl.controller_K.shape[0]
    y = np.empty((p, nt + 1), dtype=complex)
    yref = np.empty((p, nt + 1), dtype=complex)
    u = np.empty((m, nt + 1), dtype=complex)
    snap_idx = np.arange(0, nt + 1, snapshot_stride)
    snapshots = np.empty((dim, snap_idx.size), dtype=complex)
    yref[:, :] = reference_signal(exo, t)

    x = xe0.copy()
    snap_pos = 0
    for j in range(nt + 1):
        if j > 0:
            x = G @ x + W @ (V[:, j - 1] + V[:, j])
        y[:, j] = cl.Ce[:, :n] @ x[:n] + cl.Ce[:, n:] @ x[n:]
        u[:, j] = cl.controller_K @ x[n:]
        if snap_pos < snap_idx.size and j == snap_idx[snap_pos]:
            snapshots[:, snap_pos] = x
            snap_pos += 1

    e = y - yref
    residue = max(float(np.max(np.abs(arr.imag))) if arr.size else 0.0 for arr in (y, yref, u))
    return Trajectory(
        t=t,
        y=y,
        y_ref=yref,
        e=e,
        u=u,
        e_norm=np.linalg.norm(e, axis=0),
        snapshot_t=t[snap_idx],
        snapshots=snapshots,
        max_imag_residue=residue,
        dt=dt,
    )


def error_metrics(traj, window=1.0, stride=0.1):
    """Sliding error integrals I(t) = int_t^{t+window} ||e(s)|| ds.

    Emitted at the given stride (default 0.1 s); the run must cover at
    least two window lengths for a meaningful decay record.
    """
    from .numerics import sliding_window_integral

    T = traj.t[-1]
    if T < 2 * window:
        raise ValueError(f"horizon {T:.3g} too short for window {window:.3g} metrics")
    t0, I = sliding_window_integral(traj.e_norm, traj.dt, window=window)
    step = max(1, int(round(stride / traj.dt)))
    return DecaySamples(t=t0[::step], I=I[::step], window=window)


def write_trajectory_csv(traj, path):
    """Columns t, y, y_ref, e_norm, u (real parts, 15 significant digits)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        p = traj.y.shape[0]
        m = traj.u.shape[0]
        ycols = [f"y_{i}" for i in range(p)] if p > 1 else ["y"]
        rcols = [f"y_ref_{i}" for i in range(p)] if p > 1 else ["y_ref"]
        ucols = [f"u_{i}" for i in range(m)] if m > 1 else ["u"]
        w.writerow(["t", *ycols, *rcols, "e_norm", *ucols])
        for j, tj in enumerate(traj.t):
            row = [FLOAT_FMT % tj]
            row += [FLOAT_FMT % v for v in traj.y[:, j].real]
            row += [FLOAT_FMT % v for v in traj.y_ref[:, j].real]
            row.append(FLOAT_FMT % traj.e_norm[j])
            row += [FLOAT_FMT % v for v in traj.u[:, j].real]
            w.writerow(row)


def write_decay_csv(decay, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "I"])
        for tj, Ij in zip(decay.t, decay.I):
            w.writerow([FLOAT_FMT % tj, FLOAT_FMT % Ij])


def write_boundary_csv(traj, geometry, path):
    """Space-time record of the state on the observation edge Gamma_3."""
    idx = geometry.gamma3
    coords = np.linspace(0.0, 1.0, geometry.n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"xi2_{c:.6f}" for c in coords])
        for j, tj in enumerate(traj.snapshot_t):
            vals = traj.snapshots[idx, j].real
            w.writerow([FLOAT_FMT % tj] + [FLOAT_FMT % v for v in vals])
