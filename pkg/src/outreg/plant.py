"""Finite-dimensional plant realizations and transfer-function evaluation.

Includes the boundary-controlled heat plant on the unit square: a 5-point
finite-difference Laplacian with Neumann conditions imposed by ghost-node
reflection, Neumann control on the bottom edge, disturbance flux on the
lower half of the left edge, and averaged observation along the right edge.

The reflection stencil is the consistent second-order treatment (boundary
datum enters rows as (2/h)*u) and makes A self-adjoint with respect to the
trapezoidal quadrature weights rather than entrywise symmetric; see
`weighted_symmetry_residual`.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .numerics import as_matrix, opnorm, spectral_abscissa


class TransferPole(RuntimeError):
    """Evaluation point is (numerically) in the spectrum of the state matrix."""


@dataclass
class HeatGeometry:
    """Grid metadata of the heat builder (n x n nodes, spacing h = 1/(n-1))."""

    n: int
    h: float
    gamma1: np.ndarray  # flat node indices, bottom edge (control)
    gamma2: np.ndarray  # flat node indices, lower half of left edge (disturbance)
    gamma3: np.ndarray  # flat node indices, right edge (observation)
    quad_weights: np.ndarray  # cell-area weights over the full grid


@dataclass
class PlantModel:
    """Dense state-space realization (A, B, Bd, C, D)."""

    A: np.ndarray
    B: np.ndarray
    Bd: np.ndarray
    C: np.ndarray
    D: np.ndarray
    geometry: HeatGeometry | None = field(default=None)

    def __post_init__(self):
        self.A = as_matrix(self.A, "A")
        self.B = as_matrix(self.B, "B")
        self.Bd = as_matrix(self.Bd, "Bd")
        self.C = as_matrix(self.C, "C")
        self.D = as_matrix(self.D, "D")
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError("A must be square")
        if self.B.shape[0] != n or self.Bd.shape[0] != n:
            raise ValueError("B and Bd must have as many rows as A")
        if self.C.shape[1] != n:
            raise ValueError("C must have as many columns as A")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError("D must be (outputs x inputs)")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def inputs(self):
        return self.B.shape[1]

    @property
    def outputs(self):
        return self.C.shape[0]


@dataclass
class StabilizationGains:
    """State feedback K2 (A + B K2 Hurwitz) and output injection L1 (A + L1 C Hurwitz)."""

    K2: np.ndarray
    L1: np.ndarray

    def __post_init__(self):
        self.K2 = as_matrix(self.K2, "K2")
        self.L1 = as_matrix(self.L1, "L1")


@dataclass
class PerturbationSpec:
    """Multiplicative factors and additive deltas applied to the plant operators.

    Scales for E and F apply to the exosystem coefficient maps and are
    consumed by the robustness suite, not by `perturb` itself.
    """

    label: str = "perturbation"
    A_scale: float = 1.0
    B_scale: float = 1.0
    Bd_scale: float = 1.0
    C_scale: float = 1.0
    D_scale: float = 1.0
    E_scale: float = 1.0
    F_scale: float = 1.0
    A_add: np.ndarray | None = None
    B_add: np.ndarray | None = None
    Bd_add: np.ndarray | None = None
    C_add: np.ndarray | None = None
    D_add: np.ndarray | None = None


def identity_perturbation(label="nominal"):
    return PerturbationSpec(label=label)


def _reflection_laplacian_1d(n, h):
    """Second-difference matrix with ghost-node Neumann reflection."""
    T = np.zeros((n, n))
    idx = np.arange(n)
    T[idx, idx] = -2.0
    T[idx[1:], idx[:-1]] = 1.0
    T[idx[:-1], idx[1:]] = 1.0
    T[0, 1] = 2.0
    T[n - 1, n - 2] = 2.0
    return T / h**2


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    return w


def build_heat2d(n):
    """Heat plant on the unit square with boundary control and observation.

    Nodes (i, j) at (i*h, j*h), h = 1/(n-1), flat index i + n*j.  Control
    flux on the bottom edge, disturbance flux on the left edge for
    xi_2 <= 1/2 (the node exactly at 1/2, when present, at half weight),
    output = trapezoidal average of the state over the right edge.

    Parameters
    ----------
    n : int
        Grid points per side, n >= 4.

    Returns
    -------
    PlantModel
        State dimension n^2, one input, one disturbance, one output, D = 0.
    """
    if n < 4:
        raise ValueError("heat grid needs n >= 4")
    h = 1.0 / (n - 1)
    T = _reflection_laplacian_1d(n, h)
    I = np.eye(n)
    A = np.kron(I, T) + np.kron(T, I)  # fast index i = xi_1 direction

    dim = n * n
    i_idx = np.arange(dim) % n
    j_idx = np.arange(dim) // n

    gamma1 = np.where(j_idx == 0)[0]
    B = np.zeros((dim, 1))
    B[gamma1, 0] = 2.0 / h

    xi2 = j_idx * h
    on_gamma2 = (i_idx == 0) & (xi2 <= 0.5 + 1e-12)
    gamma2 = np.where(on_gamma2)[0]
    Bd = np.zeros((dim, 1))
    Bd[gamma2, 0] = 2.0 / h
    midpoint = gamma2[np.abs(xi2[gamma2] - 0.5) <= 1e-12]
    Bd[midpoint, 0] /= 2.0

    gamma3 = np.where(i_idx == n - 1)[0]
    C = np.zeros((1, dim))
    C[0, gamma3] = trapezoid_weights(n, h)

    D = np.zeros((1, 1))
    w1 = trapezoid_weights(n, h)
    geometry = HeatGeometry(
        n=n,
        h=h,
        gamma1=gamma1,
        gamma2=gamma2,
        gamma3=gamma3,
        quad_weights=np.kron(w1, w1),
    )
    return PlantModel(A=A, B=B, Bd=Bd, C=C, D=D, geometry=geometry)


def weighted_symmetry_residual(plant):
    """Relative asymmetry of W A with W the quadrature weight matrix.

    Zero for the heat builder: A is self-adjoint in the quadrature inner
    product <W x, y>, the discrete analogue of L^2(Omega) self-adjointness.
    """
    if plant.geometry is None:
        raise ValueError("plant has no grid geometry")
    WA = plant.geometry.quad_weights[:, None] * plant.A
    return opnorm(WA - WA.T) / max(opnorm(WA), 1e-300)


def heat_stabilizers(plant):
    """The heat example's explicit stabilizing pair.

    K2 = -pi^2 * (cell quadrature row) realizes -pi^2 * integral over the
    domain; L1 = -pi^2 * (all-ones column).  Both stabilized matrices are
    verified Hurwitz at construction.
    """
    if plant.geometry is None:
        raise ValueError("heat_stabilizers needs a plant from build_heat2d")
    K2 = -np.pi**2 * plant.geometry.quad_weights[None, :]
    L1 = -np.pi**2 * np.ones((plant.n, 1))
    gains = StabilizationGains(K2=K2, L1=L1)
    a_fb = spectral_abscissa(plant.A + plant.B @ K2)
    a_oi = spectral_abscissa(plant.A + L1 @ plant.C)
    if a_fb >= 0 or a_oi >= 0:
        raise RuntimeError(
            f"heat stabilizers failed the Hurwitz check (abscissas {a_fb:.3g}, {a_oi:.3g}); "
            "this signals a discretization bug"
        )
    return gains


def _resolvent_apply(M, RHS, what, guard=1e-12):
    """Solve M X = RHS with a singular-value pole guard."""
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= guard * s[0]:
        raise TransferPole(f"transfer pole: {what} is singular (sigma_min/sigma_max = {s[-1] / s[0]:.2e})")
    return scipy.linalg.solve(M, RHS)


def transfer(plant, lam):
    """P(lam) = C (lam I - A)^{-1} B + D, one linear solve per input column."""
    M = lam * np.eye(plant.n) - plant.A
    X = _resolvent_apply(M, plant.B.astype(complex), f"lam I - A at lam={lam}")
    return plant.C @ X + plant.D


def transfer_disturbance(plant, lam):
    """P_d(lam) = C (lam I - A)^{-1} B_d."""
    M = lam * np.eye(plant.n) - plant.A
    X = _resolvent_apply(M, plant.Bd.astype(complex), f"lam I - A at lam={lam}")
    return plant.C @ X


def transfer_PL(plant, gains, lam):
    """Stabilized transfer P_L(lam) = C (lam I - A - L1 C)^{-1} (B + L1 D) + D."""
    AL = plant.A + gains.L1 @ plant.C
    M = lam * np.eye(plant.n) - AL
    X = _resolvent_apply(M, (plant.B + gains.L1 @ plant.D).astype(complex), f"lam I - A - L1 C at lam={lam}")
    return plant.C @ X + plant.D


def transfer_PK(plant, gains, lam):
    """Stabilized transfer P_K(lam) = (C + D K2) (lam I - A - B K2)^{-1} B + D."""
    AK = plant.A + plant.B @ gains.K2
    M = lam * np.eye(plant.n) - AK
    X = _resolvent_apply(M, plant.B.astype(complex), f"lam I - A - B K2 at lam={lam}")
    return (plant.C + plant.D @ gains.K2) @ X + plant.D


def stabilized_disturbance_gain(plant, gains, lam):
    """C (lam I - A - L1 C)^{-1} B_d, the disturbance path through the stabilized plant."""
    AL = plant.A + gains.L1 @ plant.C
    M = lam * np.eye(plant.n) - AL
    X = _resolvent_apply(M, plant.Bd.astype(complex), f"lam I - A - L1 C at lam={lam}")
    return plant.C @ X


def perturb(plant, spec):
    """Apply a PerturbationSpec to the plant operators.

    Returns a new PlantModel; gains and controllers are deliberately not
    re-derived (robustness means the original controller is kept).
    """

    def apply(Mat, scale, add, name):
        out = scale * Mat
        if add is not None:
            add = as_matrix(add, f"{name}_add")
            if add.shape != Mat.shape:
                raise ValueError(f"{name}_add has shape {add.shape}, expected {Mat.shape}")
            out = out + add
        return out

    return PlantModel(
        A=apply(plant.A, spec.A_scale, spec.A_add, "A"),
        B=apply(plant.B, spec.B_scale, spec.B_add, "B"),
        Bd=apply(plant.Bd, spec.Bd_scale, spec.Bd_add, "Bd"),
        C=apply(plant.C, spec.C_scale, spec.C_add, "C"),
        D=apply(plant.D, spec.D_scale, spec.D_add, "D"),
        geometry=plant.geometry,
    )


def perturb_exosystem(exo, spec):
    """Scale the exosystem coefficient maps E and F per the spec."""
    from .exosystem import TruncatedExosystem

    return TruncatedExosystem(
        tau=exo.tau,
        N=exo.N,
        v0=exo.v0.copy(),
        E=spec.E_scale * exo.E,
        F=spec.F_scale * exo.F,
    )


def restrict_grid(column, n_fine, n_coarse):
    """Bilinear restriction of a fine-grid nodal field to a coarser grid.

    Used when resolvents are evaluated on a finer heat grid than the
    simulation grid; samples the fine bilinear interpolant at coarse nodes.
    """
    col = np.asarray(column).reshape(n_fine, n_fine)  # [j, i] layout
    hf = 1.0 / (n_fine - 1)
    coords = np.linspace(0.0, 1.0, n_coarse)
    out = np.empty((n_coarse, n_coarse), dtype=col.dtype)
    for jj, y in enumerate(coords):
        fy = min(int(y / hf), n_fine - 2)
        ty = y / hf - fy
        for ii, x in enumerate(coords):
            fx = min(int(x / hf), n_fine - 2)
            tx = x / hf - fx
            out[jj, ii] = (
                col[fy, fx] * (1 - tx) * (1 - ty)
                + col[fy, fx + 1] * tx * (1 - ty)
                + col[fy + 1, fx] * (1 - tx) * ty
                + col[fy + 1, fx + 1] * tx * ty
            )
    return out.reshape(n_coarse * n_coarse)
