"""Truncated diagonal exosystems: frequency ladders, signal generation, and
the heat-study coefficient profiles.

A truncated exosystem carries modes k = -N..N (ascending) with frequencies
omega_k = 2*pi*k/tau, an initial coefficient vector v0, and per-mode columns
of the disturbance map E and reference map F.  The flow is the exact
diagonal phase rotation v_k(t) = exp(i omega_k t) v0_k; signals are

    w(t) = E v(t),        y_ref(t) = -F v(t).

Profiles meant to generate real signals must be conjugate-symmetric in the
sense F_{-k} v_{-k} = conj(F_k v_k) (same for E); `realness_residual`
measures the violation.
"""

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TruncatedExosystem:
    """Diagonal frequency ladder with signal coefficient profiles.

    Attributes
    ----------
    tau : float
        Base period in seconds; omega_k = 2*pi*k/tau.
    N : int
        Truncation order; modes k = -N..N.
    v0 : (2N+1,) complex ndarray
        Initial coefficients per mode.
    E : (m_d, 2N+1) complex ndarray
        Disturbance-injection columns (one per mode).
    F : (p, 2N+1) complex ndarray
        Reference columns (one per mode).
    """

    tau: float
    N: int
    v0: np.ndarray
    E: np.ndarray
    F: np.ndarray
    omegas: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        m = 2 * self.N + 1
        self.v0 = np.asarray(self.v0, dtype=complex).reshape(m)
        self.E = np.atleast_2d(np.asarray(self.E, dtype=complex))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=complex))
        if self.E.shape[1] != m or self.F.shape[1] != m:
            raise ValueError("E and F must have one column per mode")
        self.omegas = 2.0 * np.pi * self.mode_indices / self.tau
        gaps = np.diff(self.omegas)
        if self.N > 0 and np.min(gaps) <= 0:
            raise ValueError("frequencies must be distinct with a uniform gap")

    @property
    def mode_indices(self):
        return np.arange(-self.N, self.N + 1)

    @property
    def dim(self):
        return 2 * self.N + 1

    @property
    def output_dim(self):
        return self.F.shape[0]

    @property
    def disturbance_dim(self):
        return self.E.shape[0]


def build_periodic(tau, N, output_dim=1, disturbance_dim=1):
    """Exosystem generating tau-periodic signals, with empty profiles.

    omega_k = 2*pi*k/tau for k = -N..N; v0, E, F start at zero and are
    populated by the caller or by the profile builders below.
    """
    m = 2 * N + 1
    return TruncatedExosystem(
        tau=tau,
        N=N,
        v0=np.zeros(m, dtype=complex),
        E=np.zeros((disturbance_dim, m), dtype=complex),
        F=np.zeros((output_dim, m), dtype=complex),
    )


def exo_state(exo, t):
    """Exact diagonal flow v(t), isometric in t.

    Parameters
    ----------
    t : float or (nt,) array_like

    Returns
    -------
    (2N+1,) or (2N+1, nt) complex ndarray
    """
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return np.exp(1j * exo.omegas * float(t)) * exo.v0
    return np.exp(1j * np.outer(exo.omegas, t)) * exo.v0[:, None]


def reference_signal(exo, t):
    """Reference y_ref(t) = -F v(t); shape (p,) or (p, nt)."""
    return -exo.F @ exo_state(exo, t)


def disturbance_signal(exo, t):
    """Disturbance w(t) = E v(t); shape (m_d,) or (m_d, nt)."""
    return exo.E @ exo_state(exo, t)


def realness_residual(exo):
    """Max deviation from conjugate symmetry of the generated signals.

    Checks F_{-k} v_{-k} = conj(F_k v_k) and likewise for E; zero for
    profiles that generate real-valued signals.
    """
    res = 0.0
    for M in (exo.F, exo.E):
        prod = M * exo.v0[None, :]
        res = max(res, float(np.max(np.abs(prod[:, ::-1] - prod.conj()))))
    return res


def fourier_ingest(t, x, tau, N):
    """Fourier coefficients of uniformly sampled tau-periodic data.

    Coefficients follow the exp(i omega_k t) convention of `exo_state`:
    x(t) ~ sum_k c_k exp(2j*pi*k*t/tau).  Reconstruction at the sample
    points is exact up to the aliasing bound of the truncation.

    Parameters
    ----------
    t : (M,) array_like
        Uniform sample times covering one period (endpoint excluded);
        M >= 4N + 4 required.
    x : (M,) or (M, d) array_like
        Samples; a second axis ingests several channels at once.
    tau : float
    N : int

    Returns
    -------
    (2N+1,) or (d, 2N+1) complex ndarray
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    x = np.asarray(x)
    M = t.size
    if M < 4 * N + 4:
        raise ValueError(f"need at least {4 * N + 4} samples for order {N}, got {M}")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(abs(dt[0]), 1e-30):
        raise ValueError("samples must be uniform over one period")
    if abs(M * dt[0] - tau) > 1e-6 * tau:
        raise ValueError("samples must cover exactly one period (endpoint excluded)")
    k = np.arange(-N, N + 1)
    kernel = np.exp(-2j * np.pi * np.outer(k, t) / tau) / M
    if x.ndim == 1:
        return kernel @ x.astype(complex)
    return (kernel @ x.astype(complex)).T


def default_reference_wave(t):
    """The built-in 2*pi-periodic C^1 reference wave.

    A single-knot piecewise-cubic spline, r(s) = (pi^2 s - s^3)/6 on the
    wrapped coordinate s in (-pi, pi].  It is continuously differentiable
    with a curvature jump only at the seam, so its Fourier coefficients
    are exactly |k|^{-3} in magnitude.
    """
    t = np.asarray(t, dtype=float)
    s = np.mod(t + np.pi, 2.0 * np.pi) - np.pi
    return (np.pi**2 * s - s**3) / 6.0


def heat_example_profiles(N, samples=4096):
    """Exosystem profiles of the boundary-controlled heat study.

    v0_0 = 1 and v0_k = |k|^{-3/5}; F tracks the default C^1 reference
    wave, giving |F_k| = |k|^{-12/5} with F_0 = 0; E realizes the
    disturbance d(t) = cos(4t) + sin(t)/2 on the modes k = +-1, +-4.
    """
    if N < 4:
        raise ValueError("heat profiles need N >= 4 (disturbance uses mode 4)")
    exo = build_periodic(2.0 * np.pi, N)
    k = exo.mode_indices
    ak = np.abs(k).astype(float)
    nz = ak > 0

    v0 = np.ones(exo.dim)
    v0[nz] = ak[nz] ** (-3.0 / 5.0)
    exo.v0[:] = v0

    ts = 2.0 * np.pi * np.arange(samples) / samples
    yr = fourier_ingest(ts, default_reference_wave(ts), 2.0 * np.pi, N)
    # y_ref = -F v reproduces the wave; F_0 forced to exact zero (zero mean)
    F = np.zeros(exo.dim, dtype=complex)
    F[nz] = -yr[nz] * ak[nz] ** (3.0 / 5.0)
    exo.F[0, :] = F

    # d(t) = cos(4t) + sin(t)/2  =>  coefficient 1/2 at k=+-4, -i/4 at k=1, i/4 at k=-1
    exo.E[0, N + 4] = 0.5 / exo.v0[N + 4]
    exo.E[0, N - 4] = 0.5 / exo.v0[N - 4]
    exo.E[0, N + 1] = (-0.25j) / exo.v0[N + 1]
    exo.E[0, N - 1] = (0.25j) / exo.v0[N - 1]
    return exo


def to_json_dict(exo):
    """Serializable document: {tau, N, v0, E, F} with [re, im] pair encoding."""

    def enc_vec(v):
        return [[float(z.real), float(z.imag)] for z in v]

    return {
        "schema_version": 1,
        "tau": float(exo.tau),
        "N": int(exo.N),
        "v0": enc_vec(exo.v0),
        "E": [enc_vec(row) for row in exo.E],
        "F": [enc_vec(row) for row in exo.F],
    }


def from_json_dict(doc):
    def dec_vec(pairs):
        return np.array([complex(re, im) for re, im in pairs], dtype=complex)

    return TruncatedExosystem(
        tau=float(doc["tau"]),
        N=int(doc["N"]),
        v0=dec_vec(doc["v0"]),
        E=np.array([dec_vec(row) for row in doc["E"]], dtype=complex),
        F=np.array([dec_vec(row) for row in doc["F"]], dtype=complex),
    )


def save_json(exo, path):
    with open(path, "w") as fh:
        json.dump(to_json_dict(exo), fh, indent=1)


def load_json(path):
    with open(path) as fh:
        return from_json_dict(json.load(fh))
