"""Dense complex linear-algebra and quadrature kernels shared by all modules.

Conventions: vectors carry the Euclidean norm, matrices the spectral norm
(largest singular value).  All routines are pure and reentrant.
"""

import warnings

import numpy as np
import scipy.linalg


class StepSizeResonance(RuntimeError):
    """Raised when the implicit-step matrix (I - dt/2 A) is singular."""


def as_matrix(M, name="matrix"):
    """Coerce to a 2-D complex ndarray and validate finiteness."""
    M = np.atleast_2d(np.asarray(M))
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M.real)) or not np.all(np.isfinite(M.imag if np.iscomplexobj(M) else M.real)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def opnorm(M):
    """Spectral norm (largest singular value); 0.0 for empty matrices."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def pseudoinverse(M, tol=1e-12):
    """Moore-Penrose pseudoinverse with a relative singular-value cutoff.

    Parameters
    ----------
    M : (m, n) array_like
        Matrix to invert; must be finite.
    tol : float
        Relative rank threshold in (0, 1): singular values below
        ``tol * sigma_max`` are treated as exact zeros.

    Returns
    -------
    (n, m) ndarray
        Pseudoinverse satisfying the four Penrose identities to 1e-10
        relative accuracy.  An all-zero input returns the zero matrix of
        transposed shape.
    """
    M = as_matrix(M, "M")
    if not (0.0 < tol < 1.0):
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[1], M.shape[0]), dtype=complex)
    inv = np.where(s > tol * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (Vh.conj().T * inv) @ U.conj().T


def resolvent_norm(A, lam):
    """Norm of the resolvent (lam*I - A)^{-1} at a single complex point.

    Computed as 1/sigma_min(lam*I - A).  Returns ``numpy.inf`` when
    sigma_min <= 1e-14 * ||lam*I - A||, i.e. when lam is numerically in
    the spectrum; no exception is raised for that case.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    M = lam * np.eye(A.shape[0]) - A
    s = np.linalg.svd(M, compute_uv=False)
    smin, smax = float(s[-1]), float(s[0])
    if smin <= 1e-14 * smax:
        return np.inf
    return 1.0 / smin


def eigenvalues(A):
    """Full spectrum of a square matrix, multiplicities included."""
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    return np.linalg.eigvals(A)


def eigenpairs(A):
    """Spectrum with right eigenvectors, for residual checks ||Av - lam v||."""
    A = as_matrix(A, "A")
    return np.linalg.eig(A)


def spectral_abscissa(A):
    """max Re(sigma(A)); negative iff A is Hurwitz."""
    return float(np.max(eigenvalues(A).real))


def integrate_trajectory(A, forcing, x0, T, dt):
    """Integrate x' = A x + f(t) with the implicit trapezoidal rule.

    One-step scheme x_{n+1} = x_n + dt/2 (A x_n + f_n + A x_{n+1} + f_{n+1});
    A-stable and second-order, exact on solutions affine in t.  The LU
    factorization of (I - dt/2 A) is computed once and reused every step.

    Parameters
    ----------
    A : (n, n) array_like
    forcing : callable or None
        f(t) -> (n,) vector, evaluable at arbitrary t (the scheme samples
        both step endpoints).  None means the homogeneous system.
    x0 : (n,) array_like
    T : float
        Horizon in seconds; the grid is t_j = j*dt for j = 0..round(T/dt).
    dt : float
        Step size, > 0.

    Returns
    -------
    t : (nt+1,) ndarray
    X : (n, nt+1) ndarray
        State samples, X[:, j] = x(t_j).
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("A must be square")
    if dt <= 0:
        raise ValueError("dt must be positive")
    x0 = np.asarray(x0, dtype=complex).reshape(n)
    nt = int(round(T / dt))
    if nt < 1:
        raise ValueError("horizon shorter than one step")
    t = dt * np.arange(nt + 1)

    I = np.eye(n)
    M = I - (dt / 2.0) * A
    P = I + (dt / 2.0) * A
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu = scipy.linalg.lu_factor(M)
    # lu_factor succeeds on singular input; detect via vanishing pivot.
    diag = np.abs(np.diag(lu[0]))
    if np.any(diag <= 1e-14 * max(1.0, diag.max())):
        raise StepSizeResonance("step size resonance: I - dt/2*A is singular; halve dt")

    X = np.empty((n, nt + 1), dtype=complex)
    X[:, 0] = x0
    if forcing is None:
        f_prev = np.zeros(n, dtype=complex)
        fconst = True
    else:
        f_prev = np.asarray(forcing(t[0]), dtype=complex).reshape(n)
        fconst = False
    x = x0
    for j in range(nt):
        if fconst:
            f_next = f_prev
        else:
            f_next = np.asarray(forcing(t[j + 1]), dtype=complex).reshape(n)
        rhs = P @ x + (dt / 2.0) * (f_prev + f_next)
        x = scipy.linalg.lu_solve(lu, rhs)
        X[:, j + 1] = x
        f_prev = f_next
    return t, X


def sliding_window_integral(samples, dt, window=1.0):
    """Sliding integrals t -> int_t^{t+window} g(s) ds of sampled data.

    Composite trapezoidal quadrature on each window; defined for window
    start times t in [0, T - window].

    Parameters
    ----------
    samples : (nt+1,) array_like
        Values g(t_j) on the uniform grid t_j = j*dt.
    dt : float
    window : float
        Must be an integer multiple of dt (to 1e-9 relative).

    Returns
    -------
    t0 : (m,) ndarray
        Window start times.
    I : (m,) ndarray
        Window integrals, I[j] = int over [t0[j], t0[j]+window].
    """
    g = np.asarray(samples, dtype=float).reshape(-1)
    if dt <= 0:
        raise ValueError("dt must be positive")
    w = window / dt
    nw = int(round(w))
    if nw < 1 or abs(w - nw) > 1e-9 * max(1.0, w):
        raise ValueError("window must be an integer multiple of dt")
    if g.size - 1 < nw:
        raise ValueError("horizon shorter than the window")
    # cumulative trapezoid: Q[j] = int_0^{t_j} g
    Q = np.concatenate(([0.0], np.cumsum((g[1:] + g[:-1]) * (dt / 2.0))))
    I = Q[nw:] - Q[: g.size - nw]
    t0 = dt * np.arange(I.size)
    return t0, I
