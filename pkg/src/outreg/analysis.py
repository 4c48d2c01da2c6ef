"""Verification of the structural conditions and quantitative predictions.

Covers the internal-model range/kernel conditions, the per-mode regulator
equation residuals, the exact norm identity of the stabilized internal
model, resolvent-norm scans with growth-law fitting, decay-rate fits for
the sliding error integrals, and the perturbation (robustness) suite.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .closedloop import assemble, error_metrics, simulate
from .numerics import opnorm, resolvent_norm, spectral_abscissa
from .plant import perturb, perturb_exosystem


class AnalysisPrecondition(RuntimeError):
    """An exosystem frequency collides with the spectrum of the checked operator."""


@dataclass
class RegulatorSolution:
    """Mode-by-mode solution columns of the regulator equations and their residuals."""

    omegas: np.ndarray
    columns: np.ndarray          # (dim_e, modes): R(i w_k, Ae) Be phi_k
    residuals: np.ndarray        # (modes,): ||Ce col_k + De phi_k||
    forcing_norms: np.ndarray    # (modes,): ||Be phi_k||
    max_relative_residual: float


@dataclass
class GrowthFit:
    model: str                   # "polynomial" | "exponential"
    exponent: float              # alpha-hat for polynomial, rate for exponential
    r2_polynomial: float
    r2_exponential: float
    constant: float


@dataclass
class DecayFit:
    slope_loglog: float
    slope_logcorrected: float
    r2: float
    window: tuple
    narrow_window: bool
    predicted_slope: float | None = None
    envelope_constant: float | None = None
    within_band: bool | None = None


def check_g_conditions(controller, exo=None, tol=1e-10):
    """Numerical range/kernel conditions of the internal model.

    Per mode k: rank([i w_k I - G1 | G2]) must equal rank(i w_k I - G1) +
    rank(G2) (trivial intersection of ranges), with singular values
    thresholded at `tol` relative; additionally the stacked G2 must have
    trivial kernel, and each per-mode injection block G2k full rank.
    """
    omegas = controller.omegas if exo is None else exo.omegas
    Gcal1, Gcal2 = controller.G1, controller.G2
    dim = Gcal1.shape[0]
    s_g2 = np.linalg.svd(Gcal2, compute_uv=False)
    ker_ok = bool(s_g2[-1] > tol * s_g2[0])
    rank_g2 = int(np.sum(s_g2 > tol * s_g2[0]))
    g2_scale = float(np.linalg.svd(controller.im_G2, compute_uv=False)[0]) \
        if controller.im_G2.size else 0.0

    slices = controller.block_slices()
    modes = []
    for idx, w in enumerate(omegas):
        M = 1j * w * np.eye(dim) - Gcal1
        sM = np.linalg.svd(M, compute_uv=False)
        rank_M = int(np.sum(sM > tol * sM[0]))
        aug = np.hstack([M, Gcal2])
        sA = np.linalg.svd(aug, compute_uv=False)
        rank_aug = int(np.sum(sA > tol * sA[0]))
        range_ok = bool(rank_aug == rank_M + rank_g2)
        blk = controller.im_G2[slices[idx], :]
        if blk.shape[0] == 0:
            block_ok = True  # mode deliberately omitted from the internal model
        else:
            sb = np.linalg.svd(blk, compute_uv=False)
            block_ok = bool(sb[min(blk.shape) - 1] > tol * max(g2_scale, 1e-300))
        modes.append({
            "k": int(round(w * exo.tau / (2 * np.pi))) if exo is not None else idx,
            "omega": float(w),
            "range_ok": range_ok,
            "block_rank_ok": block_ok,
            "pass": bool(range_ok and block_ok),
        })
    return {
        "modes": modes,
        "ker_ok": ker_ok,
        "all_pass": bool(ker_ok and all(m["pass"] for m in modes)),
    }


def regulator_residuals(cl, exo, guard=1e-12):
    """Residuals of the regulation constraint at every exosystem mode.

    Solves (i w_k I - Ae) sigma = Be phi_k and reports
    r_k = ||Ce sigma + De phi_k||; the summary value is max_k r_k
    normalized by max_k ||Be phi_k||.
    """
    dim = cl.dim
    cols = np.zeros((dim, exo.dim), dtype=complex)
    res = np.zeros(exo.dim)
    fnorm = np.linalg.norm(cl.Be, axis=0)
    for idx, w in enumerate(exo.omegas):
        M = 1j * w * np.eye(dim) - cl.Ae
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= guard * s[0]:
            raise AnalysisPrecondition(
                f"mode k={exo.mode_indices[idx]}: i*omega is in the spectrum of Ae"
            )
        cols[:, idx] = scipy.linalg.solve(M, cl.Be[:, idx])
        res[idx] = np.linalg.norm(cl.Ce @ cols[:, idx] + cl.De[:, idx])
    scale = max(float(fnorm.max()), 1e-300)
    return RegulatorSolution(
        omegas=exo.omegas.copy(),
        columns=cols,
        residuals=res,
        forcing_norms=fnorm,
        max_relative_residual=float(res.max() / scale),
    )


def im_norm_identity(im_G1, im_G2, omegas, block_sizes=None, guard=1e-12):
    """Exact-identity deviation of the stabilized internal model per mode.

    For the dissipatively stabilized internal model the resolvent applied
    to the injection satisfies, at each modal frequency,
    ||R(i w_k, G1 - G2 G2^*) G2|| = ||G2k^{-1}|| whenever the block G2k is
    square invertible (non-square blocks are measured against the
    pseudoinverse norm and flagged informational).
    """
    z0 = im_G1.shape[0]
    if block_sizes is None:
        if z0 % len(omegas):
            raise ValueError("cannot infer uniform block sizes")
        block_sizes = np.full(len(omegas), z0 // len(omegas), dtype=int)
    S = im_G1 - im_G2 @ im_G2.conj().T
    offs = np.concatenate(([0], np.cumsum(block_sizes)))
    rows = []
    for idx, w in enumerate(omegas):
        M = 1j * w * np.eye(z0) - S
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] <= guard * sv[0]:
            raise AnalysisPrecondition(
                f"i*omega={w:.6g} lies in the spectrum of the stabilized internal model; "
                "this contradicts its structural stability and signals a synthesis bug"
            )
        lhs = opnorm(scipy.linalg.solve(M, im_G2))
        blk = im_G2[offs[idx]:offs[idx + 1], :]
        square = blk.shape[0] == blk.shape[1] and blk.shape[0] > 0
        if square:
            rhs = opnorm(np.linalg.inv(blk))
        elif blk.size:
            sb = np.linalg.svd(blk, compute_uv=False)
            rhs = 1.0 / sb[min(blk.shape) - 1] if sb[min(blk.shape) - 1] > 0 else np.inf
        else:
            rhs = np.nan
        rows.append({
            "omega": float(w),
            "lhs": float(lhs),
            "rhs": float(rhs),
            "deviation": float(abs(lhs - rhs)) if np.isfinite(rhs) else np.nan,
            "exact_identity": square,
        })
    return rows


def scan_frequencies(omegas, midpoints=True):
    """Scan grid through the modal frequencies and, optionally, their midpoints."""
    om = np.sort(np.asarray(omegas, dtype=float))
    pts = list(om)
    if midpoints:
        pts += list((om[:-1] + om[1:]) / 2.0)
    return np.array(sorted(pts))


def resolvent_scan(M, omegas):
    """||R(i w, M)|| over a frequency grid; spectrum hits become inf markers."""
    return np.array([resolvent_norm(M, 1j * w) for w in omegas])


def _r2(x, y, coeffs):
    fit = np.polyval(coeffs, x)
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def fit_growth(omegas, values, min_peaks=6):
    """Growth-law fit of resolvent peak values.

    Least squares of log(value) against log(omega) (polynomial model) and
    against omega (exponential model); the better R^2 selects the model.
    """
    om = np.asarray(omegas, dtype=float)
    val = np.asarray(values, dtype=float)
    keep = np.isfinite(val) & (val > 0) & (om > 0)
    om, val = om[keep], val[keep]
    if om.size < min_peaks:
        raise ValueError(f"need at least {min_peaks} finite peak samples, got {om.size}")
    lv = np.log(val)
    cp = np.polyfit(np.log(om), lv, 1)
    ce = np.polyfit(om, lv, 1)
    r2p = _r2(np.log(om), lv, cp)
    r2e = _r2(om, lv, ce)
    if r2p >= r2e:
        return GrowthFit(model="polynomial", exponent=float(cp[0]),
                         r2_polynomial=r2p, r2_exponential=r2e,
                         constant=float(np.exp(cp[1])))
    return GrowthFit(model="exponential", exponent=float(ce[0]),
                     r2_polynomial=r2p, r2_exponential=r2e,
                     constant=float(np.exp(ce[1])))


def fit_decay(decay, window, alpha=None, band=0.25):
    """Slope fit of the sliding error integrals over a time window.

    Reports the plain log-log slope of I(t) against t and the
    log-corrected slope (regression against log(t / log t), which removes
    the logarithmic factor of the predicted (log t / t)^{1/alpha} law).
    When `alpha` is given, the predicted slope -1/alpha, the fitted
    envelope constant sup I(t) * t^{1/alpha}, and a band check at
    relative width `band` are included.
    """
    t_lo, t_hi = window
    t = np.asarray(decay.t, dtype=float)
    I = np.asarray(decay.I, dtype=float)
    keep = (t >= t_lo) & (t <= t_hi) & (I > 0) & (t > np.e)
    t, I = t[keep], I[keep]
    if t.size < 4:
        raise ValueError("decay window contains too few samples")
    narrow = (t.max() / t.min()) < 10.0
    logI = np.log(I)
    c1 = np.polyfit(np.log(t), logI, 1)
    c2 = np.polyfit(np.log(t / np.log(t)), logI, 1)
    fit = DecayFit(
        slope_loglog=float(c1[0]),
        slope_logcorrected=float(c2[0]),
        r2=_r2(np.log(t), logI, c1),
        window=(float(t_lo), float(t_hi)),
        narrow_window=bool(narrow),
    )
    if alpha is not None:
        pred = -1.0 / alpha
        fit.predicted_slope = pred
        fit.envelope_constant = float(np.max(I * t ** (1.0 / alpha)))
        fit.within_band = bool(abs(fit.slope_loglog - pred) <= band * abs(pred))
    return fit


def robustness_suite(plant, controller, exo, specs, T, dt, window=1.0):
    """Closed-loop verdicts for a list of plant/exosystem perturbations.

    The controller is kept fixed.  Each spec yields a report row with the
    perturbed spectral abscissa, the final/initial sliding-error-integral
    ratio of a zero-initial-state run (NaN when the perturbation
    destabilizes: outside the guarantee), and the worst regulator
    residual.
    """
    reports = []
    for spec in specs:
        pplant = perturb(plant, spec)
        pexo = perturb_exosystem(exo, spec)
        cl = assemble(pplant, controller, pexo)
        absc = spectral_abscissa(cl.Ae)
        row = {"label": spec.label, "abscissa": absc, "stable": bool(absc < 0)}
        if not row["stable"]:
            row.update(error_ratio=float("nan"), max_regulator_residual=float("nan"),
                       note="destabilizing perturbation - outside guarantee")
            reports.append(row)
            continue
        reg = regulator_residuals(cl, pexo)
        traj = simulate(cl, pexo, T=T, dt=dt)
        dec = error_metrics(traj, window=window)
        row.update(
            error_ratio=float(dec.I[-1] / dec.I[0]) if dec.I[0] > 0 else 0.0,
            max_regulator_residual=reg.max_relative_residual,
        )
        reports.append(row)
    return reports


def report_to_json(obj, path):
    """Serialize a report (dataclass, dict, or list) to a JSON document."""

    def default(o):
        if isinstance(o, np.ndarray):
            if np.iscomplexobj(o):
                return {"re": o.real.tolist(), "im": o.imag.tolist()}
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, (np.bool_,)):
            return bool(o)
        if hasattr(o, "__dataclass_fields__"):
            return asdict(o)
        raise TypeError(f"cannot serialize {type(o)}")

    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, default=default)


def format_table(rows, columns):
    """Aligned-text table for human consumption."""
    widths = [max(len(c), *(len(f"{r.get(c, '')}") for r in rows)) if rows else len(c)
              for c in columns]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(f"{r.get(c, '')}".ljust(w) for c, w in zip(columns, widths)))
    return "\n".join(lines)
