"""Frequency and bandwidth of a correlation trace, and the stability map.

``Re C(tau)`` is fitted to ``A exp(-B tau) cos(omega tau + phi) + c`` by
Levenberg-Marquardt with the analytic Jacobian, starting from the discrete
Fourier peak.  ``omega`` is reported non-negative (orientation goes into
``phi``) and the stability ratio is ``|omega| / B``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .entropy import growth_law

__all__ = [
    "SpectralFit",
    "fit_damped_cosine",
    "fit_arrays",
    "damped_cosine",
    "StabilityRow",
    "stability_map",
    "frequency_contour",
    "mutual_info_contour",
    "write_stability_csv",
    "fit_to_json",
    "MIN_SAMPLES",
    "B_FLOOR",
]

MIN_SAMPLES = 64
B_FLOOR = 1e-9
MI_CONTOUR_LEVEL = 80.0
FREQ_CONTOUR_LEVEL = 5.0


@dataclass(frozen=True)
class SpectralFit:
    omega: float
    bandwidth_b: float
    amplitude: float
    phase: float
    offset: float
    residual: float
    low_confidence: bool = False
    note: str = ""

    @property
    def ratio(self) -> float:
        if self.bandwidth_b > B_FLOOR:
            return abs(self.omega) / self.bandwidth_b
        return float("inf")


def damped_cosine(tau, amplitude, bandwidth, omega, phase, offset=0.0):
    return amplitude * np.exp(-bandwidth * tau) * np.cos(omega * tau + phase) + offset


def _residuals(p, t, y):
    a, b, w, ph, c = p
    return a * np.exp(-b * t) * np.cos(w * t + ph) + c - y


def _jacobian(p, t, y):
    a, b, w, ph, c = p
    e = np.exp(-b * t)
    cs = np.cos(w * t + ph)
    sn = np.sin(w * t + ph)
    jac = np.empty((t.size, 5))
    jac[:, 0] = e * cs
    jac[:, 1] = -a * t * e * cs
    jac[:, 2] = -a * t * e * sn
    jac[:, 3] = -a * e * sn
    jac[:, 4] = 1.0
    return jac


def _exp_residuals(p, t, y):
    a, b, c = p
    return a * np.exp(-b * t) + c - y


def _exp_jacobian(p, t, y):
    a, b, c = p
    e = np.exp(-b * t)
    return np.column_stack([e, -a * t * e, np.ones_like(t)])


def _fourier_guess(t, y):
    """Peak angular frequency and phase of the mean-subtracted trace."""
    n = t.size
    dt = t[1] - t[0]
    pad = 8 * n
    spec = np.fft.rfft(y - y.mean(), pad)
    freqs = 2 * np.pi * np.fft.rfftfreq(pad, dt)
    k = int(np.argmax(np.abs(spec[1:]))) + 1
    return float(freqs[k]), float(np.angle(spec[k]))


def _canonical(a, b, w, ph):
    if w < 0:
        w, ph = -w, -ph
    if a < 0:
        a, ph = -a, ph + np.pi
    ph = float(np.angle(np.exp(1j * ph)))
    return a, b, w, ph


def fit_arrays(t, y, guess=None) -> SpectralFit:
    """Fit samples ``y(t)`` on a uniform grid.

    ``guess`` is an optional ``(A, B, omega, phi, c)`` starting point.  A fitted
    frequency below half the grid resolution ``pi / T`` cannot be told apart
    from zero; the trace is then refitted as a pure exponential with
    ``omega = 0``.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {t.size}")
    if not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=0):
        raise ValueError("fit expects a uniform grid")
    scale = float(np.max(np.abs(y)))
    if scale == 0:
        return SpectralFit(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, low_confidence=True, note="zero trace")
    yn = y / scale
    span = t[-1] - t[0]
    t0 = t - t[0]
    resolution = np.pi / span

    w_fft, ph_fft = _fourier_guess(t0, yn)
    starts = []
    if guess is not None:
        a, b, w, ph, c = guess
        starts.append(np.array([a / scale, b, w, ph, c / scale]))
    for bt in (0.5, 2.0, 6.0):
        starts.append(np.array([yn[0] - yn[-1], bt / span, w_fft, 0.0, yn[-1]]))
        starts.append(np.array([yn[0] - yn[-1], bt / span, w_fft, ph_fft, yn[-1]]))

    best = None
    for p0 in starts:
        try:
            sol = least_squares(_residuals, p0, jac=_jacobian, args=(t0, yn), method="lm",
                                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if not np.all(np.isfinite(sol.x)):
            continue
        if best is None or sol.cost < best.cost:
            best = sol
        if guess is not None and best.cost < 1e-20:
            break

    if best is None:
        return SpectralFit(w_fft, 1.0 / span, 1.0 * scale, ph_fft, 0.0,
                           float(np.sqrt(np.mean(yn**2))), low_confidence=True,
                           note="fit failed; Fourier estimate")

    a, b, w, ph, c = best.x
    a, b, w, ph = _canonical(a, b, w, ph)
    rms = float(np.sqrt(np.mean(best.fun**2)))
    if w < resolution:
        return _fit_exponential(t0, yn, scale, t[0])
    low = (not best.success) or b < 0
    note = "growing envelope" if b < 0 else ""
    # express amplitude and phase relative to tau = 0 rather than the first sample
    a_abs = a * np.exp(b * t[0])
    ph_abs = float(np.angle(np.exp(1j * (ph - w * t[0]))))
    return SpectralFit(float(w), float(max(b, 0.0)), float(a_abs * scale), ph_abs,
                       float(c * scale), rms, low_confidence=bool(low), note=note)


def _fit_exponential(t0, yn, scale, tstart):
    span = t0[-1]
    best = None
    for bt in (0.5, 2.0, 6.0):
        p0 = np.array([yn[0] - yn[-1], bt / span, yn[-1]])
        sol = least_squares(_exp_residuals, p0, jac=_exp_jacobian, args=(t0, yn), method="lm",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
        if best is None or sol.cost < best.cost:
            best = sol
    a, b, c = best.x
    rms = float(np.sqrt(np.mean(best.fun**2)))
    ph = 0.0 if a >= 0 else np.pi
    a_abs = abs(a) * np.exp(b * tstart)
    return SpectralFit(0.0, float(max(b, 0.0)), float(a_abs * scale), ph, float(c * scale), rms,
                       low_confidence=bool((not best.success) or b < 0), note="no resolvable oscillation")


def fit_damped_cosine(trace, guess=None) -> SpectralFit:
    """Fit ``Re C(tau)`` of a :class:`~dtcsim.regression.CorrelatorTrace`."""
    return fit_arrays(trace.tau_grid, np.real(trace.values), guess=guess)


def fit_to_json(fit: SpectralFit, params: dict | None = None, unit: float = 1.0) -> str:
    """JSON record; rates are divided by ``unit`` (normally ``f Gamma``)."""
    rec = asdict(fit)
    rec["low_confidence"] = bool(fit.low_confidence)
    rec["omega"] = fit.omega / unit
    rec["bandwidth"] = rec.pop("bandwidth_b") / unit
    rec["ratio"] = fit.ratio if np.isfinite(fit.ratio) else "inf"
    rec["rate_unit"] = "f*Gamma"
    if params:
        rec["params"] = params
    return json.dumps(rec, indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# stability map
# --------------------------------------------------------------------------
def frequency_contour(n_spins, level: float = FREQ_CONTOUR_LEVEL) -> float:
    """``g/f`` at which ``g N Gamma / 2 = level * f Gamma``."""
    return 2.0 * level / n_spins


def mutual_info_contour(n_spins, level: float = MI_CONTOUR_LEVEL, eta: float = 0.03) -> float:
    """``g/f`` at which ``f Gamma / I'(eta) = level`` under the large-N growth law.

    ``nan`` when the law never reaches the level at this ``N``.
    """
    # f Gamma / I' = 2 N / (1 + 4 (g/f)^2 eta)
    x = (2.0 * n_spins / level - 1.0) / (4.0 * eta)
    return float(np.sqrt(x)) if x >= 0 else float("nan")


@dataclass(frozen=True)
class StabilityRow:
    n_spins: int
    g_over_f: float
    ratio: float
    omega: float
    bandwidth: float
    residual: float
    status: str = "ok"
    freq_contour: float = field(default=float("nan"))
    mi_contour: float = field(default=float("nan"))


def stability_map(results) -> list[StabilityRow]:
    """Table of ``(N, g/f, |omega|/B)`` with the two reference contours.

    ``results`` is an iterable of ``(n_spins, g_over_f, fit_or_None, status)``
    where ``fit`` rates are already in units of ``f Gamma``.  Missing or failed
    cells are kept as rows with ``nan`` values and their status.
    """
    rows = []
    for n, gf, fit, status in results:
        if fit is None:
            rows.append(StabilityRow(int(n), float(gf), float("nan"), float("nan"),
                                     float("nan"), float("nan"), status or "missing",
                                     frequency_contour(n), mutual_info_contour(n)))
            continue
        rows.append(StabilityRow(int(n), float(gf), fit.ratio, fit.omega, fit.bandwidth_b,
                                 fit.residual, status or "ok", frequency_contour(n),
                                 mutual_info_contour(n)))
    rows.sort(key=lambda r: (r.n_spins, r.g_over_f))
    return rows


def write_stability_csv(path, rows, header: dict | None = None) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k} = {v}\n")
        fh.write("# omega and bandwidth in units of f*Gamma; contours are g/f reference values\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "g_over_f", "ratio", "omega", "bandwidth", "residual", "status",
                    "g_over_f_freq_contour", "g_over_f_mi_contour"])
        for r in rows:
            w.writerow([r.n_spins, repr(r.g_over_f), repr(float(r.ratio)), repr(float(r.omega)),
                        repr(float(r.bandwidth)), repr(float(r.residual)), r.status,
                        repr(float(r.freq_contour)), repr(float(r.mi_contour))])
    return path


def growth_law_ratio(n_spins, g_over_f, eta: float = 0.03) -> float:
    """``f Gamma / I'(eta)`` predicted by the large-N growth law (``f = Gamma = 1``)."""
    return 1.0 / growth_law(n_spins, g_over_f, 1.0, 1.0, eta)
