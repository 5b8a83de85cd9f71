"""Machine-checked stability and instability certificates.

Given an energy function V(x,t) and SDE coefficients f, g over a
volatility band, the three grid operators are

    op_L(V)       = V_t + f V_x + g^2 * g_upper(V_xx)   worst-case drift of V
    op_H(V)       = g^2 * V_x^2                          noise intensity seen by V
    op_L_lower(V) = V_t + f V_x + g^2 * g_lower(V_xx)   best-case drift of V

op_L dominates the drift of V under every admissible variance rate and
op_L_lower is dominated by it, so pointwise inequalities on these
operators certify pathwise decay (or growth) bounds that hold across the
whole ambiguity band at once.

check_certificate machine-checks the hypothesis set of one of six
certificate templates (ids T33..T38) on a deterministic grid and, when
every hypothesis holds, grants an implied bound on the pathwise
exponential rate limsup (1/t) log|X|:

    T33  |x|^p <= V,  LV <= -lambda V                       ->  -lambda/p
    T34  LV <= lambda phi V, HV >= rho phi V^2, Cesaro(phi) >= kappa,
         lambda < v_lower rho/2        -> -(kappa/p)(v_lower rho/2 - lambda)
    T35  LV <= -lambda V + nu e^{-lambda t}, HV <= nu e^{-lambda t} V,
         nu polynomial > 0 with nu(t) >= t                  ->  -lambda/p
    T36  e^{lambda t}|x|^p <= V, LV + eta (1+t)^{-q} HV <= phi (1 + V^beta),
         subexponential int phi                             ->  -lambda/p
    T37  e^{lambda t}|x|^p <= V, LV + v_upper eta e^{-qt} HV <=
         phi1 + phi2 V^beta, growth caps q and q(1-beta)    ->  -(lambda-q)/p
    T38  |x|^p >= V, L_lower V >= lambda phi V, HV <= rho phi V^2,
         Cesaro(phi) >= kappa, lambda > v_upper rho/2
                                       ->  liminf >= +(kappa/p)(lambda - v_upper rho/2)

Pointwise hypotheses pass when violated by at most 1e-9 relative.  The
time-average hypotheses (Cesaro lower bounds, log-growth caps) can only be
sampled up to the grid horizon; they are extrapolated from the last decade
of grid time and their verdicts carry horizon_limited = True.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .expr import (
    Expr,
    contains_nonsmooth,
    differentiate,
    evaluate,
    free_variables,
    to_source,
)
from .gcalc import AmbiguityBounds, g_lower, g_upper
from .integrator import SdeSpec

__all__ = [
    "LyapunovFn",
    "CheckGrid",
    "CertificateSpec",
    "HypothesisVerdict",
    "CertificateReport",
    "GrowthReport",
    "CertificateError",
    "THEOREMS",
    "op_L",
    "op_H",
    "op_L_lower",
    "check_local_growth",
    "best_lambda_T33",
    "validate_certificate",
    "check_certificate",
    "write_certificate_csv",
    "verdict_line",
]

THEOREMS = ("T33", "T34", "T35", "T36", "T37", "T38")

REL_SLACK = 1e-9
# Extrapolated limits get an absolute allowance instead; the pointwise
# relative slack is meaningless for a regression intercept.
EXTRAPOLATION_SLACK = 1e-6


class CertificateError(Exception):
    pass


@dataclass(frozen=True)
class LyapunovFn:
    """Candidate energy function with symbolic partials."""

    V: Expr
    V_t: Expr
    V_x: Expr
    V_xx: Expr

    @classmethod
    def from_expr(cls, V: Expr) -> "LyapunovFn":
        V_x = differentiate(V, "x")
        return cls(
            V=V,
            V_t=differentiate(V, "t"),
            V_x=V_x,
            V_xx=differentiate(V_x, "x"),
        )


@dataclass(frozen=True)
class CheckGrid:
    """States and times the checker samples.

    xs excludes a ball around 0 (|x| >= x_min > 0): the certificates
    constrain decay rates of |X| and their hypotheses often degenerate at
    the origin.  The default grid is 200 log-spaced magnitudes per sign in
    [1e-3, 10] and 200 times spanning 20 time units from t0.
    """

    xs: np.ndarray
    ts: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ts = np.asarray(self.ts, dtype=float)
        if xs.size == 0 or ts.size == 0:
            raise ValueError("grid must be nonempty")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ts))):
            raise ValueError("grid must be finite")
        if np.any(xs == 0):
            raise ValueError("grid x points must exclude 0")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ts", ts)

    @classmethod
    def default(
        cls,
        t0: float = 0.0,
        x_min: float = 1e-3,
        x_max: float = 10.0,
        x_points: int = 200,
        t_span: float = 20.0,
        t_points: int = 200,
    ) -> "CheckGrid":
        if not (0 < x_min < x_max):
            raise ValueError("need 0 < x_min < x_max")
        mags = np.geomspace(x_min, x_max, x_points)
        return cls(
            xs=np.concatenate([-mags[::-1], mags]),
            ts=np.linspace(t0, t0 + t_span, t_points),
        )

    def mesh(self):
        return np.meshgrid(self.xs, self.ts, indexing="ij")


# ---------------------------------------------------------------------------
# operators

def op_L(lyap: LyapunovFn, spec: SdeSpec, b: AmbiguityBounds, x, t):
    """Worst-case drift of V at (x, t) over the variance band."""
    g_val = evaluate(spec.g, x, t)
    return (
        evaluate(lyap.V_t, x, t)
        + evaluate(spec.f, x, t) * evaluate(lyap.V_x, x, t)
        + g_val * g_val * g_upper(evaluate(lyap.V_xx, x, t), b)
    )


def op_H(lyap: LyapunovFn, spec: SdeSpec, x, t):
    """Noise intensity seen by V: g^2 V_x^2."""
    g_val = evaluate(spec.g, x, t)
    vx = evaluate(lyap.V_x, x, t)
    return g_val * g_val * vx * vx


def op_L_lower(lyap: LyapunovFn, spec: SdeSpec, b: AmbiguityBounds, x, t):
    """Best-case drift of V at (x, t) over the variance band."""
    g_val = evaluate(spec.g, x, t)
    return (
        evaluate(lyap.V_t, x, t)
        + evaluate(spec.f, x, t) * evaluate(lyap.V_x, x, t)
        + g_val * g_val * g_lower(evaluate(lyap.V_xx, x, t), b)
    )


# ---------------------------------------------------------------------------
# local growth (non-degeneracy of the coefficients near 0)

@dataclass(frozen=True)
class GrowthReport:
    """Grid bound C_n with f^2 + g^2 <= C_n x^2 on 0 < |x| <= n.

    certified is False when the coefficients do not vanish at x = 0 (the
    ratio then diverges as x -> 0 and no finite C_n exists)."""

    n: float
    bound: float
    certified: bool
    worst_x: float
    worst_t: float
    note: str = ""


def check_local_growth(spec: SdeSpec, n: float, grid: CheckGrid) -> GrowthReport:
    """Bound (f^2 + g^2)/x^2 on the grid restricted to 0 < |x| <= n.

    Divergence at the origin is detected exactly for continuous
    coefficients by probing x = 0: any nonzero value there makes the
    ratio unbounded below every grid resolution.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    xs = grid.xs[np.abs(grid.xs) <= n]
    if xs.size == 0:
        raise ValueError(f"grid has no points with |x| <= {n}")
    XX, TT = np.meshgrid(xs, grid.ts, indexing="ij")
    fv = np.broadcast_to(np.asarray(evaluate(spec.f, XX, TT), dtype=float), XX.shape)
    gv = np.broadcast_to(np.asarray(evaluate(spec.g, XX, TT), dtype=float), XX.shape)
    ratio = (fv * fv + gv * gv) / (XX * XX)
    k = int(np.argmax(ratio))
    worst_x = float(XX.flat[k])
    worst_t = float(TT.flat[k])
    bound = float(ratio.flat[k])

    try:
        f0 = np.asarray(evaluate(spec.f, np.zeros_like(grid.ts), grid.ts))
        g0 = np.asarray(evaluate(spec.g, np.zeros_like(grid.ts), grid.ts))
        vanishes = bool(np.all(f0 == 0) and np.all(g0 == 0))
        note = "" if vanishes else "coefficients do not vanish at x = 0"
    except Exception as exc:  # undefined at 0 counts as non-vanishing
        vanishes = False
        note = f"coefficients undefined at x = 0 ({exc})"
    if not np.isfinite(bound):
        vanishes = False
        note = note or "non-finite ratio on the grid"
    return GrowthReport(
        n=float(n),
        bound=bound,
        certified=vanishes and np.isfinite(bound),
        worst_x=worst_x,
        worst_t=worst_t,
        note=note,
    )


# ---------------------------------------------------------------------------
# certificate specification

@dataclass(frozen=True)
class CertificateSpec:
    """Parameters of one certificate template.

    Which fields are required depends on the template: p always; lam for
    every template except T33 (where it may be omitted and is then taken
    from best_lambda_T33); rho/kappa/phi for T34 and T38; nu_coeffs for
    T35; eta/q/beta_exp/phi for T36; eta/q/beta_exp/phi1/phi2 for T37.
    phi, phi1, phi2 are deterministic time weights: expressions in t only.
    """

    theorem: str
    p: float
    lam: float | None = None
    rho: float | None = None
    kappa: float | None = None
    eta: float | None = None
    q: float | None = None
    beta_exp: float | None = None
    phi: Expr | None = None
    phi1: Expr | None = None
    phi2: Expr | None = None
    nu_coeffs: tuple[float, ...] | None = None


_REQUIRED: dict[str, tuple[str, ...]] = {
    "T33": ("p",),
    "T34": ("p", "lam", "rho", "kappa", "phi"),
    "T35": ("p", "lam", "nu_coeffs"),
    "T36": ("p", "lam", "eta", "q", "beta_exp", "phi"),
    "T37": ("p", "lam", "eta", "q", "beta_exp", "phi1", "phi2"),
    "T38": ("p", "lam", "rho", "kappa", "phi"),
}


def validate_certificate(cert: CertificateSpec, b: AmbiguityBounds) -> None:
    """Reject malformed certificate parameter sets: missing fields for the
    chosen template, out-of-range parameters, state-dependent time weights,
    or a lambda on the wrong side of the band (T34/T38 standing
    assumptions)."""
    if cert.theorem not in THEOREMS:
        raise CertificateError(f"unknown certificate template {cert.theorem!r}")
    missing = [
        name for name in _REQUIRED[cert.theorem] if getattr(cert, name) is None
    ]
    if missing:
        raise CertificateError(
            f"{cert.theorem} needs fields {', '.join(missing)}"
        )
    if not cert.p > 0:
        raise CertificateError("p must be positive")
    for name in ("eta", "q"):
        val = getattr(cert, name)
        if val is not None and not val > 0:
            raise CertificateError(f"{name} must be positive")
    if cert.rho is not None and cert.rho < 0:
        raise CertificateError("rho must be nonnegative")
    if cert.kappa is not None and not cert.kappa > 0:
        raise CertificateError("kappa must be positive")
    if cert.beta_exp is not None and not (0 <= cert.beta_exp < 1):
        raise CertificateError("beta_exp must lie in [0, 1)")
    if cert.theorem in ("T33", "T35", "T36", "T37") and cert.lam is not None:
        if not cert.lam > 0:
            raise CertificateError("lambda must be positive")
    for name in ("phi", "phi1", "phi2"):
        e = getattr(cert, name)
        if e is not None and "x" in free_variables(e):
            raise CertificateError(
                f"{name} must be a deterministic time weight (t only)"
            )
    if cert.theorem == "T35":
        coeffs = cert.nu_coeffs
        if len(coeffs) < 2:
            raise CertificateError("nu must have degree >= 1")
        if any(not c > 0 for c in coeffs):
            raise CertificateError("nu coefficients must all be positive")
    # standing assumptions that position lambda against the band
    if cert.theorem == "T34" and not cert.lam < b.v_lower * cert.rho / 2:
        raise CertificateError(
            "T34 requires lambda < v_lower * rho / 2"
        )
    if cert.theorem == "T38" and not cert.lam > b.v_upper * cert.rho / 2:
        raise CertificateError(
            "T38 requires lambda > v_upper * rho / 2"
        )


# ---------------------------------------------------------------------------
# verdicts

@dataclass(frozen=True)
class HypothesisVerdict:
    """One checked hypothesis.  violation is the worst signed relative
    violation over the grid (<= REL_SLACK passes); for horizon-limited
    time hypotheses it is the extrapolated shortfall."""

    name: str
    passed: bool
    violation: float
    worst_x: float | None = None
    worst_t: float | None = None
    horizon_limited: bool = False
    note: str = ""


@dataclass(frozen=True)
class CertificateReport:
    theorem: str
    hypotheses: tuple[HypothesisVerdict, ...]
    granted: bool
    bound: float | None
    lam: float | None
    p: float
    caveats: tuple[str, ...] = field(default_factory=tuple)

    def hypothesis(self, name: str) -> HypothesisVerdict:
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)


def _pointwise(name, lhs, rhs, XX, TT, note="") -> HypothesisVerdict:
    """Check lhs <= rhs on the grid with relative slack."""
    lhs = np.broadcast_to(np.asarray(lhs, dtype=float), XX.shape)
    rhs = np.broadcast_to(np.asarray(rhs, dtype=float), XX.shape)
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    rel = (lhs - rhs) / scale
    k = int(np.argmax(rel))
    worst = float(rel.flat[k])
    return HypothesisVerdict(
        name=name,
        passed=worst <= REL_SLACK,
        violation=worst,
        worst_x=float(XX.flat[k]),
        worst_t=float(TT.flat[k]),
        note=note,
    )


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def _last_decade(ts: np.ndarray) -> np.ndarray:
    t_max = float(ts[-1])
    cut = max(t_max / 10.0, float(ts[0]))
    mask = (ts >= cut) & (ts > 0)
    if mask.sum() < 4:
        mask = ts > 0
    return mask


def _cesaro_lower(name, phi_vals, ts, kappa) -> HypothesisVerdict:
    """liminf (1/t) int_{t0}^t phi >= kappa, extrapolated from the last
    decade of grid time: the Cesaro average behaves like a + c/t there, so
    the intercept of a {1, 1/t} regression estimates the limit."""
    Q = _cumtrapz(phi_vals, ts)
    mask = _last_decade(ts)
    t = ts[mask]
    A = Q[mask] / t
    basis = np.stack([np.ones_like(t), 1.0 / t], axis=1)
    coef, *_ = np.linalg.lstsq(basis, A, rcond=None)
    limit = float(coef[0])
    shortfall = (kappa - limit) / max(1.0, abs(kappa))
    return HypothesisVerdict(
        name=name,
        passed=shortfall <= EXTRAPOLATION_SLACK,
        violation=shortfall,
        worst_t=float(t[np.argmin(A)]),
        horizon_limited=True,
        note=f"extrapolated Cesaro limit {limit:.6g} vs required {kappa:.6g}",
    )


def _loggrowth_cap(name, phi_vals, ts, cap) -> HypothesisVerdict:
    """limsup (1/t) log int_{t0}^t phi <= cap, extrapolated from the last
    decade: log Q(t)/t = a + b/t + c log(t)/t for exponential-polynomial
    integrals, so the intercept of that regression estimates the limit.
    An identically-zero integral passes trivially."""
    Q = _cumtrapz(phi_vals, ts)
    mask = _last_decade(ts) & (Q > 0)
    if not mask.any():
        return HypothesisVerdict(
            name=name,
            passed=True,
            violation=float("-inf"),
            horizon_limited=True,
            note="integral is identically zero; growth rate -inf",
        )
    t = ts[mask]
    L = np.log(Q[mask]) / t
    basis = np.stack([np.ones_like(t), 1.0 / t, np.log(t) / t], axis=1)
    coef, *_ = np.linalg.lstsq(basis, L, rcond=None)
    limit = float(coef[0])
    excess = (limit - cap) / max(1.0, abs(cap))
    return HypothesisVerdict(
        name=name,
        passed=excess <= EXTRAPOLATION_SLACK,
        violation=excess,
        worst_t=float(t[-1]),
        horizon_limited=True,
        note=f"extrapolated growth rate {limit:.6g} vs cap {cap:.6g}",
    )


# ---------------------------------------------------------------------------
# best decay rate for the plain template

def best_lambda_T33(
    lyap: LyapunovFn,
    spec: SdeSpec,
    b: AmbiguityBounds,
    grid: CheckGrid,
    p: float,
) -> float | None:
    """Largest lambda with LV <= -lambda V on the grid: inf of -LV/V.

    Returns None when the infimum is not positive (no decay certificate at
    any rate).  Requires the envelope hypothesis |x|^p <= V to hold on the
    grid.
    """
    XX, TT = grid.mesh()
    Vv = np.broadcast_to(
        np.asarray(evaluate(lyap.V, XX, TT), dtype=float), XX.shape
    )
    _require_positive_V(Vv, XX, TT)
    env = _pointwise("envelope", np.abs(XX) ** p, Vv, XX, TT)
    if not env.passed:
        raise CertificateError(
            f"|x|^p <= V fails on the grid (worst at x={env.worst_x:.6g}, "
            f"t={env.worst_t:.6g})"
        )
    Lv = np.broadcast_to(np.asarray(op_L(lyap, spec, b, XX, TT), dtype=float), XX.shape)
    lam = float(np.min(-Lv / Vv))
    return lam if lam > 0 else None


def _require_positive_V(Vv, XX, TT) -> None:
    bad = Vv <= 0
    if np.any(bad):
        k = int(np.argmax(bad))
        raise CertificateError(
            f"V must be positive away from x = 0; V <= 0 at "
            f"x={XX.flat[k]:.6g}, t={TT.flat[k]:.6g}"
        )


# ---------------------------------------------------------------------------
# the checker

def check_certificate(
    lyap: LyapunovFn,
    spec: SdeSpec,
    b: AmbiguityBounds,
    cert: CertificateSpec,
    grid: CheckGrid | None = None,
) -> CertificateReport:
    """Machine-check one certificate template; grant the implied rate bound
    iff every hypothesis passes on the grid."""
    if grid is None:
        grid = CheckGrid.default(t0=spec.t0)
    validate_certificate(cert, b)
    XX, TT = grid.mesh()
    ts = grid.ts

    Vv = np.broadcast_to(np.asarray(evaluate(lyap.V, XX, TT), dtype=float), XX.shape)
    _require_positive_V(Vv, XX, TT)
    Lv = np.broadcast_to(np.asarray(op_L(lyap, spec, b, XX, TT), dtype=float), XX.shape)
    Hv = np.broadcast_to(np.asarray(op_H(lyap, spec, XX, TT), dtype=float), XX.shape)

    caveats = []
    for name, e in (
        ("V", lyap.V),
        ("f", spec.f),
        ("g", spec.g),
    ):
        if contains_nonsmooth(e):
            caveats.append(
                f"{name} uses abs/sign: derivatives are formal and do not "
                f"exist at the kink (x = 0 caveat)"
            )

    hyps: list[HypothesisVerdict] = []
    lam = cert.lam
    theorem = cert.theorem

    if theorem == "T33":
        if lam is None:
            XXr = XX
            ratios = -Lv / Vv
            lam_best = float(np.min(ratios))
            if lam_best > 0:
                lam = lam_best
                k = int(np.argmin(ratios))
                hyps.append(
                    HypothesisVerdict(
                        name="decay",
                        passed=True,
                        violation=0.0,
                        worst_x=float(XXr.flat[k]),
                        worst_t=float(TT.flat[k]),
                        note=f"best decay rate lambda = {lam:.12g}",
                    )
                )
            else:
                k = int(np.argmin(ratios))
                hyps.append(
                    HypothesisVerdict(
                        name="decay",
                        passed=False,
                        violation=-lam_best,
                        worst_x=float(XXr.flat[k]),
                        worst_t=float(TT.flat[k]),
                        note=f"no positive rate: inf(-LV/V) = {lam_best:.12g}",
                    )
                )
        else:
            hyps.append(_pointwise("decay", Lv, -lam * Vv, XX, TT))
        hyps.insert(0, _pointwise("envelope", np.abs(XX) ** cert.p, Vv, XX, TT))
        bound = None if lam is None else -lam / cert.p

    elif theorem == "T34":
        phi_grid = _time_weight(cert.phi, ts)
        phi_mesh = phi_grid[None, :]
        hyps.append(_pointwise("envelope", np.abs(XX) ** cert.p, Vv, XX, TT))
        hyps.append(_pointwise("drift", Lv, lam * phi_mesh * Vv, XX, TT))
        hyps.append(
            _pointwise("noise_floor", cert.rho * phi_mesh * Vv * Vv, Hv, XX, TT)
        )
        hyps.append(_cesaro_lower("time_average", phi_grid, ts, cert.kappa))
        bound = -(cert.kappa / cert.p) * (b.v_lower * cert.rho / 2 - lam)

    elif theorem == "T35":
        nu_grid = np.polynomial.polynomial.polyval(ts, np.asarray(cert.nu_coeffs))
        nu_mesh = nu_grid[None, :]
        decay_mesh = np.exp(-lam * ts)[None, :]
        hyps.append(_pointwise("envelope", np.abs(XX) ** cert.p, Vv, XX, TT))
        hyps.append(
            _pointwise("drift", Lv, -lam * Vv + nu_mesh * decay_mesh, XX, TT)
        )
        hyps.append(
            _pointwise("noise_ceiling", Hv, nu_mesh * decay_mesh * Vv, XX, TT)
        )
        hyps.append(_nu_dominates_t(cert.nu_coeffs, nu_grid, ts))
        bound = -lam / cert.p

    elif theorem == "T36":
        phi_grid = _time_weight(cert.phi, ts)
        phi_mesh = phi_grid[None, :]
        growth = np.exp(lam * TT)
        weight = cert.eta * (1.0 + TT) ** (-cert.q)
        hyps.append(
            _pointwise("envelope", growth * np.abs(XX) ** cert.p, Vv, XX, TT)
        )
        hyps.append(
            _pointwise(
                "drift",
                Lv + weight * Hv,
                phi_mesh * (1.0 + Vv**cert.beta_exp),
                XX,
                TT,
            )
        )
        hyps.append(_loggrowth_cap("weight_growth", phi_grid, ts, 0.0))
        bound = -lam / cert.p

    elif theorem == "T37":
        phi1_grid = _time_weight(cert.phi1, ts)
        phi2_grid = _time_weight(cert.phi2, ts)
        growth = np.exp(lam * TT)
        weight = b.v_upper * cert.eta * np.exp(-cert.q * TT)
        hyps.append(
            _pointwise("envelope", growth * np.abs(XX) ** cert.p, Vv, XX, TT)
        )
        hyps.append(
            _pointwise(
                "drift",
                Lv + weight * Hv,
                phi1_grid[None, :] + phi2_grid[None, :] * Vv**cert.beta_exp,
                XX,
                TT,
            )
        )
        hyps.append(_loggrowth_cap("weight1_growth", phi1_grid, ts, cert.q))
        hyps.append(
            _loggrowth_cap(
                "weight2_growth", phi2_grid, ts, cert.q * (1.0 - cert.beta_exp)
            )
        )
        bound = -(lam - cert.q) / cert.p

    else:  # T38, instability
        phi_grid = _time_weight(cert.phi, ts)
        phi_mesh = phi_grid[None, :]
        Llow = np.broadcast_to(
            np.asarray(op_L_lower(lyap, spec, b, XX, TT), dtype=float), XX.shape
        )
        hyps.append(_pointwise("envelope", Vv, np.abs(XX) ** cert.p, XX, TT))
        hyps.append(_pointwise("drift", lam * phi_mesh * Vv, Llow, XX, TT))
        hyps.append(
            _pointwise("noise_ceiling", Hv, cert.rho * phi_mesh * Vv * Vv, XX, TT)
        )
        hyps.append(_cesaro_lower("time_average", phi_grid, ts, cert.kappa))
        bound = (cert.kappa / cert.p) * (lam - b.v_upper * cert.rho / 2)

    granted = all(h.passed for h in hyps)
    return CertificateReport(
        theorem=theorem,
        hypotheses=tuple(hyps),
        granted=granted,
        bound=bound if granted else (bound if lam is not None else None),
        lam=lam,
        p=cert.p,
        caveats=tuple(caveats),
    )


def _time_weight(e: Expr, ts: np.ndarray) -> np.ndarray:
    vals = np.broadcast_to(
        np.asarray(evaluate(e, np.zeros_like(ts), ts), dtype=float), ts.shape
    ).copy()
    if np.any(vals < 0):
        raise CertificateError(
            f"time weight {to_source(e)!r} must be nonnegative on the grid"
        )
    return vals


def _nu_dominates_t(coeffs, nu_grid, ts) -> HypothesisVerdict:
    """nu(t) >= t on the grid plus a coefficient test that extends the
    inequality beyond the horizon (nu_1 >= 1, or a degree >= 2 term which
    eventually dominates t since all coefficients are positive)."""
    rel = (ts - nu_grid) / np.maximum(1.0, np.abs(ts))
    k = int(np.argmax(rel))
    grid_ok = float(rel[k]) <= REL_SLACK
    tail_ok = len(coeffs) > 2 or coeffs[1] >= 1.0 - REL_SLACK
    note = "coefficient tail check: " + (
        "dominates beyond horizon" if tail_ok else "nu_1 < 1 and degree 1"
    )
    return HypothesisVerdict(
        name="nu_dominates_t",
        passed=grid_ok and tail_ok,
        violation=float(rel[k]) if not grid_ok else (0.0 if tail_ok else 1.0),
        worst_t=float(ts[k]),
        note=note,
    )


# ---------------------------------------------------------------------------
# report serialization

def write_certificate_csv(path, report: CertificateReport) -> None:
    """One row per hypothesis: name, passed, violation, worst point,
    horizon flag, note."""

    def fmt(val) -> str:
        if val is None:
            return ""
        return format(float(val), ".17g")

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["hypothesis", "passed", "violation", "worst_x", "worst_t",
             "horizon_limited", "note"]
        )
        for h in report.hypotheses:
            writer.writerow(
                [
                    h.name,
                    "true" if h.passed else "false",
                    fmt(h.violation),
                    fmt(h.worst_x),
                    fmt(h.worst_t),
                    "true" if h.horizon_limited else "false",
                    h.note,
                ]
            )


def verdict_line(report: CertificateReport) -> str:
    if report.granted:
        side = "liminf rate >=" if report.theorem == "T38" else "limsup rate <="
        return (
            f"{report.theorem}: granted ({side} {format(report.bound, '.17g')})"
        )
    failed = ", ".join(h.name for h in report.hypotheses if not h.passed)
    return f"{report.theorem}: withheld (failed: {failed})"
