"""Monte Carlo estimation over scenario families.

The empirical counterpart of the certificates: simulate many paths of the
same SDE under each volatility scenario in a family, estimate the pathwise
exponential rate per scenario, and report the family supremum.  The same
engine estimates worst-case expectations of path functionals (the
empirical sublinear expectation: a max of per-scenario means) and checks
the exponential martingale inequality used by the pathwise arguments.

All paths of all scenarios reuse the same per-path Wiener streams, so
scenario comparisons are common-random-number comparisons and enlarging
the family can only raise the estimated supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import Expr, compile_fn, differentiate, free_variables
from .gcalc import AmbiguityBounds
from .integrator import EXPLOSION_THRESHOLD, METHODS, SdeSpec
from .scenario import (
    BangBangInTime,
    VolatilityScenario,
    WIENER_STREAM,
    enumerate_family,
    stream_generator,
    uniform_grid,
    variance_stream,
)

__all__ = [
    "EstimationError",
    "ScenarioExponent",
    "ExponentEstimate",
    "SublinearEstimate",
    "MartingaleCheckSpec",
    "MartingaleReport",
    "SearchResult",
    "FUNCTIONALS",
    "estimate_exponent",
    "estimate_sublinear_expectation",
    "adversarial_search",
    "martingale_bound_check",
]

_BLOCK_STEPS = 2048
_LOG_FLOOR = 1e-300
# fraction of the horizon treated as the asymptotic tail
_TAIL_FRACTION = 0.8

FUNCTIONALS = (
    "terminal_abs_pow",
    "running_max_abs",
    "terminal_b",
    "terminal_qv",
    "terminal_b_plus_qv",
    "constant",
)


class EstimationError(Exception):
    pass


def _centered_mean(vals: np.ndarray) -> float:
    """Exactly-rounded mean centered at the first value, so the mean of a
    constant array is that constant bit for bit."""
    if vals.size == 0:
        return float("nan")
    v0 = float(vals[0])
    return v0 + math.fsum(float(v) - v0 for v in vals) / vals.size


def _stderr(vals: np.ndarray) -> float:
    if vals.size < 2:
        return float("nan")
    return float(np.std(vals, ddof=1) / math.sqrt(vals.size))


# ---------------------------------------------------------------------------
# result records

@dataclass(frozen=True)
class ScenarioExponent:
    """Exponent statistics for one scenario.  mean/max/stderr are over the
    unflagged paths' tail-window rate maxima; slope is the fitted drift of
    the cross-path mean of log|X| over the tail window.  Flagged paths
    left the integration range (explosion or non-finite state)."""

    label: str
    mean: float
    max: float
    stderr: float
    slope: float
    n_paths: int
    n_flagged: int


@dataclass(frozen=True)
class ExponentEstimate:
    """Family of scenario estimates plus the two suprema.

    family_sup takes the worst single path over all scenarios (max of
    per-scenario maxima); family_sup_mean takes the worst scenario-average
    rate (max of per-scenario means) and is the quantity certificates
    bound.  Scenarios whose every path was flagged carry NaN statistics
    and do not enter either supremum.
    """

    scenarios: tuple[ScenarioExponent, ...]
    family_sup: float
    family_sup_mean: float
    n_paths: int
    horizon: float
    dt: float

    @property
    def argmax_label(self) -> str:
        best = max(
            (s for s in self.scenarios if not math.isnan(s.mean)),
            key=lambda s: s.mean,
        )
        return best.label


@dataclass(frozen=True)
class SublinearEstimate:
    """Empirical worst-case expectation: max over scenarios of the
    per-scenario Monte Carlo mean of one path functional."""

    value: float
    argmax_label: str
    functional: str
    labels: tuple[str, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    n_flagged: tuple[int, ...]
    n_paths: int


@dataclass(frozen=True)
class MartingaleCheckSpec:
    """Parameters of the exponential martingale bound check.

    The accumulated noise integral N(t) = sum eta(X, t) dB and its
    quadratic variation Q(t) = sum eta^2 v dtau must satisfy

        N(t) <= (gamma_k / 2) Q(t) + (theta / gamma_k) log g(k)

    for all t <= tau_k, for every k from some path-dependent k0 on.
    Defaults: tau_k = k, gamma_k = 1, g(k) = k, theta = 2.
    """

    eta: Expr
    k_max: int = 50
    theta: float = 2.0
    gamma: tuple[float, ...] | None = None
    tau: tuple[float, ...] | None = None
    growth: str = "k"

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not self.theta > 1:
            raise ValueError("theta must exceed 1")
        if not free_variables(self.eta) <= {"x", "t"}:
            raise ValueError("eta must be an expression in x and t")
        if self.gamma is not None:
            if len(self.gamma) != self.k_max or any(g <= 0 for g in self.gamma):
                raise ValueError("gamma needs k_max positive entries")
        if self.tau is not None:
            if len(self.tau) != self.k_max:
                raise ValueError("tau needs k_max entries")
            if self.tau[0] <= 0 or any(
                b <= a for a, b in zip(self.tau, self.tau[1:])
            ):
                raise ValueError("tau must be positive and strictly increasing")
        if self.growth not in ("k", "k^2", "exp"):
            raise ValueError("growth must be one of k, k^2, exp")

    def gammas(self) -> np.ndarray:
        if self.gamma is None:
            return np.ones(self.k_max)
        return np.asarray(self.gamma, dtype=float)

    def taus(self) -> np.ndarray:
        if self.tau is None:
            return np.arange(1, self.k_max + 1, dtype=float)
        return np.asarray(self.tau, dtype=float)

    def growth_values(self) -> np.ndarray:
        k = np.arange(1, self.k_max + 1, dtype=float)
        if self.growth == "k":
            return k
        if self.growth == "k^2":
            return k * k
        return np.exp(k)


@dataclass(frozen=True)
class MartingaleReport:
    """Outcome of the bound check over a path batch.

    k0 holds each path's smallest index from which the bound holds through
    k_max (-1 when even k_max fails); fraction_satisfied is the share of
    unflagged paths with a valid k0.  violation_fraction[k-1] is the share
    of unflagged paths violating the bound at index k; the union-bound
    prediction for it is g(k)^(-theta).
    """

    fraction_satisfied: float
    k0: np.ndarray
    violation_fraction: np.ndarray
    bounds: np.ndarray
    n_paths: int
    n_flagged: int
    scenario_label: str


@dataclass(frozen=True)
class SearchResult:
    """Outcome of an adversarial scenario search."""

    scenario: VolatilityScenario
    exponent: float
    evaluations: int
    baseline_complete: bool
    family_size: int


# ---------------------------------------------------------------------------
# batch engine

class _ExponentObserver:
    """Per-path running max of (log|X(t)| - log|x0|) / (t - t0) over the
    tail window, plus least-squares accumulators for the drift of the
    cross-path mean of log|X|."""

    def __init__(self, x0: float, t0: float, horizon: float, n_paths: int):
        self.t0 = t0
        self.window_start = t0 + _TAIL_FRACTION * horizon
        self.log_x0 = math.log(abs(x0))
        self.acc = np.full(n_paths, -np.inf)
        self.n = 0
        self.st = 0.0
        self.stt = 0.0
        self.sy = 0.0
        self.sty = 0.0

    def pre_step(self, i, t, X, v, dW, dB, dtau, alive):
        pass

    def post_step(self, i, t_next, X, alive):
        if t_next < self.window_start or not alive.any():
            return
        elapsed = t_next - self.t0
        logs = np.log(np.maximum(np.abs(X), _LOG_FLOOR)) - self.log_x0
        self.acc = np.where(alive, np.maximum(self.acc, logs / elapsed), self.acc)
        y = float(np.mean(logs[alive]))
        self.n += 1
        self.st += elapsed
        self.stt += elapsed * elapsed
        self.sy += y
        self.sty += elapsed * y

    def slope(self) -> float:
        denom = self.n * self.stt - self.st * self.st
        if self.n < 2 or denom == 0:
            return float("nan")
        return (self.n * self.sty - self.st * self.sy) / denom


class _FunctionalObserver:
    """Running max of |X|, accumulated driver B = sum dB, and accumulated
    quadratic variation QV = sum v dtau, all frozen once a path is flagged."""

    def __init__(self, x0: float, n_paths: int):
        self.runmax = np.full(n_paths, abs(x0))
        self.B = np.zeros(n_paths)
        self.QV = np.zeros(n_paths)

    def pre_step(self, i, t, X, v, dW, dB, dtau, alive):
        self.B[alive] += dB[alive]
        self.QV[alive] += v[alive] * dtau

    def post_step(self, i, t_next, X, alive):
        self.runmax = np.where(
            alive, np.maximum(self.runmax, np.abs(X)), self.runmax
        )


class _MartingaleObserver:
    """Tracks N = sum eta dB, Q = sum eta^2 v dtau, the running max of
    N - (gamma/2) Q per distinct gamma, and snapshots those maxima at the
    checkpoint times."""

    def __init__(self, eta_fn, gammas, snap_steps, n_paths):
        self.eta_fn = eta_fn
        self.N = np.zeros(n_paths)
        self.Q = np.zeros(n_paths)
        self.distinct = sorted(set(float(g) for g in gammas))
        self.runmax = {g: np.zeros(n_paths) for g in self.distinct}
        self.gammas = np.asarray(gammas, dtype=float)
        # snap_steps[j] = step index after which checkpoint j is reached
        self.snap_steps = snap_steps
        self.M = np.full((len(gammas), n_paths), np.nan)

    def pre_step(self, i, t, X, v, dW, dB, dtau, alive):
        eta = np.broadcast_to(
            np.asarray(self.eta_fn(X, t), dtype=float), X.shape
        )
        self.N[alive] += (eta * dB)[alive]
        self.Q[alive] += (eta * eta * v)[alive] * dtau
        for g in self.distinct:
            stat = self.N - 0.5 * g * self.Q
            self.runmax[g] = np.where(
                alive, np.maximum(self.runmax[g], stat), self.runmax[g]
            )

    def post_step(self, i, t_next, X, alive):
        for j in np.nonzero(self.snap_steps == i)[0]:
            self.M[j] = self.runmax[float(self.gammas[j])]


@dataclass
class _BatchResult:
    X: np.ndarray
    flagged: np.ndarray

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())


def _run_batch(
    spec: SdeSpec,
    scenario: VolatilityScenario,
    b: AmbiguityBounds,
    grid: np.ndarray,
    seed: int,
    n_paths: int,
    method: str,
    observers,
) -> _BatchResult:
    """Advance n_paths together, one vectorized step at a time.

    Path p consumes the same Wiener stream it has in sample_path, drawn in
    blocks; a path whose state leaves [-threshold, threshold] or turns
    non-finite is flagged, frozen at NaN, and ignored by the observers
    from then on.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    n_steps = grid.size - 1
    f_fn = compile_fn(spec.f)
    g_fn = compile_fn(spec.g)
    gx_fn = compile_fn(differentiate(spec.g, "x")) if method == "milstein" else None
    var_fn = variance_stream(scenario, b, grid, seed, np.arange(n_paths))
    gens = [stream_generator(seed, WIENER_STREAM, p) for p in range(n_paths)]

    X = np.full(n_paths, float(spec.x0))
    alive = np.ones(n_paths, dtype=bool)
    flagged = np.zeros(n_paths, dtype=bool)
    block = np.empty((n_paths, 0))
    sqrt_dtau = np.sqrt(np.diff(grid))

    with np.errstate(all="ignore"):
        for i in range(n_steps):
            j = i % _BLOCK_STEPS
            if j == 0:
                width = min(_BLOCK_STEPS, n_steps - i)
                tmp = np.empty((n_paths, width))
                for p, gen in enumerate(gens):
                    tmp[p] = gen.standard_normal(width)
                block = np.ascontiguousarray(tmp.T)
            t = grid[i]
            dtau = grid[i + 1] - grid[i]
            dW = block[j] * sqrt_dtau[i]
            v = np.broadcast_to(
                np.asarray(var_fn(i, t, X), dtype=float), X.shape
            )
            dB = np.sqrt(v) * dW
            for obs in observers:
                obs.pre_step(i, t, X, v, dW, dB, dtau, alive)
            Xn = X + f_fn(X, t) * dtau + g_fn(X, t) * dB
            if gx_fn is not None:
                Xn = Xn + 0.5 * g_fn(X, t) * np.broadcast_to(
                    np.asarray(gx_fn(X, t), dtype=float), X.shape
                ) * v * (dW * dW - dtau)
            bad = alive & ~(np.abs(Xn) <= EXPLOSION_THRESHOLD)
            if bad.any():
                flagged |= bad
                alive &= ~bad
            X = np.where(alive, Xn, np.nan)
            for obs in observers:
                obs.post_step(i, grid[i + 1], X, alive)
    return _BatchResult(X=X, flagged=flagged)


def _validate_run(spec, horizon, dt, n_paths):
    if spec.x0 == 0:
        raise EstimationError("x0 must be nonzero (rates normalize by |x0|)")
    if n_paths < 1:
        raise EstimationError("n_paths must be >= 1")
    if not (horizon > 0 and dt > 0):
        raise EstimationError("horizon and dt must be positive")
    if dt > horizon:
        raise EstimationError("dt must not exceed the horizon")


# ---------------------------------------------------------------------------
# exponent estimation

def _scenario_exponent(
    spec, scenario, b, grid, seed, n_paths, method, horizon
) -> ScenarioExponent:
    obs = _ExponentObserver(spec.x0, spec.t0, horizon, n_paths)
    res = _run_batch(spec, scenario, b, grid, seed, n_paths, method, [obs])
    ok = ~res.flagged
    if not ok.any():
        return ScenarioExponent(
            label=scenario.label(),
            mean=float("nan"),
            max=float("nan"),
            stderr=float("nan"),
            slope=float("nan"),
            n_paths=n_paths,
            n_flagged=n_paths,
        )
    vals = obs.acc[ok]
    return ScenarioExponent(
        label=scenario.label(),
        mean=_centered_mean(vals),
        max=float(np.max(vals)),
        stderr=_stderr(vals),
        slope=obs.slope(),
        n_paths=n_paths,
        n_flagged=res.n_flagged,
    )


def estimate_exponent(
    spec: SdeSpec,
    scenarios,
    b: AmbiguityBounds,
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    method: str = "euler",
) -> ExponentEstimate:
    """Estimate the pathwise exponential rate per scenario and the family
    suprema.

    Each path's rate is the max over the tail window (the last fifth of
    the horizon) of (1/(t - t0)) log|X(t)/x0|.  Scenarios where every path
    was flagged are reported with NaN statistics; if that happens for the
    whole family the estimate is refused.
    """
    _validate_run(spec, horizon, dt, n_paths)
    scenarios = list(scenarios)
    if not scenarios:
        raise EstimationError("need at least one scenario")
    grid = uniform_grid(spec.t0, horizon, dt)
    per = [
        _scenario_exponent(spec, s, b, grid, seed, n_paths, method, horizon)
        for s in scenarios
    ]
    means = [s.mean for s in per if not math.isnan(s.mean)]
    maxes = [s.max for s in per if not math.isnan(s.max)]
    if not means:
        raise EstimationError(
            "every path of every scenario was flagged; no rate estimate"
        )
    return ExponentEstimate(
        scenarios=tuple(per),
        family_sup=max(maxes),
        family_sup_mean=max(means),
        n_paths=n_paths,
        horizon=horizon,
        dt=dt,
    )


# ---------------------------------------------------------------------------
# sublinear expectation of path functionals

def _functional_values(name, p, res: _BatchResult, obs: _FunctionalObserver):
    if name == "terminal_abs_pow":
        return np.abs(res.X) ** p
    if name == "running_max_abs":
        return obs.runmax
    if name == "terminal_b":
        return obs.B
    if name == "terminal_qv":
        return obs.QV
    if name == "terminal_b_plus_qv":
        return obs.B + obs.QV
    raise EstimationError(f"unknown functional {name!r}")


def estimate_sublinear_expectation(
    functional: str,
    spec: SdeSpec,
    scenarios,
    b: AmbiguityBounds,
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    p: float = 1.0,
    constant_value: float = 1.0,
    method: str = "euler",
) -> SublinearEstimate:
    """Worst-case expectation of a path functional over the scenario set:
    the max over scenarios of the per-scenario sample mean.

    Functionals: terminal_abs_pow (|X_T|^p), running_max_abs (max |X|),
    terminal_b (B_T), terminal_qv (accumulated quadratic variation),
    terminal_b_plus_qv, constant (no simulation; exact by construction).
    Means use exactly-rounded centered summation, so constants pass
    through bit for bit and common-random-number comparisons are exact.
    """
    if functional not in FUNCTIONALS:
        raise EstimationError(f"unknown functional {functional!r}")
    scenarios = list(scenarios)
    if not scenarios:
        raise EstimationError("need at least one scenario")
    labels = tuple(s.label() for s in scenarios)
    if functional == "constant":
        means = tuple(float(constant_value) for _ in scenarios)
        return SublinearEstimate(
            value=float(constant_value),
            argmax_label=labels[0],
            functional=functional,
            labels=labels,
            means=means,
            stderrs=tuple(0.0 for _ in scenarios),
            n_flagged=tuple(0 for _ in scenarios),
            n_paths=n_paths,
        )
    _validate_run(spec, horizon, dt, n_paths)
    grid = uniform_grid(spec.t0, horizon, dt)
    means = []
    stderrs = []
    flagged = []
    for s in scenarios:
        obs = _FunctionalObserver(spec.x0, n_paths)
        res = _run_batch(spec, s, b, grid, seed, n_paths, method, [obs])
        ok = ~res.flagged
        vals = _functional_values(functional, p, res, obs)[ok]
        means.append(_centered_mean(vals))
        stderrs.append(_stderr(vals))
        flagged.append(res.n_flagged)
    finite = [m for m in means if not math.isnan(m)]
    if not finite:
        raise EstimationError("every scenario was fully flagged")
    value = max(finite)
    argmax = labels[means.index(value)]
    return SublinearEstimate(
        value=value,
        argmax_label=argmax,
        functional=functional,
        labels=labels,
        means=tuple(means),
        stderrs=tuple(stderrs),
        n_flagged=tuple(flagged),
        n_paths=n_paths,
    )


# ---------------------------------------------------------------------------
# adversarial scenario search

def adversarial_search(
    spec: SdeSpec,
    b: AmbiguityBounds,
    budget: int,
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    richness: int = 3,
    max_switches: int = 3,
    method: str = "euler",
) -> SearchResult:
    """Search for the scenario with the largest mean pathwise rate.

    Phase one evaluates the deterministic family from enumerate_family;
    phase two runs coordinate descent on the switch times of an
    alternating band-edge schedule (both starting phases), spending the
    remaining budget.  Every evaluation reuses the same Wiener streams, so
    objective comparisons are noise-free and the result can never fall
    below the best family member actually evaluated.  A scenario with any
    flagged path scores +inf (an escape to the integration boundary is the
    worst outcome for stability).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not (1 <= max_switches <= 4):
        raise ValueError("max_switches must be in 1..4")
    _validate_run(spec, horizon, dt, n_paths)
    grid = uniform_grid(spec.t0, horizon, dt)

    def objective(s) -> float:
        est = _scenario_exponent(spec, s, b, grid, seed, n_paths, method, horizon)
        if est.n_flagged > 0:
            return float("inf")
        return est.mean

    family = enumerate_family(b, richness)
    evaluations = 0
    best: tuple[float, VolatilityScenario] | None = None
    for s in family:
        if evaluations >= budget:
            break
        val = objective(s)
        evaluations += 1
        if best is None or val > best[0]:
            best = (val, s)
    baseline_complete = evaluations >= len(family)

    lo, hi = b.v_lower, b.v_upper

    def schedule(times, start_high):
        first = hi if start_high else lo
        second = lo if start_high else hi
        levels = tuple(first if j % 2 == 0 else second for j in range(len(times)))
        return BangBangInTime(tuple(times), levels)

    if baseline_complete and evaluations < budget:
        m = max_switches
        times = [horizon * (j + 1) / (m + 1) for j in range(m)]
        phases = {}
        for start_high in (True, False):
            if evaluations >= budget:
                break
            cand = schedule(times, start_high)
            val = objective(cand)
            evaluations += 1
            phases[start_high] = val
            if val > best[0]:
                best = (val, cand)
        if phases:
            start_high = max(phases, key=phases.get)
            current = list(times)
            current_val = phases[start_high]
            improving = True
            while improving and evaluations < budget:
                improving = False
                for ci in range(m):
                    left = current[ci - 1] if ci > 0 else 0.0
                    right = current[ci + 1] if ci + 1 < m else horizon
                    span = right - left
                    for frac in (0.25, 0.5, 0.75):
                        if evaluations >= budget:
                            break
                        t_new = left + frac * span
                        if abs(t_new - current[ci]) < dt or t_new <= left:
                            continue
                        trial = current.copy()
                        trial[ci] = t_new
                        cand = schedule(sorted(trial), start_high)
                        val = objective(cand)
                        evaluations += 1
                        if val > current_val:
                            current = sorted(trial)
                            current_val = val
                            improving = True
                            if val > best[0]:
                                best = (val, cand)
                    if evaluations >= budget:
                        break

    return SearchResult(
        scenario=best[1],
        exponent=best[0],
        evaluations=evaluations,
        baseline_complete=baseline_complete,
        family_size=len(family),
    )


# ---------------------------------------------------------------------------
# martingale bound check

def martingale_bound_check(
    mspec: MartingaleCheckSpec,
    spec: SdeSpec,
    scenario: VolatilityScenario,
    b: AmbiguityBounds,
    n_paths: int,
    seed: int,
    dt: float = 1e-3,
    method: str = "euler",
) -> MartingaleReport:
    """Check the exponential martingale bound along simulated paths.

    Integrates the SDE to tau_(k_max), accumulates N and its quadratic
    variation, and snapshots the running max of N - (gamma_k/2) Q at each
    checkpoint tau_k.  k0 per path is the first index from which the bound
    holds through k_max.
    """
    if n_paths < 1:
        raise EstimationError("n_paths must be >= 1")
    taus = mspec.taus()
    gammas = mspec.gammas()
    horizon = float(taus[-1])
    _validate_run(spec, horizon, dt, n_paths)
    grid = uniform_grid(spec.t0, horizon, dt)
    dt_actual = (grid[-1] - grid[0]) / (grid.size - 1)
    # checkpoint j lands after the step ending nearest tau_j
    snap_steps = np.clip(
        np.rint((taus - grid[0]) / dt_actual).astype(np.int64) - 1,
        0,
        grid.size - 2,
    )
    eta_fn = compile_fn(mspec.eta)
    obs = _MartingaleObserver(eta_fn, gammas, snap_steps, n_paths)
    res = _run_batch(spec, scenario, b, grid, seed, n_paths, method, [obs])

    bounds = (mspec.theta / gammas) * np.log(mspec.growth_values())
    ok = obs.M <= bounds[:, None]
    ok_suffix = np.flip(np.logical_and.accumulate(np.flip(ok, 0), 0), 0)
    k0 = np.where(
        ok_suffix.any(axis=0), ok_suffix.argmax(axis=0) + 1, -1
    ).astype(np.int64)
    unflagged = ~res.flagged
    n_ok = int(unflagged.sum())
    if n_ok == 0:
        raise EstimationError("every path was flagged; no martingale check")
    fraction = float(np.mean(k0[unflagged] != -1))
    violation = np.mean(~ok[:, unflagged], axis=1)
    return MartingaleReport(
        fraction_satisfied=fraction,
        k0=k0,
        violation_fraction=violation,
        bounds=bounds,
        n_paths=n_paths,
        n_flagged=res.n_flagged,
        scenario_label=scenario.label(),
    )
