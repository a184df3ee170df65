"""System-load function, its high-SNR bounds and the spinodal lines.

The load function ``upsilon(gamma, eta) = (1 - eta) / (eta gamma mmse(eta gamma))``
is the fixed-point equation solved for the load: every root ``eta`` of the
fixed-point equation at load ``beta`` satisfies ``upsilon(eta) == beta``.
Above the coexistence threshold it has an interior local minimum (the
transition load, below which only the good solution exists) and an interior
local maximum (the critical load, above which only the bad solution exists).
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import NoCoexistenceError, NumericalError
from .scalar_channel import (
    TernaryPrior,
    _as_prior,
    invert_error_probability,
    log_mmse,
)

TERNARY_THRESHOLD = 4.0 * (3.0 + 2.0 * math.sqrt(2.0))
ALPHA_ONE_THRESHOLD = 3.0 + 2.0 * math.sqrt(2.0)
G_THRESHOLD = (3.0 + math.sqrt(8.0)) / 2.0

SPINODAL_GRID = 2000
GOLDEN_XTOL = 1e-10
ETA_FLOOR = 1e-6


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


class BoundaryCase(enum.Enum):
    TERNARY_ALPHA = "ternary"
    ALPHA_ONE = "alpha_one"

    @classmethod
    def for_alpha(cls, alpha):
        return cls.ALPHA_ONE if alpha == 1.0 else cls.TERNARY_ALPHA


@dataclass(frozen=True)
class RegionBoundaries:
    """Closed-form edges of the bad region (0, eta_m] and good region [eta_M, 1]."""

    eta_m: float
    eta_M: float
    delta: float
    case: BoundaryCase


@dataclass(frozen=True)
class LoadBoundPair:
    lower_L: float
    upper_U: float


@dataclass(frozen=True)
class SpinodalPoint:
    """Transition and critical loads at one SNR.

    Both loads are ``None`` when the load function is monotone (no phase
    coexistence).  ``eta_transition``/``eta_critical`` locate the local
    minimum and maximum of the load function.  ``region`` and the two bound
    pairs come from the closed-form high-SNR analysis and are reported
    independently of whether the numerical extrema exist.
    """

    gamma: float
    beta_transition: Optional[float] = None
    beta_critical: Optional[float] = None
    eta_transition: Optional[float] = None
    eta_critical: Optional[float] = None
    near_critical: bool = False
    log_beta_transition: Optional[float] = None
    log_beta_critical: Optional[float] = None
    region: Optional[RegionBoundaries] = None
    bounds_at_eta_m: Optional[LoadBoundPair] = None
    bounds_at_eta_M: Optional[LoadBoundPair] = None

    @property
    def snr_db(self):
        return float(linear_to_db(self.gamma))

    @property
    def coexistence(self):
        return self.beta_critical is not None


@dataclass(frozen=True)
class SingleSolutionBoundaries:
    eta_bc: float
    eta_gc: float
    eta_bc_bound: Optional[float]
    eta_gc_bound: Optional[float]
    spinodal: SpinodalPoint
    gap_gc: float = 0.0


@dataclass(frozen=True)
class MaxLoadResult:
    eta_max: float
    eta_p: float
    eta_gc: Optional[float]
    bounds: LoadBoundPair
    upsilon: float

    @property
    def limited_by(self):
        if self.eta_gc is not None and self.eta_gc >= self.eta_p:
            return "coexistence"
        return "error_probability"


# ------------------------------------------------------------ closed forms


def g_function(eta, u):
    """(1 - eta) e^{u eta} / sqrt(eta), the eta-shape of the high-SNR load bounds."""
    eta = np.asarray(eta, dtype=float)
    return (1.0 - eta) * np.exp(u * eta) / np.sqrt(eta)


def g_function_critical_points(u):
    """Local minimum and maximum of :func:`g_function` on (0, 1).

    Exist iff ``u >= (3 + sqrt(8)) / 2``; at the threshold they coincide.
    """
    disc = u * u - 3.0 * u + 0.25
    if u < G_THRESHOLD:
        raise NoCoexistenceError(
            f"G has no critical points for u={u:g} < {G_THRESHOLD:.6f}",
            threshold=G_THRESHOLD,
        )
    root = math.sqrt(max(disc, 0.0))
    return (u - 0.5 - root) / (2.0 * u), (u - 0.5 + root) / (2.0 * u)


def region_boundaries(gamma, case=BoundaryCase.TERNARY_ALPHA):
    """Bad/good region edges eta_m < eta_M from the high-SNR bounds.

    These depend on the SNR only, not on the activity rate.
    """
    case = BoundaryCase(case)
    if case is BoundaryCase.TERNARY_ALPHA:
        threshold = TERNARY_THRESHOLD
        disc = (gamma / 8.0) ** 2 - 3.0 * gamma / 8.0 + 0.25
    else:
        threshold = ALPHA_ONE_THRESHOLD
        disc = (gamma / 2.0) ** 2 - 3.0 * gamma / 2.0 + 0.25
    # the discriminant vanishes at the threshold; tolerate rounding there
    if gamma < threshold * (1.0 - 1e-12):
        raise NoCoexistenceError(
            f"no coexistence possible below gamma={threshold:.6f} "
            f"({linear_to_db(threshold):.2f} dB)",
            threshold=threshold,
        )
    d = math.sqrt(max(disc, 0.0))
    if case is BoundaryCase.TERNARY_ALPHA:
        eta_m = (gamma / 2.0 - 2.0 - 4.0 * d) / gamma
        eta_M = (gamma / 2.0 - 2.0 + 4.0 * d) / gamma
    else:
        eta_m = (gamma / 2.0 - 0.5 - d) / gamma
        eta_M = (gamma / 2.0 - 0.5 + d) / gamma
    return RegionBoundaries(eta_m, eta_M, d, case)


def load_bounds(gamma, eta, prior):
    """L < upsilon < U at high effective SNR, for alpha strictly inside (0, 1).

    ``U / L`` is exactly pi/2.
    """
    prior = _as_prior(prior)
    a = prior.alpha
    if not 0.0 < a < 1.0:
        raise ValueError("load bounds need alpha in (0, 1); use alpha_one_load_bounds")
    if not 0.0 < eta < 1.0 or gamma <= 0:
        raise ValueError("load bounds need 0 < eta < 1 and gamma > 0")
    return _bound_pair(gamma, eta, 1.0 - eta, prior)


def alpha_one_load_bounds(gamma, eta):
    """All-users-active counterpart of :func:`load_bounds` (e^{s/2} decay)."""
    if not 0.0 < eta < 1.0 or gamma <= 0:
        raise ValueError("load bounds need 0 < eta < 1 and gamma > 0")
    return _bound_pair(gamma, eta, 1.0 - eta, TernaryPrior(1.0))


def _bound_pair(gamma, eta, eps, prior):
    # overflows to inf rather than raising at very high SNR
    with np.errstate(over="ignore"):
        lo = float(np.exp(_log_bound_pair(gamma, eta, eps, prior, "L")))
        hi = float(np.exp(_log_bound_pair(gamma, eta, eps, prior, "U")))
    return LoadBoundPair(lo, hi)


def guaranteed_load(epsilon, gamma, prior):
    """Load below which efficiency 1 - epsilon is guaranteed at high SNR.

    This is the lower load bound evaluated at eta = 1 - epsilon.
    """
    prior = _as_prior(prior)
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return load_bounds(gamma, 1.0 - epsilon, prior).lower_L


# ------------------------------------------------------- the load function


def log_upsilon(gamma, eta, prior):
    """Natural log of the load function; finite where upsilon overflows."""
    prior = _as_prior(prior)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0) or np.any(eta > 1):
        raise ValueError("eta must lie in (0, 1]")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    with np.errstate(divide="ignore"):
        out = np.log1p(-eta) - np.log(eta) - math.log(gamma) - log_mmse(eta * gamma, prior)
    return out if np.ndim(out) else float(out)


def upsilon(gamma, eta, prior):
    """Load at which ``eta`` solves the fixed-point equation; 0 at eta = 1."""
    with np.errstate(over="ignore"):
        out = np.exp(log_upsilon(gamma, eta, prior))
    return out if np.ndim(out) else float(out)


def _eta_grid(n=SPINODAL_GRID):
    # log-spaced toward both ends: extrema crowd 0 and 1 at high SNR
    half = n // 2
    low = np.geomspace(ETA_FLOOR, 0.5, half)
    high = 1.0 - np.geomspace(ETA_FLOOR, 0.5, n - half)[::-1]
    return np.unique(np.concatenate([low, high]))


def _golden(fun, a, b, c):
    res = minimize_scalar(
        fun, bracket=(a, b, c), method="golden", options={"xtol": GOLDEN_XTOL}
    )
    if not res.success:
        raise NumericalError(f"golden-section search failed: {res.message}")
    return float(res.x), float(res.fun)


def _bound_fields(gamma, prior):
    if prior.alpha == 0.0:
        return {}
    case = BoundaryCase.for_alpha(prior.alpha)
    try:
        rb = region_boundaries(gamma, case)
    except NoCoexistenceError:
        return {}
    if case is BoundaryCase.ALPHA_ONE:
        def pair(eta):
            return alpha_one_load_bounds(gamma, eta)
    else:
        def pair(eta):
            return load_bounds(gamma, eta, prior)
    return dict(region=rb, bounds_at_eta_m=pair(rb.eta_m), bounds_at_eta_M=pair(rb.eta_M))


def spinodal_loads(gamma, prior):
    """Locate the interior extrema of the load function at one SNR.

    A 2000-point grid brackets the extrema and golden-section search on
    log(upsilon) refines them.  Only the true load function is trusted, so
    close to the threshold the result may report no coexistence even where
    the closed-form region edges exist.
    """
    prior = _as_prior(prior)
    extra = _bound_fields(gamma, prior)
    grid = _eta_grid()
    lu = log_upsilon(gamma, grid, prior)
    d = np.diff(lu)
    turns = np.nonzero(np.sign(d[1:]) != np.sign(d[:-1]))[0] + 1
    turns = [i for i in turns if d[i - 1] != 0 and d[i] != 0]
    if not turns:
        return SpinodalPoint(gamma, **extra)
    if len(turns) != 2 or not (d[turns[0] - 1] < 0 < d[turns[0]]):
        raise NumericalError(
            f"unexpected load-function shape at gamma={gamma:g}: "
            f"{len(turns)} turning points"
        )
    i_min, i_max = turns

    def f(x):
        return log_upsilon(gamma, x, prior)

    def g(x):
        return -log_upsilon(gamma, x, prior)

    eta_lo, val_lo = _golden(f, grid[i_min - 1], grid[i_min], grid[i_min + 1])
    eta_hi, val_hi = _golden(g, grid[i_max - 1], grid[i_max], grid[i_max + 1])
    val_hi = -val_hi
    near = (i_max - i_min) <= 2 or (val_hi - val_lo) < 1e-9
    with np.errstate(over="ignore"):
        return SpinodalPoint(
            gamma,
            beta_transition=float(np.exp(val_lo)),
            beta_critical=float(np.exp(val_hi)),
            eta_transition=eta_lo,
            eta_critical=eta_hi,
            near_critical=bool(near),
            log_beta_transition=val_lo,
            log_beta_critical=val_hi,
            **extra,
        )


def spinodal_curve(gamma_grid, prior):
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    if np.any(np.diff(gamma_grid) < 0):
        raise ValueError("gamma grid must be sorted ascending")
    return [spinodal_loads(g, prior) for g in gamma_grid]


def coexistence_threshold(prior, lo_db=0.0, hi_db=30.0, tol_db=1e-3):
    """Smallest SNR (dB) where the load function has two interior extrema."""
    prior = _as_prior(prior)

    def has(db):
        return spinodal_loads(float(db_to_linear(db)), prior).coexistence

    if has(lo_db) or not has(hi_db):
        raise NumericalError(f"threshold not bracketed by [{lo_db}, {hi_db}] dB")
    while hi_db - lo_db > tol_db:
        mid = 0.5 * (lo_db + hi_db)
        if has(mid):
            hi_db = mid
        else:
            lo_db = mid
    return hi_db


# ------------------------------------------------------------- pre-images

# log of the smallest double handled when scanning toward either end of (0, 1)
_LOG_TINY = -690.0
_SCAN_HALF = 400


def _log_upsilon_pair(gamma, eta, eps, prior):
    # eps = 1 - eta carried separately so the load stays accurate near eta = 1
    return np.log(eps) - np.log(eta) - math.log(gamma) - log_mmse(eta * gamma, prior)


def _log_bound_pair(gamma, eta, eps, prior, which):
    a = prior.alpha
    if a == 1.0:
        base = np.log(eps) + eta * gamma / 2.0 - 0.5 * np.log(np.pi * eta * gamma)
    else:
        base = np.log(eps) + eta * gamma / 8.0 - 0.5 * np.log(np.pi * eta * gamma * a * (1 - a))
    return base + math.log(math.pi / 2.0) if which == "U" else base


def _scan_roots(log_fun, log_target):
    """All solutions of log_fun(eta, 1 - eta) = log_target on (0, 1).

    The lower half is scanned and bisected in log(eta), the upper half in
    log(1 - eta), so roots within 1e-300 of either end are still resolved.
    Returns ``(eta, 1 - eta)`` pairs in ascending eta.
    """
    mid = math.log(0.5)
    t = np.linspace(_LOG_TINY, mid, _SCAN_HALF)
    v = np.linspace(mid, _LOG_TINY, _SCAN_HALF)[1:]

    def low(x):
        return math.exp(x), -math.expm1(x)

    def high(x):
        return -math.expm1(x), math.exp(x)

    roots = []
    for to_pair, coord in ((low, t), (high, v)):
        pairs = np.array([to_pair(x) for x in coord])
        vals = log_fun(pairs[:, 0], pairs[:, 1]) - log_target
        for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            def g(x, to_pair=to_pair):
                e, d = to_pair(x)
                return float(log_fun(np.array([e]), np.array([d]))[0]) - log_target

            x = brentq(g, coord[i], coord[i + 1], xtol=1e-13, rtol=1e-15)
            roots.append(to_pair(x))
    return sorted(roots)


def single_solution_boundaries(gamma, prior):
    """Edges of the single-bad (0, eta_bc) and single-good (eta_gc, 1] regions.

    ``eta_bc`` is the smallest pre-image of the critical load and ``eta_gc``
    the largest pre-image of the transition load.  The bound-based
    counterparts use U for the former and L for the latter.  ``gap_gc`` is
    ``1 - eta_gc`` computed without cancellation.  At very high SNR the edges
    come within 1e-300 of the ends of (0, 1) and are reported as 0 and 1.
    """
    prior = _as_prior(prior)
    sp = spinodal_loads(gamma, prior)
    if not sp.coexistence:
        raise NoCoexistenceError(f"no phase coexistence at gamma={gamma:g}")
    lb_crit = sp.log_beta_critical
    lb_trans = sp.log_beta_transition

    def lu(eta, eps):
        return _log_upsilon_pair(gamma, eta, eps, prior)

    bc = _scan_roots(lu, lb_crit)
    gc = _scan_roots(lu, lb_trans)
    # an empty list means the pre-image lies within 1e-300 of the interval end
    eta_bc = bc[0][0] if bc else 0.0
    eta_gc, gap_gc = gc[-1] if gc else (1.0, 0.0)
    upper = _scan_roots(lambda e, d: _log_bound_pair(gamma, e, d, prior, "U"), lb_crit)
    lower = _scan_roots(lambda e, d: _log_bound_pair(gamma, e, d, prior, "L"), lb_trans)
    # the bounds share G's critical points, so keep only outer-branch roots
    bc_bound = gc_bound = None
    if sp.region is not None:
        upper = [e for e, _ in upper if e <= sp.region.eta_m]
        lower = [e for e, _ in lower if e >= sp.region.eta_M]
        bc_bound = upper[0] if upper else 0.0
        gc_bound = lower[-1] if lower else 1.0
    return SingleSolutionBoundaries(
        eta_bc=eta_bc,
        eta_gc=eta_gc,
        eta_bc_bound=bc_bound,
        eta_gc_bound=gc_bound,
        spinodal=sp,
        gap_gc=gap_gc,
    )


def max_load_for_pe(pe_target, gamma, prior):
    """Largest load meeting an error-probability target in the good region.

    The efficiency requirement is the larger of the error-probability
    pre-image and the single-good-solution edge; the load function and its
    bounds are evaluated there.  When the edge wins, the load is the
    transition load itself.
    """
    prior = _as_prior(prior)
    eta_p = float(invert_error_probability(pe_target, gamma, prior))
    sp = spinodal_loads(gamma, prior)
    ssb = single_solution_boundaries(gamma, prior) if sp.coexistence else None
    if ssb is not None and ssb.eta_gc >= eta_p:
        eta_max, gap, load = ssb.eta_gc, ssb.gap_gc, sp.beta_transition
    else:
        eta_max, gap = eta_p, 1.0 - eta_p
        load = upsilon(gamma, eta_p, prior) if eta_p < 1.0 else 0.0
    if prior.alpha == 0.0 or gap == 0.0:
        bounds = LoadBoundPair(float("nan"), float("nan"))
    else:
        bounds = _bound_pair(gamma, eta_max, gap, prior)
    return MaxLoadResult(
        eta_max=eta_max,
        eta_p=eta_p,
        eta_gc=ssb.eta_gc if ssb else None,
        bounds=bounds,
        upsilon=float(load),
    )
