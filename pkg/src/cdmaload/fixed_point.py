"""Multiuser-efficiency fixed points and free-energy selection.

The large-system multiuser efficiency solves ``eta = W(eta)`` with
``W(eta) = 1 / (1 + beta gamma mmse(eta gamma, alpha))``.  Up to three roots
exist; the operational one minimizes the free energy.
"""

import enum
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import NoCoexistenceError, NumericalError
from .load_analysis import BoundaryCase, db_to_linear, region_boundaries
from .scalar_channel import TernaryPrior, mmse, mutual_information

ETA_GRID_FLOOR = 1e-6
DEFAULT_GRID_N = 4000
ROOT_TOL = 1e-12
DEDUP_TOL = 1e-9
SLOPE_STEP = 1e-6
DEGENERATE_SLOPE = 1e-6
FREE_ENERGY_FORMS = ("stationary", "conditional", "marginal")


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    DEGENERATE = "degenerate"


class Region(enum.Enum):
    GOOD = "good"
    BAD = "bad"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class ChannelPoint:
    """Operating point: linear SNR per active user, activity rate, maximum load."""

    gamma: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")

    @classmethod
    def from_db(cls, snr_db, alpha, beta):
        return cls(float(db_to_linear(snr_db)), float(alpha), float(beta))

    @property
    def prior(self):
        return TernaryPrior(self.alpha)

    @property
    def actual_load(self):
        return self.alpha * self.beta


@dataclass(frozen=True)
class FixedPointSolution:
    eta: float
    stability: Stability
    region: Region
    slope: float
    free_energy: Optional[float] = None


@dataclass
class SolutionDiagram:
    point: ChannelPoint
    solutions: List[FixedPointSolution]
    operational_index: Optional[int] = None
    tie: bool = False
    grid_n: int = DEFAULT_GRID_N

    @property
    def operational(self):
        if self.operational_index is None:
            return None
        return self.solutions[self.operational_index]

    @property
    def n_solutions(self):
        return len(self.solutions)

    @property
    def has_degenerate(self):
        return any(s.stability is Stability.DEGENERATE for s in self.solutions)


def rhs_W(eta, point):
    """Right-hand side of the fixed-point equation; vectorized in ``eta``."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0) or np.any(eta > 1):
        raise ValueError("eta must lie in (0, 1]")
    if point.beta == 0 or point.gamma == 0:
        out = np.ones_like(eta)
    else:
        out = 1.0 / (1.0 + point.beta * point.gamma * mmse(eta * point.gamma, point.prior))
    return out if np.ndim(out) else float(out)


def _residual(eta, point):
    return rhs_W(eta, point) - np.asarray(eta, dtype=float)


def _slope(eta, point):
    lo = max(eta - SLOPE_STEP, ETA_GRID_FLOOR * 0.5)
    hi = min(eta + SLOPE_STEP, 1.0)
    f = _residual(np.array([lo, hi]), point)
    return float((f[1] - f[0]) / (hi - lo))


def classify_region(eta, point):
    """Good/bad/intermediate relative to the closed-form region edges.

    Below the coexistence threshold the edges do not exist and every root is
    reported as intermediate.
    """
    if point.alpha == 0.0:
        return Region.GOOD
    try:
        rb = region_boundaries(point.gamma, BoundaryCase.for_alpha(point.alpha))
    except NoCoexistenceError:
        return Region.INTERMEDIATE
    if eta >= rb.eta_M:
        return Region.GOOD
    if eta <= rb.eta_m:
        return Region.BAD
    return Region.INTERMEDIATE


def _solution(eta, point):
    slope = _slope(eta, point)
    if abs(slope) < DEGENERATE_SLOPE:
        stab = Stability.DEGENERATE
    else:
        stab = Stability.STABLE if slope < 0 else Stability.UNSTABLE
    return FixedPointSolution(eta, stab, classify_region(eta, point), slope)


def _roots_on_grid(point, grid_n):
    grid = np.linspace(ETA_GRID_FLOOR, 1.0, grid_n + 1)
    f = _residual(grid, point)
    roots = []
    cells = []
    for i in range(grid_n + 1):
        if f[i] == 0.0:
            roots.append(float(grid[i]))
            cells.append(i)
    for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]:
        r = brentq(lambda x: float(_residual(x, point)), grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15)
        roots.append(r)
        cells.append(int(i))
    order = np.argsort(roots)
    return [roots[k] for k in order], [cells[k] for k in order], grid, f


def find_fixed_points(point, grid_n=DEFAULT_GRID_N, max_grid_n=64000):
    """All roots of ``W(eta) = eta`` on (1e-6, 1], ascending.

    Sign changes on a uniform grid are refined by Brent's method; the grid is
    doubled while two roots share adjacent cells.  Free energies are not
    filled in; see :func:`solve`.
    """
    if grid_n < 1000:
        raise ValueError("grid_n must be at least 1000")
    if point.beta == 0 or point.gamma == 0 or point.alpha == 0:
        return SolutionDiagram(point, [_solution(1.0, point)], grid_n=grid_n)
    while True:
        roots, cells, grid, f = _roots_on_grid(point, grid_n)
        crowded = any(b - a <= 1 for a, b in zip(cells, cells[1:]))
        if not crowded or grid_n * 2 > max_grid_n:
            break
        grid_n *= 2
    deduped = []
    for r in roots:
        if not deduped or r - deduped[-1] > DEDUP_TOL:
            deduped.append(r)
    if not deduped:
        raise NumericalError(
            f"no fixed point found at {point}: f(floor)={f[0]:.3e}, f(1)={f[-1]:.3e}"
        )
    for r in deduped:
        res = abs(float(_residual(r, point)))
        if res > ROOT_TOL:
            raise NumericalError(f"root {r} has residual {res:.3e}", estimate=r, error=res)
    return SolutionDiagram(point, [_solution(r, point) for r in deduped], grid_n=grid_n)


def free_energy(eta, point, form="stationary"):
    """Free energy of a candidate efficiency, in nats.

    ``stationary`` (default) is ``I(eta gamma) + (eta - 1 - ln eta) / (2 beta)``,
    whose derivative vanishes exactly at the fixed points.  ``conditional``
    and ``marginal`` are the two readings of the entropy term in the
    textbook expression: with the channel-conditional density the entropy
    cancels and leaves ``eta ln(2 pi / eta) / (2 beta)``; with the output
    marginal it becomes the mutual information plus that term.
    """
    if form not in FREE_ENERGY_FORMS:
        raise ValueError(f"form must be one of {FREE_ENERGY_FORMS}")
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(eta_arr <= 0) or np.any(eta_arr > 1):
        raise ValueError("eta must lie in (0, 1]")
    if point.beta <= 0:
        raise ValueError("free energy needs beta > 0")
    penalty_coef = 1.0 / (2.0 * point.beta)
    if form == "conditional":
        out = penalty_coef * eta_arr * np.log(2.0 * np.pi / eta_arr)
    else:
        info = mutual_information(eta_arr * point.gamma, point.prior)
        if form == "stationary":
            out = info + penalty_coef * (eta_arr - 1.0 - np.log(eta_arr))
        else:
            out = info + penalty_coef * eta_arr * np.log(2.0 * np.pi / eta_arr)
    return out if np.ndim(out) else float(out)


def free_energy_slope(eta, point):
    """Analytic derivative of the stationary free energy."""
    s = eta * point.gamma
    return 0.5 * point.gamma * mmse(s, point.prior) + (1.0 - 1.0 / eta) / (2.0 * point.beta)


def select_operational(diagram, point=None, form="stationary", tie_tol=1e-12):
    """Fill in free energies and mark the minimizer as operational.

    Only stable (or degenerate) roots compete; ties within ``tie_tol`` go to
    the larger efficiency and are flagged on the diagram.
    """
    point = point or diagram.point
    sols = diagram.solutions
    if not sols:
        raise ValueError("empty solution diagram")
    if point.beta == 0 or point.gamma == 0:
        energies = [0.0] * len(sols)
    else:
        energies = list(free_energy(np.array([s.eta for s in sols]), point, form))
    sols = [
        FixedPointSolution(s.eta, s.stability, s.region, s.slope, float(e))
        for s, e in zip(sols, energies)
    ]
    candidates = [i for i, s in enumerate(sols) if s.stability is not Stability.UNSTABLE]
    if not candidates:
        candidates = list(range(len(sols)))
    best_f = min(sols[i].free_energy for i in candidates)
    tied = [i for i in candidates if sols[i].free_energy - best_f <= tie_tol * max(1.0, abs(best_f))]
    diagram.solutions = sols
    diagram.operational_index = max(tied, key=lambda i: sols[i].eta)
    diagram.tie = len(tied) > 1
    return diagram.solutions[diagram.operational_index]


def solve(point, grid_n=DEFAULT_GRID_N, form="stationary"):
    """Roots, free energies and operational choice in one call."""
    diagram = find_fixed_points(point, grid_n)
    select_operational(diagram, point, form)
    return diagram


def efficiency_curve(gamma_grid, alpha, beta, grid_n=DEFAULT_GRID_N, form="stationary"):
    """Operational efficiency along an ascending SNR grid (linear units).

    Returns a list of solution diagrams so that jumps and solution counts
    stay visible to the caller.
    """
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    if np.any(np.diff(gamma_grid) < 0):
        raise ValueError("gamma grid must be sorted ascending")
    return [solve(ChannelPoint(float(g), alpha, beta), grid_n, form) for g in gamma_grid]
