"""Decoupled single-user channel ``y = sqrt(s) * b + z`` with ternary input.

``b`` takes values -1, 0, +1 with probabilities alpha/2, 1 - alpha, alpha/2
and ``z`` is standard normal.  ``s`` is the effective SNR (multiuser
efficiency times per-user SNR).

Everything here accepts scalar or array ``s``; array inputs are evaluated as
one batch, which is what the fixed-point scans rely on for speed.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, logsumexp

from . import _quadrature as quad
from .errors import InfeasibleError, NumericalError

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
SYMBOLS = np.array([-1, 0, 1])

# Truncation of the Gaussian weight: phi(9.5) is ~1e-20 relative to phi(0).
_Y_SPAN = 9.5


@dataclass(frozen=True)
class TernaryPrior:
    """Activity-rate prior on {-1, 0, +1}."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0 or not np.isfinite(self.alpha):
            raise ValueError(f"activity rate must lie in [0, 1], got {self.alpha!r}")

    @property
    def masses(self):
        """Probabilities of -1, 0, +1."""
        a = self.alpha
        return np.array([a / 2.0, 1.0 - a, a / 2.0])

    @property
    def log_masses(self):
        with np.errstate(divide="ignore"):
            return np.log(self.masses)

    @property
    def mean(self):
        return 0.0

    @property
    def second_moment(self):
        return self.alpha


@dataclass(frozen=True)
class MmseBoundPair:
    lower: float
    upper: float
    degenerate: bool = False


def _as_prior(prior):
    return prior if isinstance(prior, TernaryPrior) else TernaryPrior(float(prior))


def _check_snr(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("effective SNR must be finite and nonnegative")
    return s


def lambda_alpha(alpha):
    """Decision-threshold offset ln(2(1 - alpha)/alpha); zero at alpha = 2/3."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("lambda_alpha is finite only for alpha in (0, 1)")
    return np.log(2.0 * (1.0 - alpha) / alpha)


def q_function(x):
    """Gaussian tail probability."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def _log_posteriors(y, s, prior):
    # log P(b) + log phi(y - sqrt(s) b), unnormalized, last axis over SYMBOLS
    y = np.asarray(y, dtype=float)[..., None]
    rs = np.sqrt(np.asarray(s, dtype=float))[..., None]
    return prior.log_masses - 0.5 * (y - rs * SYMBOLS) ** 2


def posterior_probabilities(y, s, prior):
    """P(b = -1, 0, +1 | y) along a trailing axis of length 3."""
    prior = _as_prior(prior)
    lp = _log_posteriors(y, _check_snr(s), prior)
    return np.exp(lp - logsumexp(lp, axis=-1, keepdims=True))


def posterior_mean(y, s, prior):
    """Conditional-mean estimate E[b | y]; odd in ``y``."""
    p = posterior_probabilities(y, s, prior)
    return p[..., 2] - p[..., 0]


def map_decision(y, s, prior):
    """MAP symbol decision.

    Ties between +1 and -1 can only happen at ``y == 0``; that point is
    mapped to 0 so the rule stays odd in ``y`` for every prior.
    """
    prior = _as_prior(prior)
    s = _check_snr(s)
    if np.any(s <= 0):
        raise ValueError("MAP decision needs s > 0")
    y = np.asarray(y, dtype=float)
    if prior.alpha == 0.0:
        return np.zeros(np.shape(y), dtype=int)
    if prior.alpha == 1.0:
        return np.sign(y).astype(int)
    lp = _log_posteriors(y, s, prior)
    dec = SYMBOLS[np.argmax(lp, axis=-1)]
    return np.where(y == 0, 0, dec)


def map_thresholds(s, prior):
    """|y| boundary between the 0 and +/-1 decision regions.

    Equals sqrt(s)/2 + lambda_alpha/sqrt(s); a nonpositive value means the
    zero region is empty.
    """
    prior = _as_prior(prior)
    rs = np.sqrt(_check_snr(s))
    return rs / 2.0 + lambda_alpha(prior.alpha) / rs


# ---------------------------------------------------------------- MMSE


def _log_mmse_integrand(s, alpha):
    """log of phi(y) * alpha * (alpha e^-w + c) / (alpha cosh w + c).

    Here w = s - y sqrt(s) and c = (1 - alpha) e^{s/2}.  This positive form
    equals phi(y) * [alpha - alpha^2 sinh w / (alpha cosh w + c)], so its
    integral is the MMSE without the cancellation of alpha minus an
    almost-equal integral.
    """
    la = np.log(alpha)
    half = s[:, None] / 2.0
    rs = np.sqrt(s)[:, None]

    def f(y):
        # numerator and denominator both scaled by e^{-max(|w|, s/2)}
        w = half * 2.0 - y * rs
        if alpha < 1.0:
            m = np.maximum(np.abs(w), half)
            ec = (1.0 - alpha) * np.exp(half - m)
        else:
            m = np.abs(w)
            ec = 0.0
        ep = np.exp(w - m)
        em = np.exp(-w - m)
        ratio = (alpha * em + ec) / (0.5 * alpha * (ep + em) + ec)
        with np.errstate(divide="ignore"):
            return -0.5 * y * y - LOG_SQRT_2PI + la + np.log(ratio)

    return f


def _mmse_breaks(s, alpha):
    rs = np.sqrt(np.maximum(s, 1e-300))
    if alpha < 1.0:
        lam = lambda_alpha(alpha)
        y1 = rs / 2.0 - lam / rs
        y2 = 1.5 * rs + lam / rs
    else:
        y1 = rs
        y2 = rs
    feats = np.stack([y1, y2, rs], axis=1)
    lo = np.full_like(s, -_Y_SPAN)
    hi = np.maximum(_Y_SPAN, np.minimum(y1, 1.5 * rs) + _Y_SPAN)
    h = np.minimum(0.5, 1.0 / rs)
    return quad.graded_breakpoints(lo, hi, feats, h)


def log_mmse(s, prior, return_error=False):
    """Natural log of the MMSE, accurate in relative terms at any SNR.

    At s = 1e4 the MMSE is near exp(-1250), far below the double range, but
    its logarithm is still computed to full relative precision.
    """
    prior = _as_prior(prior)
    s = _check_snr(s)
    shape = s.shape
    flat = s.ravel()
    alpha = prior.alpha
    out = np.full(flat.shape, -np.inf)
    err = np.zeros(flat.shape)
    if alpha > 0.0:
        zero = flat == 0.0
        out[zero] = np.log(alpha)
        pos = ~zero
        if np.any(pos):
            sp = flat[pos]
            breaks = _mmse_breaks(sp, alpha)
            val, e = quad.log_integrate(_log_mmse_integrand(sp, alpha), breaks)
            out[pos] = val
            err[pos] = e
    out = out.reshape(shape)
    if return_error:
        return out, err.reshape(shape)
    return out if shape else float(out)


def mmse(s, prior):
    """MMSE of the conditional-mean estimator; lies in [0, alpha]."""
    prior = _as_prior(prior)
    val = np.exp(log_mmse(s, prior))
    if np.any(val > prior.alpha * (1 + 1e-12)):
        raise NumericalError("MMSE quadrature exceeded the prior variance", estimate=val)
    return val


def mmse_binary(s):
    """MMSE for equiprobable BPSK, 1 - E[tanh(s - y sqrt(s))]."""
    return mmse(s, TernaryPrior(1.0))


def mmse_bounds(s, prior):
    """High-SNR lower and upper bounds on the MMSE.

    ``2 sqrt(a(1-a)/(pi s)) e^{-s/8}`` below and
    ``2 a e^{-s/2} + sqrt(pi a (1-a) / s) e^{-s/8}`` above.  They are only
    meaningful for large s; :data:`BOUND_SNR_FLOOR` is where the sandwich
    has been verified.  For alpha in {0, 1} the activity terms vanish and
    the pair is flagged degenerate.
    """
    prior = _as_prior(prior)
    s = float(s)
    if s <= 0:
        raise ValueError("bounds need s > 0")
    a = prior.alpha
    v = a * (1.0 - a)
    lower = 2.0 * np.sqrt(v / (np.pi * s)) * np.exp(-s / 8.0)
    upper = 2.0 * a * np.exp(-s / 2.0) + np.sqrt(np.pi * v / s) * np.exp(-s / 8.0)
    return MmseBoundPair(lower, upper, degenerate=a in (0.0, 1.0))


BOUND_SNR_FLOOR = 20.0


# -------------------------------------------------------- mutual information


def _mi_terms(s, prior):
    """E_z[log sum_b' P(b') exp(-sqrt(s)(b - b') z - s (b - b')^2 / 2)] per b.

    Returned for b = 0 and b = +1 (b = -1 mirrors +1).
    """
    lm = prior.log_masses
    rs = np.sqrt(np.maximum(s, 1e-300))
    h = np.minimum(0.5, 1.0 / rs)
    lo = np.full_like(s, -10.0)
    hi = np.full_like(s, 10.0)
    alpha = prior.alpha
    lam = lambda_alpha(alpha) if 0.0 < alpha < 1.0 else 0.0
    t = rs / 2.0 + lam / rs
    diffs = {0: np.array([-1, 0, 1]), 1: np.array([2, 1, 0])}
    feats = {
        0: np.stack([t, -t, np.zeros_like(t)], axis=1),
        1: np.stack([-(rs / 2 - lam / rs), -rs, -(1.5 * rs + lam / rs)], axis=1),
    }
    out = {0: 0.0}
    for b, d in diffs.items():
        if prior.masses[b + 1] == 0.0:
            continue
        breaks = quad.graded_breakpoints(lo, hi, feats[b], h)

        def f(z, d=d):
            terms = (
                lm[None, None, :]
                - rs[:, None, None] * d[None, None, :] * z[:, :, None]
                - s[:, None, None] * d[None, None, :] ** 2 / 2.0
            )
            return np.exp(-0.5 * z * z - LOG_SQRT_2PI) * logsumexp(terms, axis=-1)

        out[b], _ = quad.integrate(f, breaks)
    return out


def mutual_information(s, prior):
    """I(b; y) in nats for the ternary-input Gaussian channel.

    Computed from the mixture likelihood ratio directly, so the relation
    dI/ds = mmse/2 is an independent check rather than a construction.
    """
    prior = _as_prior(prior)
    s = _check_snr(s)
    shape = s.shape
    flat = s.ravel()
    out = np.zeros(flat.shape)
    pos = flat > 0
    if np.any(pos) and 0.0 < prior.alpha:
        terms = _mi_terms(flat[pos], prior)
        p = prior.masses
        val = -(p[1] * terms[0] + 2.0 * p[2] * terms[1])
        out[pos] = np.maximum(val, 0.0)
    out = out.reshape(shape)
    return out if shape else float(out)


# ---------------------------------------------------------- error probability


def error_probability(s, prior):
    """Symbol error probability of the ternary MAP detector.

    ``2(1-a) Q(sqrt(s)/2 + lam/sqrt(s)) + a Q(sqrt(s)/2 - lam/sqrt(s))`` with
    ``lam = ln(2(1-a)/a)``.  At alpha = 1 the zero symbol never occurs and the
    rule is BPSK, so Q(sqrt(s)) is returned.
    """
    prior = _as_prior(prior)
    a = prior.alpha
    s = _check_snr(s)
    if np.any(s <= 0):
        raise ValueError("error probability needs s > 0")
    rs = np.sqrt(s)
    if a == 1.0:
        out = q_function(rs)
    elif a == 0.0:
        raise ValueError("error probability is undefined for alpha = 0")
    else:
        lam = lambda_alpha(a)
        out = 2.0 * (1.0 - a) * q_function(rs / 2.0 + lam / rs) + a * q_function(
            rs / 2.0 - lam / rs
        )
    return out if np.ndim(out) else float(out)


def invert_error_probability(pe_target, gamma, prior, floor=1e-12, grid=400):
    """Smallest efficiency eta in (0, 1] meeting ``pe_target`` from above.

    Scans eta downward from 1 on a log grid until the error probability
    first exceeds the target, then bisects that cell.  The error probability
    must be nonincreasing in eta over the scanned part; if it is not, the
    inversion is ambiguous and :class:`NumericalError` is raised.
    """
    prior = _as_prior(prior)
    if not 0.0 < pe_target < 0.5:
        raise ValueError("target error probability must lie in (0, 0.5)")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    top = error_probability(gamma, prior)
    if top > pe_target:
        raise InfeasibleError(
            f"target unreachable: P_e at eta=1 is {top:.4g} > {pe_target:.4g}",
            best=top,
        )
    etas = np.concatenate([[1.0], 1.0 - np.geomspace(1e-6, 1.0 - floor, grid)])
    pe = error_probability(etas * gamma, prior)
    above = np.nonzero(pe > pe_target)[0]
    if len(above) == 0:
        raise InfeasibleError(
            f"target {pe_target:.4g} is met down to eta={floor:g}; "
            "the pre-image lies outside (0, 1]",
            best=float(pe[-1]),
        )
    i = above[0]
    seg = pe[: i + 1]
    if np.any(np.diff(seg) < -1e-12 * seg[1:]):
        raise NumericalError("error probability is not monotone on the inversion bracket")
    lo, hi = etas[i], etas[i - 1]

    def g(eta):
        return error_probability(eta * gamma, prior) - pe_target

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return float(hi)
