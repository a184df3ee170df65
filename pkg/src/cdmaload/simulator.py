"""Exact finite-size CDMA simulation with exhaustive optimum detection.

Model: ``y = sqrt(gamma) S b + z`` with binary spreading chips ``+-1/sqrt(N)``,
i.i.d. ternary symbols and unit-variance Gaussian noise.  Both the
individually optimum (per-user marginal MAP) and jointly optimum (vector
MAP) detectors enumerate all ``3^K`` hypotheses, so ``K`` is capped at 12.

Randomness: frame ``i`` draws from ``Generator(Philox(SeedSequence((seed, i))))``,
a counter-based stream independent of how frames are batched or ordered.
"""

import functools
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from .scalar_channel import (
    SYMBOLS,
    TernaryPrior,
    _as_prior,
    error_probability,
    mmse,
    posterior_mean,
)

K_MAX = 12
Z_95 = 1.959963984540054
CONFUSIONS = ("false_alarm", "missed_detection", "flip")


@dataclass(frozen=True)
class SimConfig:
    K: int
    N: int
    gamma: float
    alpha: float
    frames: int
    seed: int
    batch: int = 256

    def __post_init__(self):
        if not 1 <= self.K <= K_MAX:
            raise ValueError(f"K must lie in 1..{K_MAX}, got {self.K}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")

    @property
    def beta(self):
        return self.K / self.N

    @property
    def prior(self):
        return TernaryPrior(self.alpha)


@dataclass
class Frame:
    S: np.ndarray
    b: np.ndarray
    y: np.ndarray


@dataclass
class RateEstimate:
    rate: float
    ci_half_width: float
    errors: int
    trials: int

    @classmethod
    def from_counts(cls, errors, trials):
        p = errors / trials
        return cls(p, Z_95 * math.sqrt(p * (1.0 - p) / trials), int(errors), int(trials))


@dataclass
class SimReport:
    config: dict
    frames_run: int
    ser_io: RateEstimate
    ser_jo: RateEstimate
    breakdown_io: dict
    breakdown_jo: dict
    empirical_mmse: float
    mmse_std_error: float
    jo_ties: int
    predicted: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def frame_rng(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index))))


def generate_frame(config, index):
    """Frame ``index`` of the run; deterministic in ``(config.seed, index)``."""
    rng = frame_rng(config.seed, index)
    K, N = config.K, config.N
    S = np.where(rng.random((N, K)) < 0.5, -1.0, 1.0) / math.sqrt(N)
    b = rng.choice(SYMBOLS, size=K, p=config.prior.masses).astype(float)
    z = rng.standard_normal(N)
    y = math.sqrt(config.gamma) * (S @ b) + z
    return Frame(S, b, y)


@functools.lru_cache(maxsize=None)
def hypotheses(K):
    """All 3^K symbol vectors in lexicographic order over (-1, 0, +1)."""
    return np.array(list(itertools.product(SYMBOLS, repeat=K)), dtype=float)


@functools.lru_cache(maxsize=None)
def _pair_products(K):
    # row h holds vec(h h^T), so h^T G h = vec(G) . row
    H = hypotheses(K)
    return (H[:, :, None] * H[:, None, :]).reshape(len(H), K * K)


@functools.lru_cache(maxsize=None)
def _marginal_indicator(K):
    # column 3k + x selects hypotheses with user k at SYMBOLS[x]
    H = hypotheses(K)
    cols = [(H[:, k] == x) for k in range(K) for x in SYMBOLS]
    return np.stack(cols, axis=1).astype(float)


def _log_prior(K, prior):
    H = hypotheses(K)
    lm = prior.log_masses
    idx = (H + 1).astype(int)
    return lm[idx].sum(axis=1)


def joint_log_posterior(frames, config):
    """Unnormalized log posterior of every hypothesis, shape (batch, 3^K)."""
    H = hypotheses(config.K)
    S = np.stack([f.S for f in frames])
    y = np.stack([f.y for f in frames])
    sg = math.sqrt(config.gamma)
    mf = np.einsum("bnk,bn->bk", S, y)
    gram = np.matmul(S.transpose(0, 2, 1), S).reshape(len(frames), -1)
    quad = gram @ _pair_products(config.K).T
    ll = sg * (mf @ H.T) - 0.5 * config.gamma * quad
    return ll + _log_prior(config.K, config.prior)[None, :]


def io_detect(frames, config, log_domain=True):
    """Per-user posteriors over (-1, 0, +1), decisions and posterior means.

    Returns ``(posteriors, decisions, means)`` with shapes
    ``(batch, K, 3)``, ``(batch, K)`` and ``(batch, K)``.
    """
    single = isinstance(frames, Frame)
    frames = [frames] if single else list(frames)
    post, decisions, means = _io_from_log_posterior(
        joint_log_posterior(frames, config), config.K, log_domain
    )
    if single:
        return post[0], decisions[0], means[0]
    return post, decisions, means


def _io_from_log_posterior(lp, K, log_domain=True):
    B = lp.shape[0]
    if log_domain:
        # shift by the per-frame maximum before exponentiating
        w = np.exp(lp - np.max(lp, axis=1, keepdims=True))
    else:
        w = np.exp(lp)
    marg = (w @ _marginal_indicator(K)).reshape(B, K, 3)
    post = marg / w.sum(axis=1)[:, None, None]
    decisions = SYMBOLS[np.argmax(post, axis=2)].astype(float)
    means = post[:, :, 2] - post[:, :, 0]
    return post, decisions, means


def jo_detect(frames, config):
    """Vector MAP decision; ties go to the lexicographically first hypothesis.

    Returns ``(decisions, tie_flags)``.
    """
    single = isinstance(frames, Frame)
    frames = [frames] if single else list(frames)
    dec, ties = _jo_from_log_posterior(joint_log_posterior(frames, config), config.K)
    if single:
        return dec[0], bool(ties[0])
    return dec, ties


def _jo_from_log_posterior(lp, K):
    best = np.argmax(lp, axis=1)
    top = lp[np.arange(len(best)), best]
    ties = (lp == top[:, None]).sum(axis=1) > 1
    return hypotheses(K)[best], ties


def confusion_counts(b, decisions):
    b = np.asarray(b)
    d = np.asarray(decisions)
    return {
        "false_alarm": int(np.sum((b == 0) & (d != 0))),
        "missed_detection": int(np.sum((b != 0) & (d == 0))),
        "flip": int(np.sum((b != 0) & (d == -b))),
    }


def predicted_performance(config):
    """Large-system prediction at the configured load."""
    from .fixed_point import ChannelPoint, solve

    point = ChannelPoint(config.gamma, config.alpha, config.beta)
    eta = solve(point).operational.eta
    s = eta * config.gamma
    pe = error_probability(s, config.prior) if config.alpha > 0 else 0.0
    return {"eta_operational": float(eta), "pe": float(pe), "mmse": float(mmse(s, config.prior))}


def run_monte_carlo(config, predict=True):
    """Simulate ``config.frames`` frames and aggregate error statistics.

    Aggregates are accumulated in frame order, so a given configuration
    always produces the same report.
    """
    io_err = jo_err = 0
    io_conf = dict.fromkeys(CONFUSIONS, 0)
    jo_conf = dict.fromkeys(CONFUSIONS, 0)
    sq_sum = 0.0
    sq_sq_sum = 0.0
    ties = 0
    for start in range(0, config.frames, config.batch):
        idx = range(start, min(start + config.batch, config.frames))
        frames = [generate_frame(config, i) for i in idx]
        b = np.stack([f.b for f in frames])
        lp = joint_log_posterior(frames, config)
        _, io_dec, means = _io_from_log_posterior(lp, config.K)
        jo_dec, tie = _jo_from_log_posterior(lp, config.K)
        io_err += int(np.sum(io_dec != b))
        jo_err += int(np.sum(jo_dec != b))
        for key, v in confusion_counts(b, io_dec).items():
            io_conf[key] += v
        for key, v in confusion_counts(b, jo_dec).items():
            jo_conf[key] += v
        # per-frame squared errors added sequentially: order-fixed reduction
        sq = (b - means) ** 2
        for v, v2 in zip(np.sum(sq, axis=1), np.sum(sq * sq, axis=1)):
            sq_sum += float(v)
            sq_sq_sum += float(v2)
        ties += int(np.sum(tie))
    trials = config.frames * config.K
    m = sq_sum / trials
    var = max(sq_sq_sum / trials - m * m, 0.0)
    report = SimReport(
        config=asdict(config),
        frames_run=config.frames,
        ser_io=RateEstimate.from_counts(io_err, trials),
        ser_jo=RateEstimate.from_counts(jo_err, trials),
        breakdown_io=io_conf,
        breakdown_jo=jo_conf,
        empirical_mmse=m,
        mmse_std_error=math.sqrt(var / trials),
        jo_ties=ties,
    )
    if predict and config.gamma > 0:
        report.predicted = predicted_performance(config)
    return report


def empirical_mmse_scalar(s, prior, samples, seed, chunk=1_000_000):
    """Monte Carlo MMSE of the scalar channel and its standard error."""
    prior = _as_prior(prior)
    if samples < 10_000:
        raise ValueError("samples must be at least 10^4")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        b = rng.choice(SYMBOLS, size=n, p=prior.masses).astype(float)
        y = math.sqrt(s) * b + rng.standard_normal(n)
        err = (b - posterior_mean(y, s, prior)) ** 2
        total += float(np.sum(err))
        total_sq += float(np.sum(err * err))
        done += n
    m = total / samples
    var = max(total_sq / samples - m * m, 0.0) * samples / (samples - 1)
    return m, math.sqrt(var / samples)
