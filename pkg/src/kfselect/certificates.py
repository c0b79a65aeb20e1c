"""Approximate-supermodularity certificates and greedy guarantees.

alpha bounds the multiplicative violation of diminishing returns,
Delta_u f(A) >= alpha Delta_u f(B); epsilon the additive one,
Delta_u f(A) >= Delta_u f(B) - epsilon, for A subset of B and u not in B.
Greedy selection after r steps then satisfies

    f(G_r) <= (1 - exp(-alpha r / s)) f(X*)
    f(G_r) <= (1 - exp(-r / s)) (f(X*) + s epsilon)
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import covariance, numerics
from .errors import ConfigurationError, SizeError

EXHAUSTIVE_MAX_GROUND = 10
GAIN_TOL = 1e-12

REPORT_FIELDS = (
    "kind",
    "scalarization",
    "alpha_bound",
    "epsilon_bound",
    "guarantee_multiplicative",
    "guarantee_additive_slack",
    "numerical_range_delta",
)


@dataclass
class CertificateReport:
    alpha_bound: float
    epsilon_bound: float
    per_step_alpha: list
    per_step_epsilon: list
    guarantee_multiplicative: float
    guarantee_additive_slack: float
    numerical_range_delta: float
    spectral_details: dict = field(default_factory=dict)
    kind: str = "filtering"
    scalarization: str = "trace"
    schedule: str = "empty"

    def to_dict(self):
        return asdict(self)

    def csv_row(self):
        return [getattr(self, name) for name in REPORT_FIELDS]


def _active(theta):
    return [k for k, t in enumerate(theta) if t > 0]


def alpha_bound_trace(horizon, theta):
    """Per-step lambda_min(M_empty) / lambda_max(M_empty + sum_u M_u).

    The aggregate is the minimum over steps with positive weight.
    """
    per_step = []
    for model in horizon:
        lo = numerics.lambda_min(model.M_empty)
        hi = numerics.lambda_max(model.M_empty + model.M_total)
        per_step.append(lo / hi)
    alpha = min(per_step[k] for k in _active(theta))
    return alpha, per_step


def alpha_bound_numrange(horizon, theta):
    """1 - Delta where Delta is the relative diameter of the numerical range.

    Delta_k = (lambda_max[Y_k(empty)] - lambda_min[Y_k(O)]) / lambda_max[Y_k(empty)].
    Returns ``(min_k (1 - Delta_k), max_k Delta_k)`` over weighted steps.
    """
    deltas = []
    for model in horizon:
        top = numerics.lambda_max(numerics.psd_inverse(model.M_empty))
        bottom = numerics.lambda_min(numerics.psd_inverse(model.M_empty + model.M_total))
        deltas.append((top - bottom) / top)
    active = _active(theta)
    return min(1.0 - deltas[k] for k in active), max(deltas[k] for k in active)


def epsilon_bound_specnorm(horizon, theta):
    """Per-step lambda_max(sum_u M_u) / lambda_min(M_empty)^2, combined with weights."""
    per_step = []
    for model in horizon:
        lo = numerics.lambda_min(model.M_empty)
        per_step.append(numerics.lambda_max(model.M_total) / lo**2)
    epsilon = math.fsum(t * e for t, e in zip(theta, per_step))
    return epsilon, per_step


def guarantees(alpha, epsilon, f_opt, r, s):
    """Return (1 - e^{-alpha r/s}, (1 - e^{-r/s}) (f_opt + s epsilon))."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    if epsilon < 0:
        raise ConfigurationError(f"epsilon must be non-negative, got {epsilon}")
    if r < 1 or s < 1:
        raise ConfigurationError("r and s must be at least 1")
    mult = -math.expm1(-alpha * r / s)
    additive = -math.expm1(-r / s) * (f_opt + s * epsilon)
    return mult, additive


def _report(horizon, cfg, per_alpha, per_eps, schedule, details):
    active = _active(cfg.theta)
    alpha = min(per_alpha[k] for k in active)
    eps_raw = math.fsum(t * e for t, e in zip(cfg.theta, per_eps))
    _, delta = alpha_bound_numrange(horizon, cfg.theta)
    alpha = min(max(alpha, 0.0), 1.0)
    mult = -math.expm1(-alpha * cfg.r / cfg.s)
    details = dict(details, epsilon_raw=eps_raw)
    return CertificateReport(
        alpha_bound=alpha,
        epsilon_bound=max(eps_raw, 0.0),
        per_step_alpha=list(per_alpha),
        per_step_epsilon=list(per_eps),
        guarantee_multiplicative=mult,
        guarantee_additive_slack=cfg.s * max(eps_raw, 0.0),
        numerical_range_delta=delta,
        spectral_details=details,
        kind=cfg.kind,
        scalarization=cfg.scalarization,
        schedule=schedule,
    )


def filtering_certificates(sys, cfg, schedule="empty"):
    """Filtering alpha / epsilon bounds from the a priori covariances.

    alpha_k = lambda_min[P^-1] / lambda_max[P^-1 + sum_u V_u] and
    epsilon_k = lambda_max(sum_u V_u) lambda_max(P)^2 with
    P = P_{m+k|m+k-1}. The a priori covariances follow the Riccati
    recursion under ``schedule``: ``"empty"`` (no sensors, the default),
    ``"full"`` (all sensors) or an explicit collection of sensor indices.
    """
    if cfg.kind != "filtering":
        raise ConfigurationError("filtering certificates need kind='filtering'")
    if isinstance(schedule, str):
        if schedule == "empty":
            X, label = (), "empty"
        elif schedule == "full":
            X, label = tuple(range(sys.p)), "full"
        else:
            raise ConfigurationError(f"unknown schedule {schedule!r}")
    else:
        X = tuple(sorted(schedule))
        label = "set:" + ",".join(str(u) for u in X)
    horizon = covariance.filtering_horizon(sys, X, cfg.m, cfg.N)
    V_total = horizon[0].M_total
    v_max = numerics.lambda_max(V_total)
    per_alpha, per_eps, lmins, lmaxs = [], [], [], []
    for model in horizon:
        P_inv = model.M_empty
        lo = numerics.lambda_min(P_inv)
        hi = numerics.lambda_max(P_inv + V_total)
        p_max = 1.0 / lo
        per_alpha.append(lo / hi)
        per_eps.append(v_max * p_max**2)
        lmins.append(lo)
        lmaxs.append(hi)
    details = {"lambda_min_M_empty": lmins, "lambda_max_M_full": lmaxs}
    return _report(horizon, cfg, per_alpha, per_eps, label, details)


def smoothing_certificates(sys, cfg, max_dim=covariance.SMOOTHING_MAX_DIM):
    """Smoothing alpha / epsilon bounds.

    alpha_k = (1 / l_max) / lambda_max[C^-1 + sum_u Phi^T (I kron V_u) Phi]
    and epsilon_k = lambda_max[sum_u Phi^T (I kron V_u) Phi] l_max^2, with
    C = blkdiag(Pi0, I kron R_w) and l_max = max(lambda_max Pi0, lambda_max R_w).
    """
    if cfg.kind != "smoothing":
        raise ConfigurationError("smoothing certificates need kind='smoothing'")
    horizon = covariance.smoothing_horizon(sys, cfg.m, cfg.N, max_dim=max_dim)
    l_max = max(numerics.lambda_max(sys.Pi0), numerics.lambda_max(sys.R_w))
    per_alpha, per_eps, lmaxs = [], [], []
    for model in horizon:
        hi = numerics.lambda_max(model.M_empty + model.M_total)
        per_alpha.append((1.0 / l_max) / hi)
        per_eps.append(numerics.lambda_max(model.M_total) * l_max**2)
        lmaxs.append(hi)
    details = {"l_max": l_max, "lambda_min_M_empty": [1.0 / l_max] * len(horizon), "lambda_max_M_full": lmaxs}
    return _report(horizon, cfg, per_alpha, per_eps, "batch", details)


def certify(sys, cfg, **kwargs):
    """Filtering or smoothing certificates, according to ``cfg.kind``."""
    if cfg.kind == "filtering":
        return filtering_certificates(sys, cfg, **kwargs)
    return smoothing_certificates(sys, cfg, **kwargs)


def _all_values(f, p, max_ground):
    if p > max_ground:
        raise SizeError(f"exhaustive enumeration over {p} elements exceeds the cap of {max_ground}", cap=max_ground)
    values = []
    for mask in range(1 << p):
        values.append(f(tuple(u for u in range(p) if mask >> u & 1)))
    return values


def _gains(values, p, u):
    """Delta_u f(X) for every mask X without bit u (None where u is in X)."""
    bit = 1 << u
    return [None if mask & bit else values[mask] - values[mask | bit] for mask in range(1 << p)]


def _subset_min(g, p, u):
    """h[B] = min over A subset-or-equal B of g[A], restricted to masks without bit u."""
    h = list(g)
    for i in range(p):
        if i == u:
            continue
        bit = 1 << i
        for mask in range(1 << p):
            if mask & bit and h[mask] is not None:
                other = h[mask ^ bit]
                if other < h[mask]:
                    h[mask] = other
    return h


def alpha_exhaustive(f, p, max_ground=EXHAUSTIVE_MAX_GROUND, tol=GAIN_TOL):
    """Largest alpha with Delta_u f(A) >= alpha Delta_u f(B) for all A < B, u not in B.

    Pairs with a vanishing denominator are skipped. Any negative gain
    below ``-tol`` means f is not monotone and alpha is reported as 0.
    Returns 1 when no pair has a positive denominator; rounding noise
    never pushes the result below 0.
    """
    values = _all_values(f, p, max_ground)
    alpha = None
    for u in range(p):
        g = _gains(values, p, u)
        if any(x is not None and x < -tol for x in g):
            return 0.0
        h = _subset_min(g, p, u)
        for B in range(1, 1 << p):
            den = g[B]
            if den is None or den <= tol:
                continue
            num = min(h[B ^ (1 << i)] for i in range(p) if B >> i & 1)
            ratio = num / den
            if alpha is None or ratio < alpha:
                alpha = ratio
    return 1.0 if alpha is None else max(alpha, 0.0)


def epsilon_exhaustive(f, p, max_ground=EXHAUSTIVE_MAX_GROUND, clamp=True):
    """Smallest epsilon with Delta_u f(A) >= Delta_u f(B) - epsilon for A <= B, u not in B."""
    values = _all_values(f, p, max_ground)
    eps = None
    for u in range(p):
        g = _gains(values, p, u)
        h = _subset_min(g, p, u)
        for B in range(1 << p):
            if g[B] is None:
                continue
            gap = g[B] - h[B]
            if eps is None or gap > eps:
                eps = gap
    if eps is None:
        eps = 0.0
    return max(eps, 0) if clamp else eps


def set_function_table(f, p, max_ground=EXHAUSTIVE_MAX_GROUND):
    """Evaluate f on every subset once; returns a lookup callable for reuse."""
    values = _all_values(f, p, max_ground)

    def lookup(X):
        mask = 0
        for u in X:
            mask |= 1 << u
        return values[mask]

    return lookup


def scalar_model_from_spectra(M_empty, M_sensors):
    """Single-step horizon for explicit matrices (helper for direct bounds)."""
    model = covariance.InformationModel(np.asarray(M_empty, dtype=float), M_sensors=M_sensors)
    return covariance.HorizonModel([model], 0, 1)
