"""Normalized sensor-selection objectives.

f(X) = sum_k theta_k h[Y_{m+k}(X)] - C_empty, with h the trace (MSE),
the spectral norm (worst-case error) or the log-determinant. f(empty) == 0.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import covariance, numerics
from .errors import ConfigurationError, DomainError

SCALARIZATIONS = ("trace", "specnorm", "logdet")
KINDS = ("filtering", "smoothing")


def weights_final(N):
    return tuple([0.0] * (N - 1) + [1.0])


def weights_average(N):
    return tuple([1.0] * N)


def weights_geometric(N, rho):
    return tuple(rho ** (N - 1 - k) for k in range(N))


def parse_weights(spec, N):
    """Parse ``final``, ``average`` or ``geometric:<rho>``."""
    if spec == "final":
        return weights_final(N)
    if spec == "average":
        return weights_average(N)
    if spec.startswith("geometric:"):
        try:
            rho = float(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad geometric weight spec {spec!r}") from None
        if not 0 < rho:
            raise ConfigurationError("geometric discount must be positive")
        return weights_geometric(N, rho)
    raise ConfigurationError(f"unknown weight preset {spec!r}")


@dataclass(frozen=True)
class SelectionConfig:
    scalarization: str = "trace"
    m: int = 0
    N: int = 1
    theta: tuple = None
    s: int = 1
    r: int = None
    kind: str = "filtering"

    def __post_init__(self):
        if self.scalarization not in SCALARIZATIONS:
            raise ConfigurationError(f"unknown scalarization {self.scalarization!r}")
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown kind {self.kind!r}")
        if self.m < 0 or self.N < 1:
            raise ConfigurationError("need m >= 0 and N >= 1")
        theta = weights_average(self.N) if self.theta is None else tuple(float(t) for t in self.theta)
        if len(theta) != self.N:
            raise ConfigurationError(f"theta has {len(theta)} entries, expected N={self.N}")
        if any(t < 0 or not math.isfinite(t) for t in theta):
            raise ConfigurationError("weights must be finite and non-negative")
        if not any(t > 0 for t in theta):
            raise ConfigurationError("at least one weight must be positive")
        object.__setattr__(self, "theta", theta)
        if self.s < 1:
            raise ConfigurationError("budget s must be at least 1")
        if self.r is None:
            object.__setattr__(self, "r", self.s)
        if self.r < 1:
            raise ConfigurationError("greedy steps r must be at least 1")

    def check_ground_set(self, p):
        if self.s > p:
            raise ConfigurationError(f"budget s={self.s} exceeds the {p} available sensors")


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    c_empty: float


def scalarize(h, Y):
    """trace, largest eigenvalue, or log-determinant of a PD matrix."""
    Y = np.asarray(Y, dtype=float)
    if h == "trace":
        return float(np.trace(Y))
    if h == "specnorm":
        return numerics.lambda_max(Y)
    if h == "logdet":
        w = numerics.eigvalsh(Y)
        if w[0] <= 0.0:
            raise DomainError(f"log-determinant needs a positive definite matrix (lambda_min={w[0]:.3e})")
        return float(np.sum(np.log(w)))
    raise ConfigurationError(f"unknown scalarization {h!r}")


class Objective:
    """Cached evaluator of f(X) for one (system, config) pair.

    When the information models do not depend on the sensing set
    (smoothing, or filtering at m=0 with N=1) they are built once;
    otherwise each evaluation reruns the Riccati recursion with X applied
    at every step.
    """

    def __init__(self, sys, cfg, smoothing_max_dim=covariance.SMOOTHING_MAX_DIM):
        self.sys = sys
        self.cfg = cfg
        self.p = sys.p
        self.active = [(k, t) for k, t in enumerate(cfg.theta) if t > 0]
        self.static = cfg.kind == "smoothing" or (cfg.m == 0 and cfg.N == 1)
        self.horizon = None
        if cfg.kind == "smoothing":
            self.horizon = covariance.smoothing_horizon(sys, cfg.m, cfg.N, max_dim=smoothing_max_dim)
        elif self.static:
            self.horizon = covariance.filtering_horizon(sys, (), cfg.m, cfg.N)
        self.c_empty = self._raw(())

    def covariances(self, X):
        """[(theta_k, Y_{m+k}(X))] for the steps with positive weight."""
        X = tuple(sorted(X))
        if self.static:
            return [(t, covariance.evaluate_Y(self.horizon[k], X)) for k, t in self.active]
        _, posts = covariance.filtering_covariances(self.sys, X, self.cfg.m + self.cfg.N - 1)
        return [(t, posts[self.cfg.m + k]) for k, t in self.active]

    def _raw(self, X):
        h = self.cfg.scalarization
        return math.fsum(t * scalarize(h, Y) for t, Y in self.covariances(X))

    def __call__(self, X):
        return self._raw(X) - self.c_empty

    def value(self, X):
        return ObjectiveValue(self(X), self.c_empty)


def objective(sys, cfg, X, smoothing_max_dim=covariance.SMOOTHING_MAX_DIM):
    """Normalized objective value of the sensing set ``X``."""
    from .model import as_sensor_set

    X = as_sensor_set(X, sys.p)
    return Objective(sys, cfg, smoothing_max_dim=smoothing_max_dim).value(X)


def modular_weights(sys, cfg, exact=False):
    """Per-sensor weights w_u = sum_k theta_k trace(M_{u,m+k})."""
    if cfg.kind == "smoothing":
        horizon = covariance.smoothing_horizon(sys, cfg.m, cfg.N)
        traces = [[float(np.sum(G * G)) for G in model.factors] for model in horizon]
    else:
        # M_u = V_u at every filtering step
        traces = [[float(np.trace(V)) for V in sys.information]] * cfg.N
    weights = []
    for u in range(sys.p):
        if exact:
            weights.append(sum((Fraction(t) * Fraction(tr[u]) for t, tr in zip(cfg.theta, traces)), Fraction(0)))
        else:
            weights.append(math.fsum(t * tr[u] for t, tr in zip(cfg.theta, traces)))
    return weights


def modular_reference_objective(sys, cfg, X, exact=False, weights=None):
    """-sum_k theta_k trace(M_empty + sum_X M_u) normalized to 0 at the empty set.

    The M_empty terms cancel, leaving -sum_{u in X} w_u. With ``exact=True``
    the sum is carried out in rational arithmetic and a Fraction returned.
    """
    if weights is None:
        weights = modular_weights(sys, cfg, exact=exact)
    if exact:
        return -sum((weights[u] for u in X), Fraction(0))
    return -math.fsum(weights[u] for u in X)
