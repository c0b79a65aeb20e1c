"""Information-form error covariances for filtering and smoothing.

For a sensing set X the error covariance at step k is

    Y_k(X) = (M_empty_k + sum_{u in X} M_u_k)^-1

Filtering uses M_empty_k = P_{k|k-1}^-1 and M_u_k = V_u; smoothing lifts
the whole trajectory up to k into one batch estimate of size (k+1) n.
"""

from functools import cached_property

import numpy as np

from . import numerics
from .errors import ConfigurationError, SizeError

SMOOTHING_MAX_DIM = 2000
PSD_TOL = 1e-10


def _factor_psd(M):
    w, V = numerics.sym_eig(M)
    keep = w > PSD_TOL * max(1.0, abs(float(w[-1])))
    return V[:, keep] * np.sqrt(w[keep])


class InformationModel:
    """The pair (M_empty, {M_u}) defining Y(X) at one time step.

    Sensor information can be given either as matrices ``M_sensors`` or as
    factors ``G_u`` with ``M_u = G_u G_u^T``; the missing form is derived
    on demand. ``M_total`` optionally supplies the precomputed sum over all
    sensors.
    """

    def __init__(self, M_empty, M_sensors=None, factors=None, step=0, kind="filtering", M_total=None, check=True):
        if M_sensors is None and factors is None:
            raise ConfigurationError("need sensor matrices or factors")
        self.M_empty = numerics.symmetrize(M_empty)
        self.step = int(step)
        self.kind = kind
        d = self.M_empty.shape[0]
        if M_sensors is not None:
            M_sensors = tuple(numerics.symmetrize(M) for M in M_sensors)
            for M in M_sensors:
                if M.shape != (d, d):
                    raise ConfigurationError(f"sensor matrix has shape {M.shape}, expected {(d, d)}")
            self.__dict__["M_sensors"] = M_sensors
        if factors is not None:
            factors = tuple(np.asarray(G, dtype=float) for G in factors)
            for G in factors:
                if G.ndim != 2 or G.shape[0] != d:
                    raise ConfigurationError(f"factor has shape {G.shape}, expected {d} rows")
            self.__dict__["factors"] = factors
        if M_total is not None:
            self.__dict__["M_total"] = numerics.symmetrize(M_total)
        if check:
            self.validate()

    @property
    def dim(self):
        return self.M_empty.shape[0]

    @property
    def size(self):
        if "factors" in self.__dict__:
            return len(self.factors)
        return len(self.M_sensors)

    @cached_property
    def M_sensors(self):
        return tuple(numerics.symmetrize(G @ G.T) for G in self.factors)

    @cached_property
    def factors(self):
        return tuple(_factor_psd(M) for M in self.M_sensors)

    @cached_property
    def M_total(self):
        total = np.zeros_like(self.M_empty)
        if "factors" in self.__dict__ and "M_sensors" not in self.__dict__:
            G = np.hstack(self.factors) if self.factors else np.zeros((self.dim, 0))
            return numerics.symmetrize(G @ G.T)
        for M in self.M_sensors:
            total = total + M
        return total

    def validate(self):
        if numerics.lambda_min(self.M_empty) <= 0.0:
            raise ConfigurationError("M_empty must be positive definite")
        if "M_sensors" in self.__dict__:
            for u, M in enumerate(self.M_sensors):
                w = numerics.eigvalsh(M)
                if w[0] < -PSD_TOL * max(1.0, abs(float(w[-1]))):
                    raise ConfigurationError(f"M_sensors[{u}] is not positive semidefinite")

    def information_sum(self, X):
        R = self.M_empty.copy()
        if "M_sensors" in self.__dict__:
            for u in sorted(X):
                R = R + self.M_sensors[u]
        else:
            for u in sorted(X):
                G = self.factors[u]
                R = R + G @ G.T
        return R


class HorizonModel:
    """Information models for steps m, ..., m+N-1."""

    def __init__(self, steps, m, N):
        steps = tuple(steps)
        if len(steps) != N:
            raise ConfigurationError(f"expected {N} steps, got {len(steps)}")
        kinds = {s.kind for s in steps}
        if len(kinds) > 1:
            raise ConfigurationError("all steps must share a kind")
        self.steps = steps
        self.m = m
        self.N = N

    @property
    def kind(self):
        return self.steps[0].kind

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return self.N

    def __getitem__(self, i):
        return self.steps[i]


def evaluate_Y(model, X):
    """Error covariance (M_empty + sum_{u in X} M_u)^-1."""
    X = tuple(X)
    if X and (min(X) < 0 or max(X) >= model.size):
        raise ConfigurationError(f"sensor set {X} outside ground set of size {model.size}")
    return numerics.psd_inverse(model.information_sum(X))


def _stacked_outputs(sys, X):
    X = sorted(X)
    H = np.vstack([sys.sensors[u].H for u in X])
    blocks = [sys.sensors[u].R_v for u in X]
    dims = [b.shape[0] for b in blocks]
    R = np.zeros((sum(dims), sum(dims)))
    i = 0
    for b, d in zip(blocks, dims):
        R[i : i + d, i : i + d] = b
        i += d
    return H, R


def filtering_covariances(sys, X, last_step):
    """Riccati recursion with the fixed sensing set ``X`` at every step.

    Returns ``(priors, posteriors)``: lists of P_{k|k-1} and P_k(X) for
    k = 0, ..., last_step, starting from P_{0|-1} = Pi0. The measurement
    update is done in covariance form, which agrees with the information
    form (P_{k|k-1}^-1 + sum_{u in X} V_u)^-1.
    """
    X = tuple(X)
    priors, posts = [], []
    P = sys.Pi0.copy()
    if X:
        H, R = _stacked_outputs(sys, X)
    for k in range(last_step + 1):
        priors.append(P)
        if X:
            PHt = P @ H.T
            S = H @ PHt + R
            K = np.linalg.solve(S, PHt.T).T
            Pk = numerics.symmetrize(P - K @ PHt.T)
        else:
            Pk = P
        posts.append(Pk)
        P = numerics.symmetrize(sys.F @ Pk @ sys.F.T + sys.R_w)
    return priors, posts


def filtering_horizon(sys, X_schedule, m, N):
    """Filtering information models for steps m..m+N-1.

    ``M_empty_k = P_{k|k-1}^-1`` where the a priori covariances follow the
    Riccati recursion run with ``X_schedule`` at every step; ``M_u = V_u``.
    """
    if m < 0 or N < 1:
        raise ConfigurationError("need m >= 0 and N >= 1")
    priors, _ = filtering_covariances(sys, X_schedule, m + N - 1)
    total = sum(sys.information, np.zeros((sys.n, sys.n)))
    steps = [
        InformationModel(
            numerics.psd_inverse(priors[k]),
            factors=sys.info_factors,
            step=k,
            kind="filtering",
            M_total=total,
            check=False,
        )
        for k in range(m, m + N)
    ]
    return HorizonModel(steps, m, N)


def _phi_rows(F, last_step):
    """Yield Phi_0, Phi_1, ... Phi_last_step, each built from the previous one."""
    n = F.shape[0]
    Phi = np.eye(n)
    row = np.eye(n)
    yield Phi
    for k in range(1, last_step + 1):
        row = np.hstack([F @ row, np.eye(n)])
        grown = np.zeros(((k + 1) * n, (k + 1) * n))
        grown[: k * n, : k * n] = Phi
        grown[k * n :, :] = row
        Phi = grown
        yield Phi


def smoothing_phi(F, k):
    """Block lower-triangular lift with block (i, j) = F^(i-j) for i >= j."""
    if k < 0:
        raise ConfigurationError("k must be non-negative")
    F = np.asarray(F, dtype=float)
    for Phi in _phi_rows(F, k):
        pass
    return Phi


def _blkdiag(blocks):
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    i = 0
    for b in blocks:
        d = b.shape[0]
        out[i : i + d, i : i + d] = b
        i += d
    return out


def smoothing_horizon(sys, m, N, max_dim=SMOOTHING_MAX_DIM):
    """Batch smoothing information models for steps m..m+N-1.

    At step k: M_empty = blkdiag(Pi0, R_w, ..., R_w)^-1 and
    M_u = Phi_k^T (I kron V_u) Phi_k, stored through the factors
    Phi_k^T (I kron G_u).
    """
    if m < 0 or N < 1:
        raise ConfigurationError("need m >= 0 and N >= 1")
    n = sys.n
    if (m + N) * n > max_dim:
        raise SizeError(
            f"smoothing lift of dimension {(m + N) * n} exceeds the cap of {max_dim}",
            cap=max_dim,
        )
    Pi0_inv = numerics.psd_inverse(sys.Pi0)
    Rw_inv = numerics.psd_inverse(sys.R_w)
    V_total = sum(sys.information, np.zeros((n, n)))
    steps = []
    for k, Phi in enumerate(_phi_rows(sys.F, m + N - 1)):
        if k < m:
            continue
        M_empty = _blkdiag([Pi0_inv] + [Rw_inv] * k)
        factors = []
        for G in sys.info_factors:
            lifted = np.kron(np.eye(k + 1), G)
            factors.append(Phi.T @ lifted)
        total = Phi.T @ np.kron(np.eye(k + 1), V_total) @ Phi
        steps.append(
            InformationModel(M_empty, factors=factors, step=k, kind="smoothing", M_total=total, check=False)
        )
    return HorizonModel(steps, m, N)


def woodbury_factors(Y_X, G):
    """Return (Y_X G, S^-1) with S = I + G^T Y_X G.

    Then Y(X u {u}) G = Y_X G S^-1 and
    Y(X u {u}) = Y_X - (Y_X G) S^-1 (Y_X G)^T.
    """
    YG = Y_X @ G
    S = np.eye(G.shape[1]) + G.T @ YG
    return YG, np.linalg.inv(numerics.symmetrize(S))


def incremental_trace_gain(model, X, u, Y_X):
    """trace Y(X) - trace Y(X u {u}) evaluated as trace[Y(X) M_u Y(X u {u})].

    Y(X u {u}) is obtained from ``Y_X`` with the matrix inversion lemma on
    the factor of M_u, so no fresh inverse is needed.
    """
    if u in set(X):
        raise ConfigurationError(f"sensor {u} is already in the set")
    G = model.factors[u]
    if G.shape[1] == 0:
        return 0.0
    YG, S_inv = woodbury_factors(Y_X, G)
    # trace(Y_X G G^T Y_Xu) = sum((Y_X G) * (Y_Xu G)) with Y_Xu G = YG S^-1
    return float(np.sum(YG * (YG @ S_inv)))
