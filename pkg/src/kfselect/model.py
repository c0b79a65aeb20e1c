"""Linear dynamical systems with per-sensor outputs and generators for them.

The state evolves as ``x[k+1] = F x[k] + w[k]`` and sensor ``u`` reports
``y_u[k] = H_u x[k] + v_u[k]``, with ``w ~ N(0, R_w)``,
``v_u ~ N(0, R_v[u])`` and ``x[0] ~ N(0, Pi0)``.
"""

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import numerics
from .errors import ConfigurationError, SystemFormatError

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class Sensor:
    H: np.ndarray
    R_v: np.ndarray


def _as_matrix(value, name):
    M = np.array(value, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2:
        raise ConfigurationError(f"{name} must be a matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ConfigurationError(f"{name} has non-finite entries")
    return M


def _check_spd(M, name):
    if M.shape[0] != M.shape[1]:
        raise ConfigurationError(f"{name} must be square, got {M.shape}")
    if not np.allclose(M, M.T, rtol=1e-10, atol=1e-12):
        raise ConfigurationError(f"{name} must be symmetric")
    lmin = numerics.lambda_min(M)
    if lmin <= 0.0:
        raise ConfigurationError(f"{name} must be positive definite (lambda_min={lmin:.3e})")


@dataclass(frozen=True)
class LinearSystem:
    F: np.ndarray
    R_w: np.ndarray
    Pi0: np.ndarray
    sensors: tuple = field(default_factory=tuple)

    def __post_init__(self):
        F = _as_matrix(self.F, "F")
        n = F.shape[0]
        if F.shape != (n, n):
            raise ConfigurationError(f"F must be square, got {F.shape}")
        R_w = _as_matrix(self.R_w, "R_w")
        Pi0 = _as_matrix(self.Pi0, "Pi0")
        for M, name in ((R_w, "R_w"), (Pi0, "Pi0")):
            if M.shape != (n, n):
                raise ConfigurationError(f"{name} must be {n}x{n}, got {M.shape}")
            _check_spd(M, name)
        sensors = []
        for u, s in enumerate(self.sensors):
            H = _as_matrix(s.H, f"sensors[{u}].H")
            R_v = _as_matrix(s.R_v, f"sensors[{u}].R_v")
            if H.shape[1] != n:
                raise ConfigurationError(f"sensors[{u}].H must have {n} columns, got {H.shape[1]}")
            if R_v.shape != (H.shape[0], H.shape[0]):
                raise ConfigurationError(
                    f"sensors[{u}].R_v must be {H.shape[0]}x{H.shape[0]}, got {R_v.shape}"
                )
            _check_spd(R_v, f"sensors[{u}].R_v")
            sensors.append(Sensor(H, R_v))
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "R_w", R_w)
        object.__setattr__(self, "Pi0", Pi0)
        object.__setattr__(self, "sensors", tuple(sensors))

    @property
    def n(self):
        return self.F.shape[0]

    @property
    def p(self):
        return len(self.sensors)

    @cached_property
    def info_factors(self):
        """G_u with ``G_u @ G_u.T == H_u^T R_v^-1 H_u`` for every sensor."""
        factors = []
        for s in self.sensors:
            C = np.linalg.cholesky(s.R_v)
            factors.append(np.linalg.solve(C, s.H).T)
        return tuple(factors)

    @cached_property
    def information(self):
        """Per-sensor information matrices V_u = H_u^T R_v^-1 H_u."""
        return tuple(numerics.symmetrize(G @ G.T) for G in self.info_factors)

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "n": self.n,
            "F": self.F.tolist(),
            "R_w": self.R_w.tolist(),
            "Pi0": self.Pi0.tolist(),
            "sensors": [{"H": s.H.tolist(), "R_v": s.R_v.tolist()} for s in self.sensors],
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise SystemFormatError("system document must be a JSON object", field="$")
        for key in ("n", "F", "R_w", "Pi0", "sensors"):
            if key not in doc:
                raise SystemFormatError("missing required field", field=key)
        n = doc["n"]
        if not isinstance(n, int) or n < 1:
            raise SystemFormatError("must be a positive integer", field="n")

        def matrix(value, path, rows=None, cols=None):
            if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
                raise SystemFormatError("must be a non-empty nested array", field=path)
            width = len(value[0])
            for i, row in enumerate(value):
                if len(row) != width:
                    raise SystemFormatError(f"row {i} has {len(row)} entries, expected {width}", field=path)
                for j, x in enumerate(row):
                    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                        raise SystemFormatError(f"entry [{i}][{j}] is not a finite number", field=path)
            M = np.array(value, dtype=float)
            if rows is not None and M.shape[0] != rows:
                raise SystemFormatError(f"expected {rows} rows, got {M.shape[0]}", field=path)
            if cols is not None and M.shape[1] != cols:
                raise SystemFormatError(f"expected {cols} columns, got {M.shape[1]}", field=path)
            return M

        F = matrix(doc["F"], "F", n, n)
        R_w = matrix(doc["R_w"], "R_w", n, n)
        Pi0 = matrix(doc["Pi0"], "Pi0", n, n)
        if not isinstance(doc["sensors"], list):
            raise SystemFormatError("must be an array", field="sensors")
        sensors = []
        for u, entry in enumerate(doc["sensors"]):
            if not isinstance(entry, dict) or "H" not in entry or "R_v" not in entry:
                raise SystemFormatError("must be an object with H and R_v", field=f"sensors[{u}]")
            H = matrix(entry["H"], f"sensors[{u}].H", cols=n)
            R_v = matrix(entry["R_v"], f"sensors[{u}].R_v", H.shape[0], H.shape[0])
            sensors.append(Sensor(H, R_v))
        return cls(F=F, R_w=R_w, Pi0=Pi0, sensors=tuple(sensors))

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SystemFormatError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(doc)


def as_sensor_set(X, p):
    """Validate a collection of sensor indices and return it as a sorted tuple."""
    members = sorted(int(u) for u in X)
    for a, b in zip(members, members[1:]):
        if a == b:
            raise ConfigurationError(f"duplicate sensor index {a}")
    if members and (members[0] < 0 or members[-1] >= p):
        raise ConfigurationError(f"sensor indices must lie in [0, {p}), got {members}")
    return tuple(members)


def random_system(
    n,
    p,
    target_norm=0.9,
    sigma_w2=1e-2,
    sigma_v2_range=(1.0, 1.0),
    output_mode="canonical",
    rng_seed=0,
    pi0=None,
):
    """Random Gaussian system with ``||F||_2 == target_norm``.

    ``output_mode="canonical"`` gives H_u = e_u^T (needs p <= n);
    ``"gaussian"`` draws each H_u as a 1 x n standard normal row. Sensor
    noise variances are uniform on ``sigma_v2_range``. ``pi0`` defaults to
    1e-2 I.
    """
    if n < 1 or p < 1:
        raise ConfigurationError("n and p must be at least 1")
    if not target_norm > 0:
        raise ConfigurationError(f"target_norm must be positive, got {target_norm}")
    lo, hi = sigma_v2_range
    if not (sigma_w2 > 0 and lo > 0 and hi >= lo):
        raise ConfigurationError("noise variances must be positive with lo <= hi")
    if output_mode not in ("canonical", "gaussian"):
        raise ConfigurationError(f"unknown output mode {output_mode!r}")
    if output_mode == "canonical" and p > n:
        raise ConfigurationError(f"canonical outputs need p <= n (p={p}, n={n})")

    rng = np.random.default_rng(rng_seed)
    F = rng.standard_normal((n, n))
    F *= target_norm / numerics.spectral_norm(F)
    if output_mode == "gaussian":
        H = rng.standard_normal((p, n))
    else:
        H = np.eye(n)[:p]
    sigma_v2 = rng.uniform(lo, hi, size=p) if hi > lo else np.full(p, float(lo))

    Pi0 = 1e-2 * np.eye(n) if pi0 is None else pi0
    sensors = tuple(Sensor(H[u : u + 1].copy(), np.array([[sigma_v2[u]]])) for u in range(p))
    return LinearSystem(F=F, R_w=sigma_w2 * np.eye(n), Pi0=Pi0, sensors=sensors)


@dataclass(frozen=True)
class RiverTree:
    """Directed tree draining into ``root``.

    ``edges`` holds ``(i, j)`` pairs meaning water flows from node i to
    node j. ``is_site`` marks candidate sensor locations; the others are
    midpoints inserted between neighbouring sites. ``level`` is the site
    depth (root level 0); a midpoint shares the level of its upstream site.
    """

    positions: np.ndarray
    edges: tuple
    root: int
    is_site: np.ndarray
    level: np.ndarray

    @property
    def size(self):
        return self.positions.shape[0]

    @property
    def site_ids(self):
        return tuple(int(i) for i in np.flatnonzero(self.is_site))

    def downstream(self):
        """Map each non-root node to its unique downstream neighbour."""
        out = {}
        for i, j in self.edges:
            if i in out:
                raise ConfigurationError(f"node {i} has more than one outgoing edge")
            out[i] = j
        return out

    def validate(self):
        m = self.size
        if not 0 <= self.root < m:
            raise ConfigurationError("root index out of range")
        for i, j in self.edges:
            if not (0 <= i < m and 0 <= j < m) or i == j:
                raise ConfigurationError(f"invalid edge {(i, j)}")
        out = self.downstream()
        if self.root in out:
            raise ConfigurationError("root must not drain anywhere")
        for start in range(m):
            node, steps = start, 0
            while node != self.root:
                if node not in out or steps > m:
                    raise ConfigurationError(f"node {start} does not drain to the root (tree is disconnected)")
                node = out[node]
                steps += 1

    def main_stem_source(self):
        """Deepest site reached by always following the first tributary upstream."""
        upstream = {}
        for i, j in self.edges:
            upstream.setdefault(j, []).append(i)
        node = self.root
        while node in upstream:
            node = min(upstream[node])
        return node


def synth_river_tree(levels, branching=2, rng_seed=0, step=5.0, spread=1.2, jitter=0.2):
    """Synthetic river network: a complete ``branching``-ary tree of sites.

    Sites sit at distance ``step`` from their downstream site with jittered
    angles, and a midpoint node is inserted on every site-to-site link, so
    ``levels=3, branching=2`` yields 7 sites, 6 midpoints and 12 edges.
    """
    if levels < 1 or branching < 1:
        raise ConfigurationError("levels and branching must be at least 1")
    rng = np.random.default_rng(rng_seed)
    positions = [np.zeros(2)]
    is_site = [True]
    level = [0]
    edges = []
    frontier = [(0, math.pi / 2)]
    for depth in range(1, levels):
        nxt = []
        for parent, heading in frontier:
            for b in range(branching):
                offset = 0.0 if branching == 1 else spread * (b / (branching - 1) - 0.5)
                angle = heading + offset + rng.uniform(-jitter, jitter)
                child_pos = positions[parent] + step * np.array([math.cos(angle), math.sin(angle)])
                mid = len(positions)
                positions.append(0.5 * (positions[parent] + child_pos))
                is_site.append(False)
                level.append(depth)
                child = len(positions)
                positions.append(child_pos)
                is_site.append(True)
                level.append(depth)
                edges.append((child, mid))
                edges.append((mid, parent))
                nxt.append((child, angle))
        frontier = nxt
    return RiverTree(
        positions=np.array(positions),
        edges=tuple(edges),
        root=0,
        is_site=np.array(is_site, dtype=bool),
        level=np.array(level, dtype=int),
    )


def basin_matrices(tree, sigma_smooth=10.0):
    """Weighted adjacency and the advection / diffusion Laplacians of a tree.

    ``A[i, j] = exp(-||z_i - z_j||^2 / sigma_smooth)`` on edges i -> j.
    The advection Laplacian moves mass downstream (columns sum to zero);
    the diffusion Laplacian is D' - (A + A^T).
    """
    tree.validate()
    m = tree.size
    A = np.zeros((m, m))
    for i, j in tree.edges:
        d2 = float(np.sum((tree.positions[i] - tree.positions[j]) ** 2))
        A[i, j] = math.exp(-d2 / sigma_smooth)
    W = A.T
    L = np.diag(W.sum(axis=0)) - W
    S = A + A.T
    L_sym = np.diag(S.sum(axis=0)) - S
    return A, L, L_sym


def basin_system(
    tree,
    sigma_smooth=10.0,
    dt=0.1,
    advect_coeff=0.9,
    diffuse_coeff=0.099,
    sigma_w2=1e-4,
    sigma_v2=1e-1,
    pi0_scale=1.0,
):
    """Advection-diffusion dynamics on a river tree, one sensor per site.

    Returns ``(system, sensor_node_ids)`` where sensor ``u`` observes the
    state of node ``sensor_node_ids[u]``.
    """
    if not (sigma_smooth > 0 and dt > 0 and advect_coeff > 0 and diffuse_coeff > 0):
        raise ConfigurationError("basin coefficients must be positive")
    _, L, L_sym = basin_matrices(tree, sigma_smooth)
    F = advect_coeff * numerics.matrix_exp(-L * dt) + diffuse_coeff * numerics.matrix_exp(-L_sym * dt)
    m = tree.size
    ids = tree.site_ids
    eye = np.eye(m)
    sensors = tuple(Sensor(eye[i : i + 1].copy(), np.array([[sigma_v2]])) for i in ids)
    sys = LinearSystem(F=F, R_w=sigma_w2 * eye, Pi0=pi0_scale * eye, sensors=sensors)
    return sys, ids
