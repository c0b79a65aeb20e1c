"""Greedy, exhaustive and random sensor selection."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import covariance
from .errors import ConfigurationError, SizeError
from .objective import Objective, scalarize

EXHAUSTIVE_MAX_SUBSETS = 200_000
# relative score gap below which fast greedy re-checks candidates directly
NEAR_TIE = 1e-8


@dataclass(frozen=True)
class SelectionResult:
    chosen: tuple
    objective_trajectory: tuple
    gains: tuple

    @property
    def value(self):
        return self.objective_trajectory[-1]

    def to_dict(self):
        return {
            "chosen": list(self.chosen),
            "objective_trajectory": list(self.objective_trajectory),
            "gains": list(self.gains),
        }


def _result(f, order):
    traj = [0.0]
    for j in range(1, len(order) + 1):
        traj.append(f(order[:j]))
    gains = [traj[j] - traj[j + 1] for j in range(len(order))]
    return SelectionResult(tuple(order), tuple(traj), tuple(gains))


def _static_scores(f, G, candidates):
    """Objective-ordering scores for each candidate, reusing Y(G) per step.

    Lower is better. For the trace the score is minus the weighted trace
    gain; for the other scalarizations it is the weighted value at G u {w}.
    """
    h = f.cfg.scalarization
    per_step = []
    for k, t in f.active:
        model = f.horizon[k]
        per_step.append((t, model, covariance.evaluate_Y(model, G)))
    scores = []
    for w in candidates:
        parts = []
        for t, model, Y in per_step:
            if h == "trace":
                parts.append(-t * covariance.incremental_trace_gain(model, G, w, Y))
                continue
            Gw = model.factors[w]
            if h == "logdet":
                # det(R + G G^T) = det(R) det(I + G^T Y G)
                _, logdet_S = np.linalg.slogdet(np.eye(Gw.shape[1]) + Gw.T @ Y @ Gw)
                parts.append(t * (scalarize("logdet", Y) - logdet_S))
            else:
                YG, S_inv = covariance.woodbury_factors(Y, Gw)
                parts.append(t * scalarize("specnorm", Y - YG @ S_inv @ YG.T))
        scores.append(math.fsum(parts))
    return scores


def greedy_select(sys, cfg, objective=None, fast=True):
    """Algorithm: r rounds, each adding the sensor with the lowest objective.

    Ties go to the lowest index. With ``fast=True`` and set-independent
    information models, candidates are scored through rank updates of
    Y(G) instead of fresh inverses; the reported trajectory is always
    recomputed directly.
    """
    p = sys.p
    if cfg.r > p:
        raise ConfigurationError(f"r={cfg.r} greedy steps exceed the {p} available sensors")
    f = objective if objective is not None else Objective(sys, cfg)
    chosen = []
    for _ in range(cfg.r):
        remaining = [w for w in range(p) if w not in chosen]
        if fast and f.static:
            scores = _static_scores(f, tuple(sorted(chosen)), remaining)
            # near-ties are settled by direct evaluation so both paths agree
            top = min(scores)
            slack = NEAR_TIE * max(abs(s) for s in scores) + 1e-300
            scores = [f(tuple(sorted(chosen + [w]))) if s <= top + slack else math.inf
                      for w, s in zip(remaining, scores)]
        else:
            scores = [f(tuple(sorted(chosen + [w]))) for w in remaining]
        best = 0
        for i in range(1, len(remaining)):
            if scores[i] < scores[best]:
                best = i
        chosen.append(remaining[best])
    return _result(lambda order: f(tuple(sorted(order))), chosen)


def exhaustive_select(sys, cfg, objective=None, max_subsets=EXHAUSTIVE_MAX_SUBSETS):
    """Best subset of size exactly s, ties broken lexicographically."""
    p = sys.p
    cfg.check_ground_set(p)
    count = math.comb(p, cfg.s)
    if count > max_subsets:
        raise SizeError(
            f"{count} subsets of size {cfg.s} exceed the exhaustive cap of {max_subsets}; use greedy selection",
            cap=max_subsets,
        )
    f = objective if objective is not None else Objective(sys, cfg)
    best, best_value = None, math.inf
    for X in itertools.combinations(range(p), cfg.s):
        v = f(X)
        if v < best_value:
            best, best_value = X, v
    return best, best_value


def relative_suboptimality(f_greedy, f_opt):
    """(f_opt - f_greedy) / f_opt for normalized, non-positive objectives."""
    if f_opt >= -1e-15:
        raise ConfigurationError(f"degenerate instance: optimal value {f_opt} is not negative")
    return (f_opt - f_greedy) / f_opt


def random_baseline(sys, cfg, rng_seed, strata=None, objective=None):
    """Random sensing set of size s, or one uniform pick per stratum."""
    p = sys.p
    rng = np.random.default_rng(rng_seed)
    if strata is None:
        cfg.check_ground_set(p)
        order = [int(u) for u in rng.choice(p, size=cfg.s, replace=False)]
    else:
        order = []
        for i, stratum in enumerate(strata):
            members = [int(u) for u in stratum]
            if not members:
                raise ConfigurationError(f"stratum {i} is empty")
            if any(u < 0 or u >= p for u in members):
                raise ConfigurationError(f"stratum {i} has indices outside [0, {p})")
            order.append(members[int(rng.integers(len(members)))])
        if len(set(order)) != len(order):
            raise ConfigurationError("strata must be disjoint")
    f = objective if objective is not None else Objective(sys, cfg)
    return _result(lambda o: f(tuple(sorted(o))), order)


def contiguous_strata(ordered_ids, count):
    """Split an ordered list into ``count`` nearly equal contiguous chunks."""
    ordered_ids = list(ordered_ids)
    if not 1 <= count <= len(ordered_ids):
        raise ConfigurationError(f"cannot split {len(ordered_ids)} items into {count} strata")
    bounds = np.linspace(0, len(ordered_ids), count + 1).round().astype(int)
    return [ordered_ids[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
