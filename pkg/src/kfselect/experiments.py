"""Seeded experiment drivers: certificate sweeps, brute-force studies and the river-basin run.

Every trial draws its own generator from ``seed + trial``, so results do
not depend on worker count or execution order.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import certificates, covariance, model, numerics, selection
from .errors import ConfigurationError, SizeError
from .objective import Objective, SelectionConfig, parse_weights

SWEEP_COLUMNS = (
    "kind",
    "scalarization",
    "sigma_w2",
    "sigma_v2",
    "F_norm",
    "trial",
    "alpha_bound",
    "epsilon_bound",
    "runtime_ms",
)
BRUTEFORCE_COLUMNS = ("trial", "nu_star", "f_greedy", "f_opt", "alpha_or_epsilon_exhaustive", "bound_value")
TRAJECTORY_COLUMNS = ("run", "step", "node", "true_state", "estimate")
OPTIMAL_TOL = 1e-9


def _map(fn, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def default_weights(kind, N):
    """Average error for filtering, final-step error for smoothing."""
    return parse_weights("average" if kind == "filtering" else "final", N)


# ---------------------------------------------------------------- sweeps


def _sweep_trial(job):
    kind, scalarization, n, p, N, sigma_w2, ratios, norm, trial, seed, vary, pi0_scale, timing = job
    rows = []
    cfg = SelectionConfig(scalarization=scalarization, N=N, theta=default_weights(kind, N), s=1, kind=kind)
    for ratio in ratios:
        if vary == "sigma_v2":
            w2, v2 = sigma_w2, ratio * sigma_w2
        else:
            # unit sensor noise, process noise set by the ratio
            w2, v2 = 1.0 / ratio, 1.0
        sys = model.random_system(
            n, p, target_norm=norm, sigma_w2=w2, sigma_v2_range=(v2, v2), output_mode="canonical",
            rng_seed=seed + trial, pi0=pi0_scale * np.eye(n),
        )
        start = time.perf_counter()
        report = certificates.certify(sys, cfg)
        elapsed = (time.perf_counter() - start) * 1e3 if timing else 0.0
        rows.append({
            "kind": kind,
            "scalarization": scalarization,
            "sigma_w2": w2,
            "sigma_v2": v2,
            "F_norm": norm,
            "trial": trial,
            "alpha_bound": report.alpha_bound,
            "epsilon_bound": report.epsilon_bound,
            "runtime_ms": elapsed,
        })
    return rows


def sweep(
    kind="filtering",
    scalarization="trace",
    ratios=(1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4),
    norms=(0.1, 0.5, 0.9),
    trials=20,
    n=30,
    p=None,
    N=10,
    sigma_w2=1e-2,
    vary="sigma_v2",
    pi0_scale=1e-2,
    seed=0,
    workers=1,
    timing=True,
):
    """Certificate bounds over a grid of noise ratios sigma_v2 / sigma_w2 and ||F||.

    With ``vary="sigma_v2"`` the process noise is held at ``sigma_w2`` and
    the sensor noise is ``ratio * sigma_w2``. With ``vary="sigma_w2"``
    the sensor noise is 1 and the process noise is ``1 / ratio``. The
    system for a trial depends only on ``seed + trial``, so every grid
    point of a trial shares the same F.
    """
    if not ratios or not norms or trials < 1:
        raise ConfigurationError("sweep grids must be non-empty and trials >= 1")
    if any(r <= 0 for r in ratios) or any(v <= 0 for v in norms):
        raise ConfigurationError("sweep grid values must be positive")
    if vary not in ("sigma_v2", "sigma_w2"):
        raise ConfigurationError(f"unknown sweep variable {vary!r}")
    p = n if p is None else p
    ratios = sorted(float(r) for r in ratios)
    jobs = [
        (kind, scalarization, n, p, N, sigma_w2, ratios, float(norm), trial, seed, vary, pi0_scale, timing)
        for norm in norms
        for trial in range(trials)
    ]
    rows = []
    for chunk in _map(_sweep_trial, jobs, workers):
        rows.extend(chunk)
    rows.sort(key=lambda r: (r["F_norm"], r["sigma_v2"] / r["sigma_w2"], r["trial"]))
    return rows


def sweep_means(rows):
    """Mean alpha / epsilon per (F_norm, ratio), ordered by ratio."""
    groups = {}
    for r in rows:
        key = (r["F_norm"], r["sigma_v2"] / r["sigma_w2"])
        groups.setdefault(key, []).append(r)
    out = []
    for (norm, ratio), members in sorted(groups.items()):
        out.append({
            "F_norm": norm,
            "ratio": ratio,
            "alpha_mean": math.fsum(m["alpha_bound"] for m in members) / len(members),
            "epsilon_mean": math.fsum(m["epsilon_bound"] for m in members) / len(members),
        })
    return out


# ---------------------------------------------------------- brute force


def _bruteforce_trial(job):
    (trial, seed, n, p, s, scalarization, kind, N, theta, norm, sigma_w2, sigma_v2_range, pi0_scale,
     outputs, with_certificate) = job
    sys = model.random_system(
        n, p, target_norm=norm, sigma_w2=sigma_w2, sigma_v2_range=sigma_v2_range, output_mode=outputs,
        rng_seed=seed + trial, pi0=pi0_scale * np.eye(n),
    )
    cfg = SelectionConfig(scalarization=scalarization, N=N, theta=theta, s=s, kind=kind)
    f = Objective(sys, cfg)
    table = certificates.set_function_table(f, p) if with_certificate else f
    greedy = selection.greedy_select(sys, cfg, objective=f)
    X_opt, f_opt = selection.exhaustive_select(sys, cfg, objective=table)
    f_greedy = greedy.value
    nu = 0.0 if f_greedy <= f_opt else selection.relative_suboptimality(f_greedy, f_opt)
    row = {"trial": trial, "nu_star": nu, "f_greedy": f_greedy, "f_opt": f_opt,
           "alpha_or_epsilon_exhaustive": "", "bound_value": ""}
    if with_certificate:
        if scalarization == "specnorm":
            eps = certificates.epsilon_exhaustive(table, p)
            _, bound = certificates.guarantees(1.0, eps, f_opt, cfg.r, cfg.s)
            row["alpha_or_epsilon_exhaustive"] = eps
        else:
            alpha = certificates.alpha_exhaustive(table, p)
            mult, _ = certificates.guarantees(min(alpha, 1.0), 0.0, f_opt, cfg.r, cfg.s)
            bound = mult * f_opt
            row["alpha_or_epsilon_exhaustive"] = alpha
        row["bound_value"] = bound
    return row


def bruteforce(
    n=10,
    p=10,
    s=4,
    trials=200,
    scalarization="trace",
    kind="filtering",
    N=10,
    weights=None,
    norm=0.9,
    sigma_w2=1e-2,
    sigma_v2_range=(1e-2, 1.0),
    pi0_scale=1e-2,
    outputs="gaussian",
    seed=0,
    certificate=True,
    workers=1,
):
    """Greedy against exhaustive search on random systems.

    Returns ``(rows, summary)``; ``summary["optimal_fraction"]`` is the
    share of trials where greedy reaches the optimum (nu* <= 1e-9).
    With ``certificate=True`` each row also carries the exhaustive alpha
    (or epsilon for the spectral norm) and the implied bound on f(G).
    """
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    if certificate and p > certificates.EXHAUSTIVE_MAX_GROUND:
        raise ConfigurationError(
            f"exhaustive certificates need p <= {certificates.EXHAUSTIVE_MAX_GROUND}; pass certificate=False"
        )
    if math.comb(p, s) > selection.EXHAUSTIVE_MAX_SUBSETS:
        raise SizeError(
            f"{math.comb(p, s)} subsets exceed the exhaustive cap of {selection.EXHAUSTIVE_MAX_SUBSETS}",
            cap=selection.EXHAUSTIVE_MAX_SUBSETS,
        )
    theta = default_weights(kind, N) if weights is None else parse_weights(weights, N)
    jobs = [
        (t, seed, n, p, s, scalarization, kind, N, theta, norm, sigma_w2, tuple(sigma_v2_range), pi0_scale,
         outputs, certificate)
        for t in range(trials)
    ]
    rows = _map(_bruteforce_trial, jobs, workers)
    nus = [r["nu_star"] for r in rows]
    summary = {
        "trials": trials,
        "optimal_fraction": sum(nu <= OPTIMAL_TOL for nu in nus) / trials,
        "max_nu_star": max(nus),
        "mean_nu_star": math.fsum(nus) / trials,
    }
    return rows, summary


# ---------------------------------------------------------------- basin


def site_order(tree):
    """Sensor indices ordered breadth-first from the root (by level, then index)."""
    ids = tree.site_ids
    return sorted(range(len(ids)), key=lambda u: (int(tree.level[ids[u]]), ids[u]))


def kalman_run(sys, X, x_true, measurements):
    """Kalman filter with the fixed sensor set X.

    ``x_true`` holds states x_0..x_{T-1} as rows and ``measurements`` the
    noisy outputs of every sensor (T x p). Starts from x_hat_{0|-1} = 0,
    P_{0|-1} = Pi0. Returns the filtered estimates (T x n).
    """
    X = tuple(sorted(X))
    T = x_true.shape[0]
    n = sys.n
    x = np.zeros(n)
    P = sys.Pi0.copy()
    if X:
        H, R = covariance._stacked_outputs(sys, X)
    out = np.empty((T, n))
    for k in range(T):
        if X:
            PHt = P @ H.T
            S = H @ PHt + R
            K = np.linalg.solve(S, PHt.T).T
            x = x + K @ (measurements[k, list(X)] - H @ x)
            P = numerics.symmetrize(P - K @ PHt.T)
        out[k] = x
        x = sys.F @ x
        P = numerics.symmetrize(sys.F @ P @ sys.F.T + sys.R_w)
    return out


def simulate(sys, x0, steps, rng):
    """True trajectory x_{k+1} = F x_k + w_k and noisy readings of every sensor."""
    n, p = sys.n, sys.p
    Lw = np.linalg.cholesky(sys.R_w)
    x = np.empty((steps, n))
    x[0] = x0
    for k in range(1, steps):
        x[k] = sys.F @ x[k - 1] + Lw @ rng.standard_normal(n)
    H = np.vstack([sen.H for sen in sys.sensors])
    sd = np.sqrt(np.array([sen.R_v[0, 0] for sen in sys.sensors]))
    y = x @ H.T + rng.standard_normal((steps, p)) * sd
    return x, y


def mse(estimates, truth):
    return float(np.mean(np.sum((estimates - truth) ** 2, axis=1)))


def basin_run(
    levels=5,
    branching=2,
    s=10,
    steps=200,
    seed=0,
    spike=10.0,
    strata=None,
    scalarization="trace",
    sigma_smooth=10.0,
    dt=0.1,
    advect_coeff=0.9,
    diffuse_coeff=0.099,
    sigma_w2=1e-4,
    sigma_v2=1e-1,
    probes=None,
):
    """Greedy, stratified-random and full sensing on a synthetic river basin.

    Greedy minimizes the average filtering error over ``steps`` steps. The
    true state starts as a spike of height ``spike`` at the source of the
    main stem. All three filters see the same noise realization. The random
    baseline picks one site from each of ``strata`` (default ``s``)
    contiguous groups of sites ordered from the root upward.
    """
    tree = model.synth_river_tree(levels, branching, rng_seed=seed)
    sys, ids = model.basin_system(
        tree, sigma_smooth=sigma_smooth, dt=dt, advect_coeff=advect_coeff, diffuse_coeff=diffuse_coeff,
        sigma_w2=sigma_w2, sigma_v2=sigma_v2,
    )
    if s > sys.p:
        raise ConfigurationError(f"budget s={s} exceeds the {sys.p} sensor sites")
    cfg = SelectionConfig(scalarization=scalarization, N=steps, theta=parse_weights("average", steps), s=s)
    f = Objective(sys, cfg)
    greedy = selection.greedy_select(sys, cfg, objective=f)
    groups = selection.contiguous_strata(site_order(tree), strata or s)
    rand = selection.random_baseline(sys, cfg, rng_seed=seed + 1, strata=groups, objective=f)

    source = tree.main_stem_source()
    x0 = np.zeros(sys.n)
    x0[source] = spike
    x_true, y = simulate(sys, x0, steps, np.random.default_rng(seed + 2))
    sets = {"greedy": greedy.chosen, "random": rand.chosen, "full": tuple(range(sys.p))}
    estimates = {name: kalman_run(sys, X, x_true, y) for name, X in sets.items()}
    probes = [source, tree.root] if probes is None else list(probes)
    return {
        "seed": seed,
        "nodes": sys.n,
        "sites": sys.p,
        "F_norm": numerics.spectral_norm(sys.F),
        "spike_node": source,
        "greedy_sensors": [ids[u] for u in greedy.chosen],
        "random_sensors": [ids[u] for u in rand.chosen],
        "objective_greedy": greedy.value,
        "objective_random": rand.value,
        "objective_full": f(tuple(range(sys.p))),
        "mse_greedy": mse(estimates["greedy"], x_true),
        "mse_random": mse(estimates["random"], x_true),
        "mse_full": mse(estimates["full"], x_true),
        "probes": probes,
        "_trajectories": {name: est[:, probes] for name, est in estimates.items()},
        "_truth": x_true[:, probes],
    }


def _basin_job(kwargs):
    return basin_run(**kwargs)


def basin_study(seeds=range(10), workers=1, **kwargs):
    """basin_run over several seeds plus the mean MSE of each sensing set."""
    runs = _map(_basin_job, [dict(kwargs, seed=sd) for sd in seeds], workers)
    summary = {
        key: math.fsum(r[key] for r in runs) / len(runs) for key in ("mse_greedy", "mse_random", "mse_full")
    }
    return runs, summary


def trajectory_rows(run):
    """Long-format rows of true and estimated states at the probe nodes."""
    rows = []
    truth = run["_truth"]
    for name, est in run["_trajectories"].items():
        for k in range(est.shape[0]):
            for j, node in enumerate(run["probes"]):
                rows.append({"run": name, "step": k, "node": node, "true_state": truth[k, j],
                             "estimate": est[k, j]})
    return rows
