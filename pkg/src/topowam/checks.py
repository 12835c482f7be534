"""Oracle and invariant checks run by ``topowam check``.

Each check returns a :class:`CheckResult` with the measured worst-case value
and its tolerance.  Sample sizes default to the full acceptance sizes;
``quick`` shrinks them for smoke runs.
"""
import time
from dataclasses import dataclass

import numpy as np

from . import body, oracle, ppo
from .delaunay import delaunay_edges, jitter_points
from .env import EnvConfig, Scene, WamEnv, reset
from .network import NetworkSpec, init_params
from .topology import (
    _gli_closed,
    curve_gli,
    laplacian_coords,
    scene_linking,
    segment_distance,
    writhe_matrix,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""
    # wall time is reported but kept out of the CSV so repeated runs write identical files
    seconds: float = 0.0


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_segment_pairs(n, rng, min_sep=0.01):
    """Segment pairs in [-1, 1]^3 whose separation exceeds ``min_sep``."""
    pairs = []
    while len(pairs) < n:
        p = rng.uniform(-1.0, 1.0, size=(4, 3))
        if segment_distance(p[0], p[1], p[2], p[3]) > min_sep:
            pairs.append(p)
    return np.array(pairs)


def random_curve(rng, n_segments, step=0.3):
    return np.cumsum(rng.normal(0.0, step, size=(n_segments + 1, 3)), axis=0)


def check_gli_quadrature(n=1000, seed=0, tol=1e-6, time_limit=60.0):
    rng = np.random.default_rng(seed)
    pairs = random_segment_pairs(n, rng)
    start = time.perf_counter()
    closed = _gli_closed(pairs[:, 0], pairs[:, 1], pairs[:, 2], pairs[:, 3])
    quad = np.array([oracle.gli_quadrature((p[0], p[1]), (p[2], p[3])) for p in pairs])
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(closed - quad)))
    return CheckResult("gli_vs_quadrature", err <= tol and elapsed < time_limit, err, tol,
                       f"{n} pairs, max abs error {err:.2e}, time limit {time_limit:.0f} s", elapsed)


def check_writhe_consistency(n=100, seed=1, tol=1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        c1 = random_curve(rng, int(rng.integers(5, 13)))
        c2 = random_curve(rng, int(rng.integers(5, 13))) + rng.normal(0, 0.5, 3)
        worst = max(worst, abs(writhe_matrix(c1, c2).total() - curve_gli(c1, c2)))
    return CheckResult("writhe_sum_equals_curve_gli", worst <= tol, worst, tol, f"{n} curve pairs")


def check_invariance(n=100, seed=2, tol=1e-9, tol_exact=1e-12):
    """Rigid/scale invariance, orientation antisymmetry and Laplacian weight properties."""
    rng = np.random.default_rng(seed)
    rigid = antisym = rowsum = wscale = 0.0
    for _ in range(n):
        c1 = random_curve(rng, int(rng.integers(5, 13)))
        c2 = random_curve(rng, int(rng.integers(5, 13))) + rng.normal(0, 0.5, 3)
        W = writhe_matrix(c1, c2).entries
        R = random_rotation(rng)
        t = rng.uniform(-2, 2, 3)
        s = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        moved = writhe_matrix(s * c1 @ R.T + t, s * c2 @ R.T + t).entries
        rigid = max(rigid, float(np.max(np.abs(moved - W))))
        flipped = writhe_matrix(c1[::-1], c2).entries
        antisym = max(antisym, float(np.max(np.abs(flipped + W[::-1]))))
        pts = rng.uniform(-1, 1, size=(int(rng.integers(8, 20)), 3))
        edges = delaunay_edges(pts)
        lc = laplacian_coords(pts, edges)
        rowsum = max(rowsum, float(np.max(np.abs(lc.weights.sum(axis=1) - 1.0))))
        lc_s = laplacian_coords(s * pts, edges)
        wscale = max(wscale, float(np.max(np.abs(lc_s.weights - lc.weights))))
    ok = rigid <= tol and antisym <= tol_exact and rowsum <= tol_exact and wscale <= tol_exact
    detail = (f"rigid+scale {rigid:.1e}, reversal {antisym:.1e}, weight sums {rowsum:.1e}, "
              f"weight scaling {wscale:.1e}")
    return CheckResult("invariance_suite", ok, max(rigid, antisym, rowsum, wscale), tol, detail)


def check_delaunay(n_sets=20, seed=3):
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(n_sets):
        pts = rng.uniform(-1, 1, size=(int(rng.integers(8, 13)), 3))
        fast = {tuple(e) for e in delaunay_edges(pts).tolist()}
        ref = {tuple(e) for e in oracle.delaunay_bruteforce(jitter_points(pts)).tolist()}
        mismatches += fast != ref
    return CheckResult("delaunay_vs_bruteforce", mismatches == 0, float(mismatches), 0.0,
                       f"{n_sets} point sets, {mismatches} mismatched")


def recorded_batch(spec, params, env_config, n_episodes=2, seed=0):
    """A PPO batch collected by running the (stochastic) policy in the environment."""
    from .trainer import run_episode

    env = WamEnv(env_config)
    rng = np.random.default_rng(seed)
    trajs = [run_episode(env, spec, params, [seed, 9, k], rng).trajectory for k in range(n_episodes)]
    return ppo.make_batch(trajs, ppo.TrainConfig().gamma)


def check_gradients(seeds=(0, 1, 2), n_samples=200, tol=1e-4, widths=128, t_max=10):
    worst = 0.0
    cfg = ppo.TrainConfig()
    env_config = EnvConfig(t_max=t_max)
    for seed in seeds:
        spec = NetworkSpec(tuple(env_config.input_sizes()), widths, widths, widths)
        params = init_params(spec, seed)
        batch = recorded_batch(spec, params, env_config, seed=seed)
        # probe away from the initial point so the ratio and clipping terms are active
        rng = np.random.default_rng(seed + 100)
        probe = {k: v + rng.normal(0.0, 0.02, v.shape) for k, v in params.items()}
        err = ppo.gradient_check(probe, lambda P: ppo.ppo_loss(spec, P, batch, cfg)[0],
                                 n_samples=n_samples, seed=seed)
        worst = max(worst, err)
    return CheckResult("ppo_gradient_check", worst <= tol, worst, tol,
                       f"{len(seeds)} seeds x {n_samples} parameters, max relative error {worst:.2e}")


def check_shapes():
    got = {}
    for scenario in ("upright", "horizontal"):
        cfg = EnvConfig(scenario=scenario)
        scene = Scene(cfg)
        state = reset(scene, 0)
        curves = scene.curves(state)
        W, _, _ = scene_linking(curves, curves, scenario)
        L = body.landmark_points(curves, scenario)
        obs = WamEnv(cfg).reset(0)
        got[scenario] = (W.shape, L.shape, obs.shape)
    expected = {"upright": ((20, 14), (38, 3), (394,)), "horizontal": ((15, 14), (49, 3), (357,))}
    ok = got == expected
    return CheckResult("observation_shapes", ok, 0.0 if ok else 1.0, 0.0, str(got))


def run_checks(quick=False, out=None):
    if quick:
        plan = [(check_gli_quadrature, dict(n=100)), (check_writhe_consistency, dict(n=20)),
                (check_invariance, dict(n=20)), (check_delaunay, dict(n_sets=5)),
                (check_gradients, dict(seeds=(0,), n_samples=50, widths=32, t_max=4)), (check_shapes, {})]
    else:
        plan = [(check_gli_quadrature, {}), (check_writhe_consistency, {}), (check_invariance, {}),
                (check_delaunay, {}), (check_gradients, {}), (check_shapes, {})]
    results = []
    for fn, kwargs in plan:
        start = time.perf_counter()
        r = fn(**kwargs)
        if not r.seconds:
            r.seconds = time.perf_counter() - start
        results.append(r)
    if out:
        from .harness import write_csv

        rows = [{"check": r.name, "passed": int(r.passed), "value": r.value, "tolerance": r.tolerance,
                 "detail": r.detail} for r in results]
        write_csv(out, ("check", "passed", "value", "tolerance", "detail"), rows, "checks")
    return results
