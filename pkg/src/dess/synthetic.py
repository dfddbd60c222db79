"""Synthetic drifting linear-bandit environments with exact drift budgets.

Oracle parameter vectors live on an arc of the positive orthant:
theta = S * (cos(phi) u + sin(phi) v) with u, v orthonormal nonnegative
vectors of disjoint support, so rotations preserve the norm and keep every
mean reward inside the required box.  Abrupt drift applies m equally
spaced angle jumps; smooth drift zigzags by a fixed angle per step.  Every
jump moves each arm's parameter by exactly the configured magnitude, which
makes the realized variation budget an exact, measurable quantity.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["DriftSpec", "DriftingEnvironment", "make_env", "run_experiment"]


@dataclass
class DriftSpec:
    """Declared non-stationarity of a synthetic run.

    kind     "abrupt" (m jumps of size delta) or "smooth" (rho per step)
    horizon  stream length L
    budget   declared bound on the summed per-step parameter drift
    """

    kind: str
    horizon: int
    budget: float
    changes: int = 0         # abrupt: number of change points
    delta: float = 0.0       # abrupt: parameter shift per change point
    rho: float = 0.0         # smooth: parameter shift per step

    def __post_init__(self):
        if self.kind not in ("abrupt", "smooth"):
            raise ValueError("kind must be 'abrupt' or 'smooth'")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.kind == "abrupt":
            if self.changes < 0 or self.delta < 0:
                raise ValueError("changes and delta must be nonnegative")
            if self.changes * self.delta > self.budget + 1e-12:
                raise ValueError("declared budget smaller than the realized drift m*delta")
        else:
            if self.rho < 0:
                raise ValueError("rho must be nonnegative")
            if (self.horizon - 1) * self.rho > self.budget + 1e-12:
                raise ValueError("declared budget smaller than the realized drift (L-1)*rho")

    def realized_budget(self):
        if self.kind == "abrupt":
            return self.changes * self.delta
        return (self.horizon - 1) * self.rho


class DriftingEnvironment:
    """Linear bandit with a known per-step oracle parameter track.

    theta: (L, K, d) oracle parameters; contexts: (L, d) shared contexts;
    noise: (L,) additive reward noise.  Construction verifies that every
    realizable reward lands in [0, 2*sigma].
    """

    def __init__(self, theta, contexts, noise, sigma=0.5):
        self.theta = np.asarray(theta, dtype=float)
        self.contexts = np.asarray(contexts, dtype=float)
        self.noise = np.asarray(noise, dtype=float)
        self.sigma = float(sigma)
        if self.theta.ndim != 3 or self.contexts.ndim != 2 or self.noise.ndim != 1:
            raise ValueError("theta must be (L, K, d), contexts (L, d), noise (L,)")
        L = self.theta.shape[0]
        if self.contexts.shape[0] != L or self.noise.shape[0] != L:
            raise ValueError("track lengths disagree")
        self.means = np.einsum("ld,lkd->lk", self.contexts, self.theta)
        lo = float(self.means.min() - np.abs(self.noise).max())
        hi = float(self.means.max() + np.abs(self.noise).max())
        if lo < -1e-12 or hi > 2.0 * self.sigma + 1e-12:
            raise ValueError(
                f"mean-reward box infeasible: realizable rewards span [{lo:.4g}, {hi:.4g}]"
            )
        self.best_means = self.means.max(axis=1)
        self.cursor = 0

    @property
    def horizon(self):
        return self.theta.shape[0]

    @property
    def n_arms(self):
        return self.theta.shape[1]

    def context(self):
        if self.cursor >= self.horizon:
            raise ValueError("environment exhausted")
        return self.contexts[self.cursor]

    def oracle_arm(self, l=None):
        l = self.cursor if l is None else l
        return int(np.argmax(self.means[l]))  # ties to the lowest index

    def step(self, arm):
        """Play one arm; returns (context offered, realized reward)."""
        l = self.cursor
        if l >= self.horizon:
            raise ValueError("environment exhausted")
        if not 0 <= arm < self.n_arms:
            raise ValueError("arm index out of range")
        x = self.contexts[l]
        r = float(self.means[l, arm] + self.noise[l])
        self.cursor += 1
        return x, r

    def reset(self):
        self.cursor = 0

    def realized_budget(self):
        diffs = np.linalg.norm(np.diff(self.theta, axis=0), axis=2)
        return float(diffs.max(axis=1).sum())


def _support_direction(rng, idx, dim):
    comp = np.zeros(dim)
    vals = rng.uniform(0.5, 1.0, len(idx))
    comp[idx] = vals / np.linalg.norm(vals)
    return comp


def _exact_walk(phi0, step, lo, hi, n_moves, rng, persistent):
    """Angle sequence with exact |increment| == step, reflected in [lo, hi].

    Positions live on a grid anchored at the trajectory's own start, so the
    initial angle is kept exactly and a reflected move still travels one
    full step.  ``persistent`` keeps the direction until a wall forces a
    turn (smooth drift); otherwise each move draws a fresh direction.
    """
    if step <= 0 or n_moves == 0:
        return np.full(n_moves + 1, phi0)
    k_down = int(math.floor((phi0 - lo) / step + 1e-12))
    k_up = int(math.floor((hi - phi0) / step + 1e-12))
    max_k = k_down + k_up
    if max_k < 1:
        raise ValueError("drift step too large for the usable angle range")
    anchor = phi0 - k_down * step
    k = k_down
    ks = np.empty(n_moves + 1, dtype=int)
    ks[0] = k
    direction = 1 if rng.random() < 0.5 else -1
    for i in range(1, n_moves + 1):
        if not persistent:
            direction = 1 if rng.random() < 0.5 else -1
        if k + direction > max_k or k + direction < 0:
            direction = -direction
        k += direction
        ks[i] = k
    return anchor + ks * step


def make_env(spec, d, K, seed, sigma=0.5, nu=0.05, context_norm=1.0,
             theta_norm=None, margin=0.15):
    """Materialize a drifting environment from a declared drift spec.

    Contexts are uniform on the nonnegative orthant of the radius-
    ``context_norm`` sphere.  Oracle parameters keep norm ``theta_norm``
    (default: the largest norm compatible with rewards in [0, 2*sigma])
    and rotate inside an angle box that keeps every component positive
    enough for the noise band; an infeasible combination raises.
    """
    if d < 1 or K < 1:
        raise ValueError("d and K must be positive")
    rng = np.random.default_rng(seed)
    L = spec.horizon
    S = theta_norm if theta_norm is not None else (2.0 * sigma - nu) / context_norm
    if S <= 0:
        raise ValueError("mean-reward box infeasible: sigma too small for the noise")

    half = max(1, d // 2)
    u = _support_direction(rng, np.arange(half), d)
    v = _support_direction(rng, np.arange(half, d), d) if d > 1 else None
    lo, hi = margin, math.pi / 2.0 - margin
    if hi <= lo:
        raise ValueError("angle margin leaves no usable range")

    if spec.kind == "abrupt":
        if spec.changes and spec.delta > 2.0 * S:
            raise ValueError("per-change drift larger than the parameter diameter")
        if spec.changes and L < 2 * (spec.changes + 1):
            raise ValueError("horizon too short to place distinct change points")
        step_angle = 2.0 * math.asin(spec.delta / (2.0 * S)) if spec.changes else 0.0
        n_moves = spec.changes
        persistent = False
    else:
        if spec.rho > 2.0 * S:
            raise ValueError("per-step drift larger than the parameter diameter")
        step_angle = 2.0 * math.asin(spec.rho / (2.0 * S))
        n_moves = L - 1
        persistent = True
    if d == 1 and step_angle > 0:
        raise ValueError("norm-preserving drift needs at least two dimensions")

    span = hi - lo
    phis = np.empty((L, K))
    for a in range(K):
        phi0 = lo + (a + 0.5) * span / K + rng.uniform(-0.05, 0.05) * span / K
        phi0 = min(hi, max(lo, phi0))
        track = _exact_walk(phi0, step_angle, lo, hi, n_moves, rng, persistent)
        if spec.kind == "abrupt":
            keyframes = np.full(L, track[0])
            for j in range(1, spec.changes + 1):
                change_at = math.floor(j * L / (spec.changes + 1))
                keyframes[change_at:] = track[j]
            phis[:, a] = keyframes
        else:
            phis[:, a] = track[:L]

    if d == 1:
        theta = S * np.ones((L, K, 1))
    else:
        theta = S * (np.cos(phis)[..., None] * u + np.sin(phis)[..., None] * v)

    # worst-case mean reward over the orthant sphere is attained at a
    # coordinate direction, so positivity of each component gives the floor
    min_component = float(theta.min()) if d > 1 else S
    if context_norm * min_component < nu - 1e-12:
        raise ValueError("mean-reward box infeasible: drift range reaches too close to zero")
    if context_norm * S > 2.0 * sigma - nu + 1e-12:
        raise ValueError("mean-reward box infeasible: parameter norm too large")

    g = np.abs(rng.standard_normal((L, d)))
    contexts = context_norm * g / np.linalg.norm(g, axis=1, keepdims=True)
    noise = rng.uniform(-nu, nu, L) if nu > 0 else np.zeros(L)
    return DriftingEnvironment(theta, contexts, noise, sigma=sigma)


def run_experiment(policy, env, checkpoint_every=None):
    """Play a policy against an environment; returns the regret curve.

    Regret accumulates the noise-free gap between the oracle arm's mean
    reward and the played arm's; the result is a pair of aligned arrays
    (checkpoint steps, cumulative regret at those steps).
    """
    env.reset()
    L = env.horizon
    if checkpoint_every is None:
        checkpoint_every = max(1, L // 100)
    steps, curve = [], []
    total = 0.0
    for l in range(L):
        x = env.context()
        arm = policy.select_arm(x)
        _, r = env.step(arm)
        policy.update(arm, x, r)
        total += env.best_means[l] - env.means[l, arm]
        if (l + 1) % checkpoint_every == 0 or l == L - 1:
            steps.append(l + 1)
            curve.append(total)
    return np.array(steps), np.array(curve)
