"""Discounted linear UCB over disjoint per-arm ridge regressors.

Each arm keeps its own exponentially weighted ridge state so the estimator
can track reward functions that drift over time.  A discount factor of 1
recovers the standard stationary LinUCB recursions exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BanditConfig",
    "ContextVector",
    "ArmState",
    "DiscountedLinUCB",
    "batch_solve",
    "corollary_gamma",
]


def corollary_gamma(budget, d, horizon, lo=0.5, hi=1.0 - 1e-6):
    """Discount factor tuned to a known variation budget over a horizon.

    Evaluates ``1 - (budget / (sqrt(d) * horizon)) ** (2/5)`` and clamps the
    result to ``[lo, hi]``: the raw expression leaves (0, 1) for very large
    budgets, and a discount of exactly 1 would disable forgetting.
    """
    if d < 1 or horizon < 1:
        raise ValueError("dimension and horizon must be positive")
    if budget < 0:
        raise ValueError("variation budget must be nonnegative")
    raw = 1.0 - (budget / (math.sqrt(d) * horizon)) ** 0.4
    return min(hi, max(lo, raw))


@dataclass
class BanditConfig:
    """Hyperparameters of the discounted LinUCB policy.

    lam    ridge regularization (> 0)
    gamma  discount factor in (0, 1]; 1 means no forgetting
    sigma  subgaussian constant; rewards must lie in [0, 2*sigma]
    delta  failure probability of the confidence ellipsoid, in (0, 1)
    S      norm bound assumed for the unknown parameter vectors
    U      norm bound enforced on context vectors
    d      context dimension
    K      number of arms
    """

    d: int
    K: int = 2
    lam: float = 1.0
    gamma: float = 0.99
    sigma: float = 0.5
    delta: float = 0.1
    S: float = 1.0
    U: float = math.sqrt(2.0)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("context dimension d must be >= 1")
        if self.K < 2:
            raise ValueError("need at least two arms")
        if not self.lam > 0:
            raise ValueError("regularization lam must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("discount factor out of range (0, 1]")
        if not self.sigma > 0:
            raise ValueError("subgaussian constant sigma must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("failure probability delta must be in (0, 1)")
        if not self.S > 0:
            raise ValueError("parameter bound S must be positive")
        if not self.U > 0:
            raise ValueError("context bound U must be positive")


class ContextVector:
    """Feature vector with an enforced Euclidean norm bound."""

    __slots__ = ("x", "bound")

    def __init__(self, values, bound):
        x = np.asarray(values, dtype=float)
        if x.ndim != 1:
            raise ValueError("context must be a flat vector")
        bound = float(bound)
        if bound <= 0:
            raise ValueError("norm bound must be positive")
        norm = float(np.linalg.norm(x))
        if norm > bound * (1.0 + 1e-12) + 1e-12:
            raise ValueError(f"context norm {norm:.6g} exceeds bound {bound:.6g}")
        self.x = x
        self.bound = bound

    def __len__(self):
        return self.x.size

    def __repr__(self):
        return f"ContextVector({self.x.tolist()}, bound={self.bound})"


def _solve(A, rhs):
    # Direct dense solve; the 2x2 case is unrolled because simulations call
    # this millions of times at context dimension 2.
    if A.shape[0] == 2:
        a, b = A[0, 0], A[0, 1]
        c, d = A[1, 0], A[1, 1]
        det = a * d - b * c
        r0, r1 = rhs[0], rhs[1]
        return np.array([(d * r0 - b * r1) / det, (a * r1 - c * r0) / det])
    return np.linalg.solve(A, rhs)


class ArmState:
    """Per-arm ridge state: design matrices, reward sum and point estimate."""

    __slots__ = ("V", "V_tilde", "b", "theta")

    def __init__(self, d, lam):
        self.V = lam * np.eye(d)
        self.V_tilde = lam * np.eye(d)
        self.b = np.zeros(d)
        self.theta = np.zeros(d)


class DiscountedLinUCB:
    """Disjoint-arm LinUCB with exponential forgetting.

    All arms share the context of a given round but keep independent ridge
    states.  Updates touch only the pulled arm:

        V      <- gamma   * V      + x x^T + (1 - gamma)   * lam * I
        V_tilde<- gamma^2 * V_tilde+ x x^T + (1 - gamma^2) * lam * I
        b      <- gamma * b + r * x,     theta <- V^{-1} b

    The ``(1 - gamma) * lam * I`` terms keep the regularization floor at
    exactly ``lam`` after every update.
    """

    def __init__(self, config):
        self.config = config
        self.arms = [ArmState(config.d, config.lam) for _ in range(config.K)]
        self.step = 0
        self._eye = np.eye(config.d)

    # -- scoring ---------------------------------------------------------

    def beta(self):
        """Confidence-ellipsoid width used for the next decision.

        For gamma = 1 the geometric-series ratio (1 - gamma^(2l)) /
        (1 - gamma^2) is replaced by its analytic limit l.
        """
        cfg = self.config
        if cfg.gamma == 1.0:
            ratio = float(self.step)
        else:
            g2 = cfg.gamma * cfg.gamma
            ratio = (1.0 - g2 ** self.step) / (1.0 - g2)
        inner = 2.0 * math.log(1.0 / cfg.delta) + cfg.d * math.log(
            1.0 + cfg.U * cfg.U * ratio / (cfg.lam * cfg.d)
        )
        return math.sqrt(cfg.lam) * cfg.S + cfg.sigma * math.sqrt(inner)

    def _as_context(self, x):
        if isinstance(x, ContextVector):
            x = x.x
        else:
            x = np.asarray(x, dtype=float)
        if x.shape != (self.config.d,):
            raise ValueError(f"context must have shape ({self.config.d},)")
        if float(np.linalg.norm(x)) > self.config.U * (1.0 + 1e-9) + 1e-9:
            raise ValueError("context norm exceeds the configured bound U")
        return x

    def ucb_score(self, arm, x, beta):
        """Optimistic estimate x^T theta + beta * ||x||, with the width
        measured through V^{-1} V_tilde V^{-1}."""
        st = self.arms[arm]
        x = self._as_context(x)
        y = _solve(st.V, x)
        width_sq = float(y @ st.V_tilde @ y)
        return float(x @ st.theta) + beta * math.sqrt(max(width_sq, 0.0))

    def scores(self, x, beta=None):
        if beta is None:
            beta = self.beta()
        x = self._as_context(x)
        out = np.empty(self.config.K)
        for i, st in enumerate(self.arms):
            y = _solve(st.V, x)
            width_sq = float(y @ st.V_tilde @ y)
            out[i] = float(x @ st.theta) + beta * math.sqrt(max(width_sq, 0.0))
        return out

    def select_arm(self, x, beta=None):
        # np.argmax returns the first maximum, so ties go to the lowest index.
        return int(np.argmax(self.scores(x, beta)))

    def greedy_arm(self, x):
        """Exploitation-only argmax of x^T theta, no confidence bonus."""
        x = self._as_context(x)
        return int(np.argmax([float(x @ st.theta) for st in self.arms]))

    # -- learning --------------------------------------------------------

    def update(self, arm, x, r):
        cfg = self.config
        if not 0 <= arm < cfg.K:
            raise ValueError(f"arm index {arm} out of range")
        r = float(r)
        if not 0.0 <= r <= 2.0 * cfg.sigma:
            raise ValueError(f"reward {r} outside [0, {2.0 * cfg.sigma}]")
        x = self._as_context(x)
        st = self.arms[arm]
        g = cfg.gamma
        xx = np.outer(x, x)
        st.V = g * st.V + xx + (1.0 - g) * cfg.lam * self._eye
        g2 = g * g
        st.V_tilde = g2 * st.V_tilde + xx + (1.0 - g2) * cfg.lam * self._eye
        st.b = g * st.b + r * x
        st.theta = _solve(st.V, st.b)
        self.step += 1

    # -- checkpointing ---------------------------------------------------

    def to_text(self):
        """Serialize to a line-oriented decimal text checkpoint.

        Layout: a ``name value`` line per config field plus ``step``, then
        per arm an ``arm i`` marker followed by the entries of V, V_tilde,
        b and theta, one decimal per line in row-major order.
        """
        cfg = self.config
        lines = ["dlinucb 1", f"d {cfg.d}", f"K {cfg.K}"]
        for name in ("lam", "gamma", "sigma", "delta", "S", "U"):
            lines.append(f"{name} {getattr(cfg, name)!r}")
        lines.append(f"step {self.step}")
        for i, st in enumerate(self.arms):
            lines.append(f"arm {i}")
            for arr in (st.V, st.V_tilde, st.b, st.theta):
                lines.extend(repr(float(v)) for v in np.ravel(arr))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = text.strip().splitlines()
        if not lines or lines[0] != "dlinucb 1":
            raise ValueError("not a recognized bandit checkpoint")
        fields = {}
        pos = 1
        for _ in range(9):  # d K lam gamma sigma delta S U step
            name, value = lines[pos].split()
            fields[name] = value
            pos += 1
        cfg = BanditConfig(
            d=int(fields["d"]),
            K=int(fields["K"]),
            lam=float(fields["lam"]),
            gamma=float(fields["gamma"]),
            sigma=float(fields["sigma"]),
            delta=float(fields["delta"]),
            S=float(fields["S"]),
            U=float(fields["U"]),
        )
        bandit = cls(cfg)
        bandit.step = int(fields["step"])
        d = cfg.d
        for i in range(cfg.K):
            if lines[pos] != f"arm {i}":
                raise ValueError(f"expected 'arm {i}' at line {pos + 1}")
            pos += 1
            st = bandit.arms[i]
            for name, shape in (("V", (d, d)), ("V_tilde", (d, d)),
                                ("b", (d,)), ("theta", (d,))):
                n = int(np.prod(shape))
                vals = np.array([float(v) for v in lines[pos:pos + n]])
                setattr(st, name, vals.reshape(shape))
                pos += n
        return bandit


def batch_solve(history, gamma, lam, arm, upto=None, d=None):
    """Closed-form weighted ridge estimate for one arm of a logged run.

    Recomputes theta directly from raw ``(arm, context, reward)`` triples:
    entries of the queried arm are weighted by ``gamma ** age``, where age
    counts subsequent pulls of that same arm (online updates discount an
    arm only when it is pulled).  Serves as an independent cross-check of
    the recursive updates.
    """
    if upto is None:
        upto = len(history)
    entries = [(np.asarray(x, dtype=float), float(r))
               for a, x, r in history[:upto] if a == arm]
    if d is None:
        for a, x, _ in history:
            d = len(x)
            break
    if d is None:
        raise ValueError("cannot infer the context dimension from an empty history")
    V = lam * np.eye(d)
    acc = np.zeros(d)
    m = len(entries)
    for j, (x, r) in enumerate(entries):
        w = gamma ** (m - 1 - j)
        V += w * np.outer(x, x)
        acc += w * r * x
    return np.linalg.solve(V, acc)
