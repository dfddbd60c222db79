"""Embedding-size-adaptive recommendation model with manual gradients.

Every user and item owns an embedding whose length is one rung of a shared
size ladder.  A chain of shared linear maps lifts any rung to the top size
before the representation head, so ids of different sizes can be mixed in
one mini-batch.  Growing an id replaces its vector with the chain image of
the old one (warm initialization), which leaves eval-mode predictions
unchanged at the moment of expansion.

Training is plain numpy: forward, analytic backward and an Adam update.
No autodiff framework is involved, which keeps single-interaction probes
(`temp_evaluate`) cheap and bit-reproducible.
"""

import ast
import math
import zlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SizeLadder",
    "ModelConfig",
    "AdaptiveEmbeddingModel",
    "binary_mse_loss",
    "multiclass_ce_loss",
    "DEFAULT_SIZES",
]

DEFAULT_SIZES = (2, 4, 8, 16, 64, 128)

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8


class SizeLadder:
    """Ordered candidate embedding sizes; ids may only climb rungs.

    Equal adjacent sizes are allowed so a pinned ladder like [s, s] can act
    as a fixed-size baseline inside the same machinery.
    """

    def __init__(self, sizes=DEFAULT_SIZES):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2:
            raise ValueError("size ladder needs at least two rungs")
        if any(s < 1 for s in sizes):
            raise ValueError("embedding sizes must be positive")
        if any(b < a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("size ladder must be non-decreasing")
        self.sizes = sizes

    @property
    def top(self):
        return len(self.sizes) - 1

    def __len__(self):
        return len(self.sizes)

    def __getitem__(self, i):
        return self.sizes[i]

    def __repr__(self):
        return f"SizeLadder({list(self.sizes)})"


@dataclass
class ModelConfig:
    head: str = "mlp"          # "mlp" | "mf"
    task: str = "binary"       # "binary" | "multiclass"
    hidden: int = 512
    eta: float = 1e-3
    l2: float = 1e-3
    batch: int = 500
    eps_bn: float = 1e-5
    bn_momentum: float = 0.1
    use_bn: bool = True
    cold_init: bool = False    # re-randomize on growth instead of the warm map

    n_classes = 5

    def __post_init__(self):
        if self.head not in ("mlp", "mf"):
            raise ValueError("head must be 'mlp' or 'mf'")
        if self.task not in ("binary", "multiclass"):
            raise ValueError("task must be 'binary' or 'multiclass'")
        for name in ("hidden", "batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("eta", "l2", "eps_bn", "bn_momentum"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


# -- losses -----------------------------------------------------------------

def binary_mse_loss(raw, targets):
    """Squared error between sigmoid(raw) and the 0/1 target.

    Returns the mean loss and its gradient with respect to raw.
    """
    raw = np.asarray(raw, dtype=float)
    targets = np.asarray(targets, dtype=float)
    p = 1.0 / (1.0 + np.exp(-raw))
    diff = p - targets
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff * p * (1.0 - p) / raw.size
    return loss, grad


def multiclass_ce_loss(logits, classes):
    """Softmax cross-entropy over class logits.

    Returns the mean loss and its gradient with respect to the logits.
    """
    logits = np.asarray(logits, dtype=float)
    classes = np.asarray(classes, dtype=int)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    sm = exp / exp.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    picked = sm[np.arange(n), classes]
    loss = float(np.mean(-np.log(picked)))
    grad = sm.copy()
    grad[np.arange(n), classes] -= 1.0
    return loss, grad / n


# -- batch normalization ------------------------------------------------------

class _BatchNorm:
    """Non-affine batch normalization with running statistics."""

    __slots__ = ("mean", "var", "eps", "momentum")

    def __init__(self, dim, eps=1e-5, momentum=0.1):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.eps = eps
        self.momentum = momentum

    def forward(self, X, training):
        if training:
            mu = X.mean(axis=0)
            var = X.var(axis=0)
            inv = 1.0 / np.sqrt(var + self.eps)
            Xhat = (X - mu) * inv
            return Xhat, ("train", Xhat, inv, X.shape[0], mu, var)
        inv = 1.0 / np.sqrt(self.var + self.eps)
        return (X - self.mean) * inv, ("eval", inv)

    def backward(self, dXhat, cache):
        if cache[0] == "eval":
            return dXhat * cache[1]
        _, Xhat, inv, n, _, _ = cache
        return (inv / n) * (n * dXhat - dXhat.sum(axis=0)
                            - Xhat * (dXhat * Xhat).sum(axis=0))

    def commit(self, cache):
        # fold one mini-batch's statistics into the running estimates
        _, _, _, _, mu, var = cache
        m = self.momentum
        self.mean = (1.0 - m) * self.mean + m * mu
        self.var = (1.0 - m) * self.var + m * var


class _Slot:
    """Per-id embedding state: current rung, vector and Adam moments."""

    __slots__ = ("rung", "vec", "m", "v", "t")

    def __init__(self, rung, vec):
        self.rung = rung
        self.vec = vec
        self.m = None
        self.v = None
        self.t = 0


def _key_hash(key):
    return zlib.crc32(repr(key).encode("utf-8"))


class AdaptiveEmbeddingModel:
    """Variable-size embeddings + shared transform chain + prediction head."""

    def __init__(self, ladder=None, config=None, seed=0):
        self.ladder = ladder if ladder is not None else SizeLadder()
        self.config = config if config is not None else ModelConfig()
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        sizes = self.ladder.sizes
        self.n_transforms = len(sizes) - 1
        cfg = self.config

        self.params = {}
        # Near-identity chain: identity in the top block plus small noise
        # everywhere, so a freshly lifted embedding stays close to its
        # source while no output channel is exactly constant (constant
        # channels would degenerate the downstream batch norm).
        for i in range(self.n_transforms):
            s_in, s_out = sizes[i], sizes[i + 1]
            W = 0.01 * rng.standard_normal((s_out, s_in))
            W[:s_in, :s_in] += np.eye(s_in)
            self.params[f"chain_W{i}"] = W
            self.params[f"chain_b{i}"] = np.zeros(s_out)

        s_n = sizes[-1]
        self.bn_user = _BatchNorm(s_n, cfg.eps_bn, cfg.bn_momentum)
        self.bn_item = _BatchNorm(s_n, cfg.eps_bn, cfg.bn_momentum)
        self.out_dim = 1 if cfg.task == "binary" else cfg.n_classes
        if cfg.head == "mlp":
            self.bn_h1 = _BatchNorm(2 * s_n, cfg.eps_bn, cfg.bn_momentum)
            self.bn_h2 = _BatchNorm(cfg.hidden, cfg.eps_bn, cfg.bn_momentum)
            k1 = 1.0 / math.sqrt(2 * s_n)
            self.params["head_W1"] = rng.uniform(-k1, k1, (cfg.hidden, 2 * s_n))
            self.params["head_b1"] = rng.uniform(-k1, k1, cfg.hidden)
            k2 = 1.0 / math.sqrt(cfg.hidden)
            self.params["head_W2"] = rng.uniform(-k2, k2, (self.out_dim, cfg.hidden))
            self.params["head_b2"] = rng.uniform(-k2, k2, self.out_dim)
        elif cfg.task == "multiclass":
            # map the interaction score to class logits with a learned affine
            self.params["head_scale"] = rng.uniform(-1.0, 1.0, cfg.n_classes)
            self.params["head_bias"] = np.zeros(cfg.n_classes)

        self.users = {}
        self.items = {}
        self._m = {name: np.zeros_like(p) for name, p in self.params.items()}
        self._v = {name: np.zeros_like(p) for name, p in self.params.items()}
        self._t = 0

    # -- id bookkeeping ----------------------------------------------------

    def _fresh_vec(self, key, side, rung):
        size = self.ladder[rung]
        side_code = 1 if side == "user" else 2
        rng = np.random.default_rng((self.seed, side_code, _key_hash(key), rung))
        return rng.uniform(-1.0, 1.0, size) / math.sqrt(size)

    def _table(self, side):
        if side == "user":
            return self.users
        if side == "item":
            return self.items
        raise ValueError(f"side must be 'user' or 'item', got {side!r}")

    def _slot(self, key, side, persist):
        table = self._table(side)
        slot = table.get(key)
        if slot is None:
            slot = _Slot(0, self._fresh_vec(key, side, 0))
            if persist:
                table[key] = slot
        return slot

    def touch(self, users=(), items=()):
        """Materialize ids at the smallest size without training them."""
        for key in users:
            self._slot(key, "user", persist=True)
        for key in items:
            self._slot(key, "item", persist=True)

    def rung(self, key, side):
        slot = self._table(side).get(key)
        return 0 if slot is None else slot.rung

    def at_top(self, key, side):
        return self.rung(key, side) >= self.ladder.top

    def expand(self, key, side):
        """Grow one id to the next rung.

        Warm growth maps the old vector through the shared chain transform;
        with ``cold_init`` the new vector is re-randomized instead.  Adam
        moments are reset because the parameter changes dimension.
        """
        slot = self._slot(key, side, persist=True)
        r = slot.rung
        if r >= self.ladder.top:
            raise ValueError(f"{side} {key!r} already has the largest embedding size")
        if self.config.cold_init:
            vec = self._fresh_vec(key, side, r + 1)
        else:
            vec = self.params[f"chain_W{r}"] @ slot.vec + self.params[f"chain_b{r}"]
        slot.rung = r + 1
        slot.vec = vec
        slot.m = None
        slot.v = None
        slot.t = 0

    def param_count(self):
        """(embedding parameters, total parameters)."""
        emb = sum(s.vec.size for s in self.users.values())
        emb += sum(s.vec.size for s in self.items.values())
        total = emb + sum(p.size for p in self.params.values())
        return emb, total

    def parameters(self):
        """Live parameter arrays, keyed; embeddings as ``emb.<side>.<key!r>``."""
        out = dict(self.params)
        for side, table in (("user", self.users), ("item", self.items)):
            for key, slot in table.items():
                out[f"emb.{side}.{key!r}"] = slot.vec
        return out

    # -- forward / backward -------------------------------------------------

    def _chain_forward(self, rows):
        """Lift per-row (rung, vec) pairs to the top size.

        Returns the (B, s_n) output and per-rung caches of the transform
        inputs needed for the backward pass.
        """
        s_n = self.ladder[-1]
        Z = np.empty((len(rows), s_n))
        groups = {}
        for idx, (rung, _) in enumerate(rows):
            groups.setdefault(rung, []).append(idx)
        caches = []
        for rung in sorted(groups):
            idxs = np.array(groups[rung])
            H = np.stack([rows[i][1] for i in idxs])
            inputs = []
            for j in range(rung, self.n_transforms):
                inputs.append(H)
                H = H @ self.params[f"chain_W{j}"].T + self.params[f"chain_b{j}"]
            Z[idxs] = H
            caches.append((rung, idxs, inputs))
        return Z, caches

    def _chain_backward(self, dZ, caches, grads, capture_rung=None):
        """Backpropagate through the chain; returns per-row embedding grads.

        When ``capture_rung`` is given, also returns the gradient at that
        stage for row 0 (the grad a freshly lifted embedding would receive).
        """
        emb_grads = [None] * len(dZ)
        captured = None
        for rung, idxs, inputs in caches:
            G = dZ[idxs]
            row0 = int(np.where(idxs == 0)[0][0]) if 0 in idxs else None
            for j in range(self.n_transforms - 1, rung - 1, -1):
                # entering iteration j, G holds the gradient at stage j + 1
                if capture_rung == j + 1 and row0 is not None:
                    captured = G[row0].copy()
                grads[f"chain_W{j}"] += G.T @ inputs[j - rung]
                grads[f"chain_b{j}"] += G.sum(axis=0)
                G = G @ self.params[f"chain_W{j}"]
            for pos, i in enumerate(idxs):
                emb_grads[i] = G[pos]
        return emb_grads, captured

    def _forward(self, u_rows, i_rows, training):
        """Full forward pass; returns raw outputs and the backward cache."""
        cfg = self.config
        Zu, cu = self._chain_forward(u_rows)
        Zi, ci = self._chain_forward(i_rows)
        cache = {"chain_u": cu, "chain_i": ci, "commits": []}
        if cfg.use_bn:
            Xu, bu = self.bn_user.forward(Zu, training)
            Xi, bi = self.bn_item.forward(Zi, training)
            Au, Ai = np.tanh(Xu), np.tanh(Xi)
            cache.update(bn_u=bu, bn_i=bi, Au=Au, Ai=Ai)
            if training:
                cache["commits"] += [(self.bn_user, bu), (self.bn_item, bi)]
        else:
            Au, Ai = Zu, Zi
            cache.update(Au=Au, Ai=Ai)

        if cfg.head == "mlp":
            H0 = np.concatenate([Au, Ai], axis=1)
            if cfg.use_bn:
                X1, b1 = self.bn_h1.forward(H0, training)
                if training:
                    cache["commits"].append((self.bn_h1, b1))
            else:
                X1, b1 = H0, None
            Z2 = X1 @ self.params["head_W1"].T + self.params["head_b1"]
            if cfg.use_bn:
                X2, b2 = self.bn_h2.forward(Z2, training)
                if training:
                    cache["commits"].append((self.bn_h2, b2))
            else:
                X2, b2 = Z2, None
            T = np.tanh(X2)
            Y = T @ self.params["head_W2"].T + self.params["head_b2"]
            raw = Y[:, 0] if cfg.task == "binary" else Y
            cache.update(X1=X1, bn1=b1, bn2=b2, T=T)
        else:
            score = np.einsum("bi,bi->b", Au, Ai)
            cache["score"] = score
            if cfg.task == "binary":
                raw = score
            else:
                raw = score[:, None] * self.params["head_scale"] + self.params["head_bias"]
        return raw, cache

    def _loss_from_raw(self, raw, targets):
        if self.config.task == "binary":
            return binary_mse_loss(raw, targets)
        return multiclass_ce_loss(raw, targets)

    def _backward(self, draw, cache, capture=None):
        """Backward from d(loss)/d(raw) to all parameter gradients.

        ``capture`` is an optional ("user"|"item", rung) pair selecting the
        lifted-stage gradient of row 0 on that side.
        """
        cfg = self.config
        grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        Au, Ai = cache["Au"], cache["Ai"]

        if cfg.head == "mlp":
            dY = draw[:, None] if cfg.task == "binary" else draw
            T = cache["T"]
            grads["head_W2"] += dY.T @ T
            grads["head_b2"] += dY.sum(axis=0)
            dT = dY @ self.params["head_W2"]
            dX2 = dT * (1.0 - T * T)
            dZ2 = self.bn_h2.backward(dX2, cache["bn2"]) if cfg.use_bn else dX2
            grads["head_W1"] += dZ2.T @ cache["X1"]
            grads["head_b1"] += dZ2.sum(axis=0)
            dX1 = dZ2 @ self.params["head_W1"]
            dH0 = self.bn_h1.backward(dX1, cache["bn1"]) if cfg.use_bn else dX1
            s_n = self.ladder[-1]
            dAu, dAi = dH0[:, :s_n], dH0[:, s_n:]
        else:
            if cfg.task == "binary":
                ds = draw
            else:
                ds = draw @ self.params["head_scale"]
                grads["head_scale"] += draw.T @ cache["score"]
                grads["head_bias"] += draw.sum(axis=0)
            dAu = ds[:, None] * Ai
            dAi = ds[:, None] * Au

        if cfg.use_bn:
            dZu = self.bn_user.backward(dAu * (1.0 - Au * Au), cache["bn_u"])
            dZi = self.bn_item.backward(dAi * (1.0 - Ai * Ai), cache["bn_i"])
        else:
            dZu, dZi = dAu, dAi

        cap_u = capture[1] if capture and capture[0] == "user" else None
        cap_i = capture[1] if capture and capture[0] == "item" else None
        gu, captured_u = self._chain_backward(dZu, cache["chain_u"], grads, cap_u)
        gi, captured_i = self._chain_backward(dZi, cache["chain_i"], grads, cap_i)
        captured = captured_u if captured_u is not None else captured_i
        return grads, gu, gi, captured

    # -- public computation ---------------------------------------------------

    def _rows(self, users, items, persist):
        u_rows = []
        for key in users:
            s = self._slot(key, "user", persist)
            u_rows.append((s.rung, s.vec))
        i_rows = []
        for key in items:
            s = self._slot(key, "item", persist)
            i_rows.append((s.rung, s.vec))
        return u_rows, i_rows

    def loss_on(self, triples, training=True):
        """Mean task loss of a batch; pure (no statistics/parameter updates)."""
        users, items, targets = zip(*triples)
        u_rows, i_rows = self._rows(users, items, persist=False)
        raw, _ = self._forward(u_rows, i_rows, training)
        loss, _ = self._loss_from_raw(raw, np.asarray(targets))
        return loss

    def loss_and_grads(self, triples, training=True):
        """Mean task loss and analytic gradients (pure, for verification).

        Gradient keys match :meth:`parameters`; only embeddings present in
        the batch appear.
        """
        users, items, targets = zip(*triples)
        u_rows, i_rows = self._rows(users, items, persist=False)
        raw, cache = self._forward(u_rows, i_rows, training)
        loss, draw = self._loss_from_raw(raw, np.asarray(targets))
        grads, gu, gi, _ = self._backward(draw, cache)
        for key, g in zip(users, gu):
            name = f"emb.user.{key!r}"
            grads[name] = grads.get(name, 0.0) + g
        for key, g in zip(items, gi):
            name = f"emb.item.{key!r}"
            grads[name] = grads.get(name, 0.0) + g
        return loss, grads

    def train_step(self, triples):
        """One mini-batch update; returns the pre-update mean loss."""
        if not triples:
            raise ValueError("training batch must be non-empty")
        users, items, targets = zip(*triples)
        u_rows, i_rows = self._rows(users, items, persist=True)
        raw, cache = self._forward(u_rows, i_rows, training=True)
        loss, draw = self._loss_from_raw(raw, np.asarray(targets))
        grads, gu, gi, _ = self._backward(draw, cache)
        for bn, c in cache["commits"]:
            bn.commit(c)
        self._apply_adam(grads)
        self._apply_adam_embeddings(users, gu, "user")
        self._apply_adam_embeddings(items, gi, "item")
        return loss

    def _apply_adam(self, grads):
        cfg = self.config
        self._t += 1
        c1 = 1.0 - _ADAM_B1 ** self._t
        c2 = 1.0 - _ADAM_B2 ** self._t
        for name, p in self.params.items():
            g = grads[name] + cfg.l2 * p
            m, v = self._m[name], self._v[name]
            m *= _ADAM_B1
            m += (1.0 - _ADAM_B1) * g
            v *= _ADAM_B2
            v += (1.0 - _ADAM_B2) * (g * g)
            p -= cfg.eta * (m / c1) / (np.sqrt(v / c2) + _ADAM_EPS)

    def _apply_adam_embeddings(self, keys, row_grads, side):
        cfg = self.config
        table = self._table(side)
        acc = {}
        for key, g in zip(keys, row_grads):
            if key in acc:
                acc[key] = acc[key] + g
            else:
                acc[key] = g
        for key, g in acc.items():
            slot = table[key]
            g = g + cfg.l2 * slot.vec
            if slot.m is None:
                slot.m = np.zeros_like(slot.vec)
                slot.v = np.zeros_like(slot.vec)
            slot.t += 1
            slot.m *= _ADAM_B1
            slot.m += (1.0 - _ADAM_B1) * g
            slot.v *= _ADAM_B2
            slot.v += (1.0 - _ADAM_B2) * (g * g)
            c1 = 1.0 - _ADAM_B1 ** slot.t
            c2 = 1.0 - _ADAM_B2 ** slot.t
            slot.vec = slot.vec - cfg.eta * (slot.m / c1) / (np.sqrt(slot.v / c2) + _ADAM_EPS)

    def forward(self, user, item, mode="eval"):
        """Raw prediction for one pair: a scalar (binary) or class logits.

        ``mode='train'`` normalizes with the statistics of this singleton
        batch, which is degenerate; real training goes through
        :meth:`train_step` with proper mini-batches.
        """
        if mode not in ("train", "eval"):
            raise ValueError("mode must be 'train' or 'eval'")
        u_rows, i_rows = self._rows([user], [item], persist=False)
        raw, _ = self._forward(u_rows, i_rows, training=(mode == "train"))
        return float(raw[0]) if self.config.task == "binary" else raw[0]

    def evaluate(self, triples):
        """Mean loss and accuracy on held-out triples; mutates nothing."""
        if not triples:
            return 0.0, 0.0
        cfg = self.config
        total_loss = 0.0
        correct = 0
        for start in range(0, len(triples), cfg.batch):
            chunk = triples[start:start + cfg.batch]
            users, items, targets = zip(*chunk)
            u_rows, i_rows = self._rows(users, items, persist=False)
            raw, _ = self._forward(u_rows, i_rows, training=False)
            targets = np.asarray(targets)
            loss, _ = self._loss_from_raw(raw, targets)
            total_loss += loss * len(chunk)
            if cfg.task == "binary":
                correct += int(np.sum((raw >= 0.0) == (targets >= 0.5)))
            else:
                correct += int(np.sum(np.argmax(raw, axis=1) == targets))
        n = len(triples)
        return total_loss / n, correct / n

    def temp_evaluate(self, user, item, target, side, propose_increase):
        """Probe whether growing one id would help on a single interaction.

        Clones the two affected embeddings, applies one plain gradient step
        (embeddings only, frozen chain/head, eval-mode statistics) to the
        current structure and to the structure with ``side`` grown one rung,
        and returns the two post-step losses ``(l_old, l_new)``.  Permanent
        state is never touched; a keep proposal or an id already at the top
        rung yields ``l_new == l_old`` exactly.
        """
        su = self._slot(user, "user", persist=False)
        si = self._slot(item, "item", persist=False)
        focal = su if side == "user" else si
        can_grow = focal.rung < self.ladder.top
        want_warm_lift = propose_increase and can_grow and not self.config.cold_init
        capture = (side, focal.rung + 1) if want_warm_lift else None

        targets = np.asarray([target])
        raw, cache = self._forward([(su.rung, su.vec)], [(si.rung, si.vec)],
                                   training=False)
        _, draw = self._loss_from_raw(raw, targets)
        _, gu, gi, g_lift = self._backward(draw, cache, capture=capture)

        eta = self.config.eta
        new_u = su.vec - eta * gu[0]
        new_i = si.vec - eta * gi[0]
        l_old = self._pair_loss((su.rung, new_u), (si.rung, new_i), targets)
        if not propose_increase or not can_grow:
            return l_old, l_old

        r = focal.rung
        if self.config.cold_init:
            key = user if side == "user" else item
            lifted = self._fresh_vec(key, side, r + 1)
            # a cold clone changes the forward values, so its gradients
            # cannot be reused from the warm pass
            if side == "user":
                raw2, cache2 = self._forward([(r + 1, lifted)], [(si.rung, si.vec)],
                                             training=False)
            else:
                raw2, cache2 = self._forward([(su.rung, su.vec)], [(r + 1, lifted)],
                                             training=False)
            _, draw2 = self._loss_from_raw(raw2, targets)
            _, gu2, gi2, _ = self._backward(draw2, cache2)
            if side == "user":
                l_new = self._pair_loss((r + 1, lifted - eta * gu2[0]),
                                        (si.rung, si.vec - eta * gi2[0]), targets)
            else:
                l_new = self._pair_loss((su.rung, su.vec - eta * gu2[0]),
                                        (r + 1, lifted - eta * gi2[0]), targets)
        else:
            lifted = self.params[f"chain_W{r}"] @ focal.vec + self.params[f"chain_b{r}"]
            stepped = lifted - eta * g_lift
            if side == "user":
                l_new = self._pair_loss((r + 1, stepped), (si.rung, new_i), targets)
            else:
                l_new = self._pair_loss((su.rung, new_u), (r + 1, stepped), targets)
        return l_old, l_new

    def _pair_loss(self, u_row, i_row, targets):
        raw, _ = self._forward([u_row], [i_row], training=False)
        loss, _ = self._loss_from_raw(raw, targets)
        return loss

    # -- checkpointing ----------------------------------------------------

    def to_text(self):
        """Serialize ladder, chain, batch-norm state, head weights and all
        per-id embeddings to a line-oriented decimal text form.

        Optimizer moments are not stored; a reloaded model predicts
        identically but restarts Adam from scratch.
        """
        cfg = self.config
        lines = ["adaptive-model 1"]
        lines.append("sizes " + ",".join(str(s) for s in self.ladder.sizes))
        lines.append(f"head {cfg.head}")
        lines.append(f"task {cfg.task}")
        for name in ("hidden", "batch"):
            lines.append(f"{name} {getattr(cfg, name)}")
        for name in ("eta", "l2", "eps_bn", "bn_momentum"):
            lines.append(f"{name} {getattr(cfg, name)!r}")
        lines.append(f"use_bn {int(cfg.use_bn)}")
        lines.append(f"cold_init {int(cfg.cold_init)}")
        lines.append(f"seed {self.seed}")
        for name in sorted(self.params):
            p = self.params[name]
            lines.append(f"param {name} {' '.join(str(s) for s in p.shape)}")
            lines.extend(repr(float(v)) for v in np.ravel(p))
        for label, bn in self._bn_slots():
            lines.append(f"bn {label} {bn.mean.size}")
            lines.extend(repr(float(v)) for v in bn.mean)
            lines.extend(repr(float(v)) for v in bn.var)
        for side, table in (("user", self.users), ("item", self.items)):
            lines.append(f"{side}s {len(table)}")
            for key, slot in table.items():
                lines.append(f"id {key!r} {slot.rung} {slot.vec.size}")
                lines.extend(repr(float(v)) for v in slot.vec)
        return "\n".join(lines) + "\n"

    def _bn_slots(self):
        out = [("bn_user", self.bn_user), ("bn_item", self.bn_item)]
        if self.config.head == "mlp":
            out += [("bn_h1", self.bn_h1), ("bn_h2", self.bn_h2)]
        return out

    @classmethod
    def from_text(cls, text):
        lines = text.strip().splitlines()
        if not lines or lines[0] != "adaptive-model 1":
            raise ValueError("not a recognized model checkpoint")
        header = {}
        pos = 1
        while pos < len(lines) and not lines[pos].startswith(("param ", "bn ")):
            name, value = lines[pos].split(None, 1)
            header[name] = value
            pos += 1
        ladder = SizeLadder([int(s) for s in header["sizes"].split(",")])
        cfg = ModelConfig(
            head=header["head"], task=header["task"],
            hidden=int(header["hidden"]), batch=int(header["batch"]),
            eta=float(header["eta"]), l2=float(header["l2"]),
            eps_bn=float(header["eps_bn"]), bn_momentum=float(header["bn_momentum"]),
            use_bn=bool(int(header["use_bn"])), cold_init=bool(int(header["cold_init"])),
        )
        model = cls(ladder, cfg, seed=int(header["seed"]))

        def take(n):
            nonlocal pos
            vals = np.array([float(v) for v in lines[pos:pos + n]])
            pos += n
            return vals

        while pos < len(lines) and lines[pos].startswith("param "):
            parts = lines[pos].split()
            name, shape = parts[1], tuple(int(s) for s in parts[2:])
            pos += 1
            model.params[name] = take(int(np.prod(shape))).reshape(shape)
        model._m = {n: np.zeros_like(p) for n, p in model.params.items()}
        model._v = {n: np.zeros_like(p) for n, p in model.params.items()}
        bn_map = dict(model._bn_slots())
        while pos < len(lines) and lines[pos].startswith("bn "):
            _, label, size = lines[pos].split()
            pos += 1
            bn = bn_map[label]
            bn.mean = take(int(size))
            bn.var = take(int(size))
        for side in ("user", "item"):
            head, count = lines[pos].split()
            if head != f"{side}s":
                raise ValueError(f"expected '{side}s' section at line {pos + 1}")
            pos += 1
            table = model._table(side)
            for _ in range(int(count)):
                parts = lines[pos].rsplit(None, 2)
                key = ast.literal_eval(parts[0].split(None, 1)[1])
                rung, size = int(parts[1]), int(parts[2])
                pos += 1
                table[key] = _Slot(rung, take(size))
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())
