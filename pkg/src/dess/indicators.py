"""Streaming frequency and diversity statistics for users and items.

Tracks, per id, the interaction count (FRE), the user's interest diversity
(IND: mean distance of recently rated item features to the user's
full-history mean interest) and the item's property diversity (POD: mean
distance of recent raters' mean-interest vectors to their centroid).
Diversity distances are restricted to a recency window to bound the cost
per query; the centroids use cheap full-history running means.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .bandit import ContextVector

__all__ = ["ItemFeatureStore", "IndicatorConfig", "InteractionStats"]

CONTEXT_BOUND = math.sqrt(2.0)


class ItemFeatureStore:
    """Map from item id to a fixed-dimension raw feature vector."""

    def __init__(self, features=None):
        self.features = {}
        self.dim = None
        if features:
            for item, vec in features.items():
                self.add(item, vec)

    def add(self, item, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or vec.size < 1:
            raise ValueError(f"feature vector for item {item!r} must be a nonempty flat vector")
        if self.dim is None:
            self.dim = vec.size
        elif vec.size != self.dim:
            raise ValueError(
                f"feature vector for item {item!r} has dimension {vec.size}, expected {self.dim}"
            )
        self.features[item] = vec

    def get(self, item):
        return self.features.get(item)

    def __len__(self):
        return len(self.features)

    def __contains__(self, item):
        return item in self.features


@dataclass
class IndicatorConfig:
    """Normalization and windowing knobs for the context features.

    window   recency window for the diversity distances; None disables
             windowing (full history)
    fre_cap  count at which the log-compressed frequency saturates at 1
    ind_cap  divisor capping user diversity; defaults to sqrt(f)
    pod_cap  divisor capping item diversity; defaults to sqrt(f)
    """

    window: int | None = 256
    fre_cap: float = 1000.0
    ind_cap: float | None = None
    pod_cap: float | None = None

    def __post_init__(self):
        if self.window is not None:
            if isinstance(self.window, float) and math.isinf(self.window):
                self.window = None
            elif int(self.window) < 1:
                raise ValueError("window must be a positive integer or None")
            else:
                self.window = int(self.window)
        if not self.fre_cap > 0:
            raise ValueError("fre_cap must be positive")
        for name in ("ind_cap", "pod_cap"):
            cap = getattr(self, name)
            if cap is not None and not cap > 0:
                raise ValueError(f"{name} must be positive")


class _UserProfile:
    __slots__ = ("count", "items", "feat_sum")

    def __init__(self, window, dim):
        self.count = 0
        self.items = deque(maxlen=window)
        self.feat_sum = np.zeros(dim)


class _ItemProfile:
    __slots__ = ("count", "raters")

    def __init__(self, window):
        self.count = 0
        self.raters = deque(maxlen=window)


class InteractionStats:
    """Single-writer streaming tracker of per-id counts and diversities."""

    def __init__(self, store=None, config=None):
        self.store = store if store is not None else ItemFeatureStore()
        self.config = config if config is not None else IndicatorConfig()
        self.users = {}
        self.items = {}
        self.missing_items = set()

    @property
    def feature_dim(self):
        return self.store.dim if self.store.dim is not None else 1

    def _feature(self, item):
        vec = self.store.get(item)
        if vec is None:
            # Items without raw features contribute a zero vector, so the
            # diversity of feature-less streams degenerates to 0.
            self.missing_items.add(item)
            return np.zeros(self.feature_dim)
        return vec

    def record(self, user, item):
        feat = self._feature(item)
        up = self.users.get(user)
        if up is None:
            up = self.users[user] = _UserProfile(self.config.window, self.feature_dim)
        up.count += 1
        up.items.append(item)
        up.feat_sum = up.feat_sum + feat
        ip = self.items.get(item)
        if ip is None:
            ip = self.items[item] = _ItemProfile(self.config.window)
        ip.count += 1
        ip.raters.append(user)

    def fre(self, key, side):
        table = self.users if side == "user" else self.items
        prof = table.get(key)
        return 0 if prof is None else prof.count

    def user_mean(self, user):
        """Full-history mean of the user's rated-item feature vectors."""
        prof = self.users.get(user)
        if prof is None or prof.count == 0:
            return np.zeros(self.feature_dim)
        return prof.feat_sum / prof.count

    def ind(self, user):
        """Mean distance of the windowed rated-item features to the user's
        mean interest; 0 with fewer than two interactions."""
        prof = self.users.get(user)
        if prof is None or prof.count < 2:
            return 0.0
        centroid = prof.feat_sum / prof.count
        total = 0.0
        for item in prof.items:
            diff = self._feature(item) - centroid
            total += math.sqrt(float(diff @ diff))
        return total / len(prof.items)

    def pod(self, item):
        """Mean distance of the windowed raters' current mean-interest
        vectors to their centroid; 0 with fewer than two raters."""
        prof = self.items.get(item)
        if prof is None or prof.count < 2:
            return 0.0
        means = [self.user_mean(u) for u in prof.raters]
        centroid = sum(means) / len(means)
        total = 0.0
        for q in means:
            diff = q - centroid
            total += math.sqrt(float(diff @ diff))
        return total / len(means)

    def _diversity_cap(self, side):
        cap = self.config.ind_cap if side == "user" else self.config.pod_cap
        if cap is None:
            cap = math.sqrt(self.feature_dim)
        return cap

    def context_vector(self, key, side):
        """Bounded (frequency, diversity) context for one id.

        The count is log-compressed and saturates at fre_cap; the diversity
        is divided by its cap and clipped; both components land in [0, 1]
        so the Euclidean norm never exceeds sqrt(2).
        """
        if side not in ("user", "item"):
            raise ValueError(f"side must be 'user' or 'item', got {side!r}")
        count = self.fre(key, side)
        f = min(1.0, math.log1p(count) / math.log1p(self.config.fre_cap))
        g = self.ind(key) if side == "user" else self.pod(key)
        g = min(1.0, g / self._diversity_cap(side))
        return ContextVector([f, g], bound=CONTEXT_BOUND)
