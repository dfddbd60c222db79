"""Segmented streaming loop for size-adaptive recommendation.

Each time slice is handled in two passes.  First the previous slice is
replayed interaction by interaction to validate the size policy: per side,
the bandit proposes keep/grow, a cloned single-step probe of the grown
structure produces the binary reward, and the bandit state is updated.
Then sizes are changed permanently for ids in the current slice's training
part (greedy readout of the frozen policy), the model trains on that part
in chronological mini-batches, and accuracy/loss are measured on the
held-out tail of the slice.
"""

import math
import time
from dataclasses import dataclass
from typing import NamedTuple

__all__ = [
    "Interaction",
    "Segment",
    "make_interaction",
    "segment_stream",
    "RewardConfig",
    "reward",
    "SegmentMetrics",
    "AlwaysKeepPolicy",
    "StreamingExperiment",
]


class Interaction(NamedTuple):
    user: object
    item: object
    rating: float
    timestamp: int
    label: float   # 1.0 iff rating > 3.5
    star: int      # rating rounded half-up, clamped to 1..5, as class 0..4


def make_interaction(user, item, rating, timestamp):
    rating = float(rating)
    label = 1.0 if rating > 3.5 else 0.0
    star = min(5, max(1, int(math.floor(rating + 0.5)))) - 1
    return Interaction(user, item, rating, int(timestamp), label, star)


class Segment(NamedTuple):
    index: int                 # 1-based position in the stream
    train: tuple
    test: tuple

    @property
    def interactions(self):
        return self.train + self.test


def segment_stream(stream, segment_length, train_frac=0.8):
    """Cut a chronological stream into equal consecutive slices.

    Within each slice the first ceil(train_frac * len) interactions train
    and the rest test; a trailing remainder shorter than ``segment_length``
    is dropped.
    """
    stream = list(stream)
    if not stream:
        raise ValueError("interaction stream is empty")
    if segment_length < 2:
        raise ValueError("segment_length must be at least 2")
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    n_train = math.ceil(train_frac * segment_length)
    if n_train >= segment_length:
        raise ValueError("train_frac leaves no test interactions per segment")
    segments = []
    for t in range(len(stream) // segment_length):
        chunk = stream[t * segment_length:(t + 1) * segment_length]
        segments.append(Segment(t + 1, tuple(chunk[:n_train]), tuple(chunk[n_train:])))
    return segments


@dataclass
class RewardConfig:
    threshold: float = 0.0
    continuous: bool = False


def reward(l_old, l_new, cfg, reward_cap=1.0):
    """Reward of a size proposal from the probe losses.

    Binary mode pays 1 when the grown structure beats the old one by more
    than the threshold (ties pay 0); continuous mode pays the improvement
    clamped into [0, reward_cap].
    """
    if not (math.isfinite(l_old) and math.isfinite(l_new)):
        raise ValueError("probe losses must be finite")
    if cfg.continuous:
        return min(reward_cap, max(0.0, l_old - l_new))
    return 1.0 if (l_old - l_new) > cfg.threshold else 0.0


@dataclass
class SegmentMetrics:
    t: int
    accuracy: float
    loss: float
    regret_user: float
    regret_item: float
    emb_params: int
    train_ms: float
    infer_ms: float


class AlwaysKeepPolicy:
    """Constant policy that never grows an id; used by fixed-size runs.

    A constant policy needs no rewards, so the harness skips probe and
    bandit work entirely for it (the per-side regret stays 0).
    """

    constant = True

    def select_arm(self, x, beta=None):
        return 0

    def greedy_arm(self, x):
        return 0

    def update(self, arm, x, r):
        raise RuntimeError("a constant policy is never updated")


class StreamingExperiment:
    """Runs the per-segment policy/model update loop and collects metrics."""

    def __init__(self, model, stats, user_policy, item_policy,
                 reward_cfg=None, sigma=0.5):
        self.model = model
        self.stats = stats
        self.policies = {"user": user_policy, "item": item_policy}
        self.reward_cfg = reward_cfg if reward_cfg is not None else RewardConfig()
        self.reward_cap = 2.0 * sigma
        self.regret = {"user": 0.0, "item": 0.0}
        self.decisions = {"user": 0, "item": 0}

    def _target(self, it):
        return it.label if self.model.config.task == "binary" else it.star

    @staticmethod
    def _is_constant(policy):
        return getattr(policy, "constant", False)

    def policy_update_pass(self, segment):
        """Replay one past segment, updating both bandits and the indicator
        state.  Ids already at the largest size are skipped entirely."""
        model = self.model
        stats = self.stats
        for it in segment.interactions:
            target = self._target(it)
            for side, key in (("user", it.user), ("item", it.item)):
                policy = self.policies[side]
                if self._is_constant(policy) or model.at_top(key, side):
                    continue
                x = stats.context_vector(key, side).x
                arm = policy.select_arm(x)
                # One probe of the grown structure prices both arms: growing
                # pays per the loss comparison, keeping always pays 0 because
                # its probe structures are identical.
                l_old, l_new = model.temp_evaluate(it.user, it.item, target,
                                                   side, propose_increase=True)
                r_grow = reward(l_old, l_new, self.reward_cfg, self.reward_cap)
                chosen = r_grow if arm == 1 else 0.0
                counterfactual = 0.0 if arm == 1 else r_grow
                policy.update(arm, x, chosen)
                self.regret[side] += max(counterfactual - chosen, 0.0)
                self.decisions[side] += 1
            stats.record(it.user, it.item)

    def apply_size_decisions(self, segment):
        """Permanently grow ids in the segment's training part when the
        frozen policy's greedy readout says so (one decision per id)."""
        model = self.model
        for side, keys in (("user", [it.user for it in segment.train]),
                           ("item", [it.item for it in segment.train])):
            policy = self.policies[side]
            if self._is_constant(policy):
                continue
            seen = set()
            for key in keys:
                if key in seen:
                    continue
                seen.add(key)
                if model.at_top(key, side):
                    continue
                x = self.stats.context_vector(key, side).x
                if policy.greedy_arm(x) == 1:
                    model.expand(key, side)

    def train_on(self, segment):
        model = self.model
        triples = [(it.user, it.item, self._target(it)) for it in segment.train]
        batch = model.config.batch
        total = 0.0
        for start in range(0, len(triples), batch):
            chunk = triples[start:start + batch]
            total += model.train_step(chunk) * len(chunk)
        return total / max(1, len(triples))

    def evaluate_on(self, segment):
        triples = [(it.user, it.item, self._target(it)) for it in segment.test]
        return self.model.evaluate(triples)

    def run(self, segments, progress=None):
        """Full streaming run; returns one SegmentMetrics per segment."""
        out = []
        prev = None
        for segment in segments:
            if prev is not None:
                self.policy_update_pass(prev)
                self.apply_size_decisions(segment)
            t0 = time.perf_counter()
            self.train_on(segment)
            t1 = time.perf_counter()
            loss, acc = self.evaluate_on(segment)
            t2 = time.perf_counter()
            out.append(SegmentMetrics(
                t=segment.index, accuracy=acc, loss=loss,
                regret_user=self.regret["user"], regret_item=self.regret["item"],
                emb_params=self.model.param_count()[0],
                train_ms=(t1 - t0) * 1e3, infer_ms=(t2 - t1) * 1e3,
            ))
            if progress is not None:
                progress(out[-1])
            prev = segment
        return out
