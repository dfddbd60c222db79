"""Command-line entry point: config handling and experiment dispatch.

Modes
-----
dess_cv              adaptive sizes, contexts (frequency, diversity); needs
                     an item-features file
dess_fre             adaptive sizes, frequency-only contexts
fixed                pinned embedding size (constant keep policy)
stationary_ablation  adaptive sizes with an undiscounted policy (gamma = 1)
synthetic            drifting linear-bandit regret benchmark

Config files are flat ``key = value`` text; ``#`` starts a comment.  The
flags --mode, --seed and --out override file values.

Outputs: ``metrics.csv`` (deterministic per-segment metrics), ``timing.csv``
(wall-clock per segment; excluded from the determinism contract),
``summary.json``; synthetic mode writes ``regret.csv`` instead of the first
two.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .bandit import BanditConfig, DiscountedLinUCB, corollary_gamma
from .data import parse_item_features, parse_ratings
from .harness import AlwaysKeepPolicy, RewardConfig, StreamingExperiment, segment_stream
from .indicators import IndicatorConfig, InteractionStats, ItemFeatureStore
from .model import AdaptiveEmbeddingModel, ModelConfig, SizeLadder
from .synthetic import DriftSpec, make_env, run_experiment

__all__ = ["RunConfig", "ConfigError", "run", "main"]

MODES = ("dess_cv", "dess_fre", "fixed", "stationary_ablation", "synthetic")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "dess_fre"
    ratings: str = ""
    item_features: str = ""
    out: str = "out"
    seed: int = 0

    # stream
    segment_length: int = 5000
    train_frac: float = 0.8
    task: str = "binary"

    # model
    head: str = "mlp"
    hidden: int = 512
    eta: float = 1e-3
    l2: float = 1e-3
    batch: int = 500
    eps_bn: float = 1e-5
    bn_momentum: float = 0.1
    cold_init: bool = False
    sizes: tuple = (2, 4, 8, 16, 64, 128)
    fixed_size: int = 2

    # size policy
    gamma: float = 0.99
    lam: float = 1.0
    sigma: float = 0.5
    delta: float = 0.1
    s_bound: float = 1.0

    # indicators
    window: int = 256
    fre_cap: float = 1000.0
    ind_cap: float = 0.0   # 0 means sqrt(feature dim)
    pod_cap: float = 0.0

    # reward
    threshold: float = 0.0
    continuous: bool = False

    # synthetic benchmark
    synth_kind: str = "abrupt"
    synth_horizon: int = 50_000
    synth_changes: int = 2
    synth_delta: float = 0.8
    synth_rho: float = 0.0
    synth_budget: float = -1.0   # negative means "use the realized budget"
    synth_d: int = 2
    synth_k: int = 2
    synth_seeds: int = 10
    synth_nu: float = 0.05
    synth_gamma: float = -1.0    # negative means "derive from the budget"
    checkpoint_every: int = 0    # 0 means horizon // 100

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; pick one of {', '.join(MODES)}")
        if self.task not in ("binary", "multiclass"):
            raise ConfigError("task must be binary or multiclass")
        return self

    def validate_paths(self):
        if self.mode == "synthetic":
            return self
        if not self.ratings:
            raise ConfigError("dataset not found: no ratings path configured")
        if not os.path.exists(self.ratings):
            raise ConfigError(f"dataset not found: {self.ratings}")
        if self.mode == "dess_cv":
            if not self.item_features:
                raise ConfigError("mode dess_cv needs an item_features file")
            if not os.path.exists(self.item_features):
                raise ConfigError(f"item features file not found: {self.item_features}")
        return self


def _parse_value(name, text, kind):
    text = text.strip()
    try:
        if kind is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return tuple(int(v) for v in text.split(","))
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def parse_config_file(path):
    """Read a flat key = value configuration file into a dict of strings."""
    values = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def build_config(file_values=None, **overrides):
    """Construct a validated RunConfig from file values plus overrides."""
    cfg = RunConfig()
    for name, text in (file_values or {}).items():
        if not hasattr(cfg, name):
            raise ConfigError(f"unknown config key {name!r}")
        kind = tuple if name == "sizes" else type(getattr(cfg, name))
        setattr(cfg, name, _parse_value(name, text, kind))
    for name, value in overrides.items():
        if value is not None:
            setattr(cfg, name, value)
    return cfg.validate()


def resolved_config_text(config):
    pairs = [(f.name, getattr(config, f.name)) for f in fields(RunConfig)]
    body = "\n".join(f"  {name} = {value}" for name, value in pairs)
    return f"resolved config:\n{body}"


# -- output writers -----------------------------------------------------------

def write_metrics_csv(path, metrics):
    lines = ["t,acc,loss,regret_user,regret_item,emb_params"]
    for m in metrics:
        lines.append(f"{m.t},{m.accuracy!r},{m.loss!r},{m.regret_user!r},"
                     f"{m.regret_item!r},{m.emb_params}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_timing_csv(path, metrics):
    lines = ["t,train_ms,infer_ms"]
    for m in metrics:
        lines.append(f"{m.t},{m.train_ms:.3f},{m.infer_ms:.3f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_regret_csv(path, steps, curves):
    names = ",".join(f"seed{j}" for j in range(len(curves)))
    lines = [f"step,{names},mean"]
    mean = np.mean(curves, axis=0)
    for i, step in enumerate(steps):
        vals = ",".join(repr(float(c[i])) for c in curves)
        lines.append(f"{step},{vals},{float(mean[i])!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_json(path, config, payload):
    resolved = {}
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        resolved[f.name] = list(value) if isinstance(value, tuple) else value
    doc = {"config": resolved}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- dispatch -------------------------------------------------------------------

def build_experiment(config, stream=None, store=None):
    """Assemble a streaming experiment from a RunConfig (data modes)."""
    if stream is None:
        stream = parse_ratings(config.ratings)
    if store is None:
        if config.mode == "dess_cv":
            store = parse_item_features(config.item_features)
        else:
            store = ItemFeatureStore()  # frequency-only contexts
    segments = segment_stream(stream, config.segment_length, config.train_frac)
    sizes = (config.fixed_size, config.fixed_size) if config.mode == "fixed" else config.sizes
    model = AdaptiveEmbeddingModel(
        SizeLadder(sizes),
        ModelConfig(head=config.head, task=config.task, hidden=config.hidden,
                    eta=config.eta, l2=config.l2, batch=config.batch,
                    eps_bn=config.eps_bn, bn_momentum=config.bn_momentum,
                    cold_init=config.cold_init),
        seed=config.seed,
    )
    stats = InteractionStats(store, IndicatorConfig(
        window=config.window, fre_cap=config.fre_cap,
        ind_cap=config.ind_cap or None, pod_cap=config.pod_cap or None))
    if config.mode == "fixed":
        user_policy, item_policy = AlwaysKeepPolicy(), AlwaysKeepPolicy()
    else:
        gamma = 1.0 if config.mode == "stationary_ablation" else config.gamma
        bandit_cfg = dict(d=2, K=2, lam=config.lam, gamma=gamma, sigma=config.sigma,
                          delta=config.delta, S=config.s_bound, U=math.sqrt(2.0))
        user_policy = DiscountedLinUCB(BanditConfig(**bandit_cfg))
        item_policy = DiscountedLinUCB(BanditConfig(**bandit_cfg))
    exp = StreamingExperiment(model, stats, user_policy, item_policy,
                              RewardConfig(config.threshold, config.continuous),
                              sigma=config.sigma)
    return exp, segments


def run_streaming(config):
    exp, segments = build_experiment(config)
    metrics = exp.run(segments)
    os.makedirs(config.out, exist_ok=True)
    write_metrics_csv(os.path.join(config.out, "metrics.csv"), metrics)
    write_timing_csv(os.path.join(config.out, "timing.csv"), metrics)
    summary = {
        "segments": len(metrics),
        "mean_accuracy": float(np.mean([m.accuracy for m in metrics])),
        "mean_loss": float(np.mean([m.loss for m in metrics])),
        "final_regret_user": metrics[-1].regret_user,
        "final_regret_item": metrics[-1].regret_item,
        "final_emb_params": metrics[-1].emb_params,
        "regret_definition": "empirical per-decision counterfactual proxy",
        "timing_ms": {  # wall clock; not covered by the determinism contract
            "train_total": float(sum(m.train_ms for m in metrics)),
            "infer_total": float(sum(m.infer_ms for m in metrics)),
        },
    }
    write_summary_json(os.path.join(config.out, "summary.json"), config, summary)
    return summary


def run_synthetic(config):
    spec_kw = dict(kind=config.synth_kind, horizon=config.synth_horizon)
    if config.synth_kind == "abrupt":
        realized = config.synth_changes * config.synth_delta
        spec_kw.update(changes=config.synth_changes, delta=config.synth_delta)
    else:
        realized = (config.synth_horizon - 1) * config.synth_rho
        spec_kw.update(rho=config.synth_rho)
    budget = config.synth_budget if config.synth_budget >= 0 else realized
    spec = DriftSpec(budget=budget, **spec_kw)
    gamma = (config.synth_gamma if config.synth_gamma > 0 else
             corollary_gamma(spec.realized_budget(), config.synth_d, config.synth_horizon))
    s_bound = (2.0 * config.sigma - config.synth_nu)
    checkpoint = config.checkpoint_every or max(1, config.synth_horizon // 100)
    curves = []
    steps = None
    for j in range(config.synth_seeds):
        env = make_env(spec, config.synth_d, config.synth_k, seed=config.seed + j,
                       sigma=config.sigma, nu=config.synth_nu)
        policy = DiscountedLinUCB(BanditConfig(
            d=config.synth_d, K=config.synth_k, lam=config.lam, gamma=gamma,
            sigma=config.sigma, delta=config.delta, S=s_bound, U=1.0))
        steps, curve = run_experiment(policy, env, checkpoint_every=checkpoint)
        curves.append(curve)
    os.makedirs(config.out, exist_ok=True)
    write_regret_csv(os.path.join(config.out, "regret.csv"), steps, curves)
    mean_final = float(np.mean([c[-1] for c in curves]))
    summary = {
        "gamma": gamma,
        "declared_budget": budget,
        "realized_budget": spec.realized_budget(),
        "seeds": config.synth_seeds,
        "mean_final_regret": mean_final,
        "regret_definition": "noise-free dynamic regret against per-step oracle arms",
    }
    write_summary_json(os.path.join(config.out, "summary.json"), config, summary)
    return summary


def run(config, dry_run=False, echo=print):
    """Dispatch one configured run; returns the summary dict (None if dry)."""
    echo(resolved_config_text(config))
    if dry_run:
        return None
    config.validate_paths()
    if config.mode == "synthetic":
        return run_synthetic(config)
    return run_streaming(config)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dess",
        description="Streaming recommendation with dynamic per-id embedding sizes.")
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--dry-run", action="store_true",
                        help="echo the resolved config and exit")
    args = parser.parse_args(argv)
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        config = build_config(file_values, mode=args.mode, seed=args.seed, out=args.out)
        run(config, dry_run=args.dry_run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
