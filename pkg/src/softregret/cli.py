"""Command-line experiment harness: ``gen``, ``bench``, ``parse`` and ``eval``.

Experiments are described by a JSON config file::

    {
      "version": 1,
      "generator": {"kind": "level_shift", "n": 2000, "d": 5, "amplitude": 5.0},
      "learners": ["esr", "direct", "t", "r", "dr"],
      "train": {"hidden": [8, 8], "hidden_activation": "tanh", "epochs": 200, "k": 25},
      "k_sweep": [1, 5, 10, 50, 100],
      "split": 0.7,
      "replications": 20,
      "seed": 0,
      "output_dir": "out"
    }

``generator.kind`` is one of ``level_shift``, ``paired``, ``loglinear`` and
``click_logs`` (the last takes ``p0``/``p1`` as ``{"intercept", "coef"}``).
Instead of a generator, ``inputs`` may name a ``dataset`` file and an
optional ``counterfactuals`` file.  Command-line flags override the
corresponding config fields.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    SeededRng,
    read_counterfactuals,
    read_dataset,
    split_indices,
    train_test_split,
    validate_dataset,
    write_counterfactuals,
    write_dataset,
)
from .evaluate import EvalReport, match_rate, offpolicy_estimate
from .ingest import ParseError, filter_binary, parse_lines
from .learners import LEARNERS, TrainConfig, fit
from .policy import load_policy, save_policy
from .regret import EsrConfig, hard_regret_paired
from .synth import ClickTruth, GenConfig, LogisticLinear, gen_click_logs, gen_level_shift, gen_loglinear, gen_paired

__all__ = ["ExperimentConfig", "ConfigError", "cmd_gen", "cmd_bench", "cmd_parse", "cmd_eval", "main"]

CONFIG_VERSION = 1
GENERATORS = ("level_shift", "paired", "loglinear", "click_logs")
CSV_HEADER = "learner,k,metric,mean,ci_low,ci_high,R_effective,seed,config_hash"
# fields that change where results go but not what they are
_UNHASHED = ("output_dir", "workers", "save_policies")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    generator: dict | None = None
    inputs: dict | None = None
    learners: list = field(default_factory=lambda: ["esr", "direct"])
    train: dict = field(default_factory=dict)
    k_sweep: list = field(default_factory=list)
    split: float = 0.7
    replications: int = 1
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    save_policies: bool = False
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        if (self.generator is None) == (self.inputs is None):
            raise ConfigError("config needs exactly one of 'generator' and 'inputs'")
        if self.generator is not None and self.generator.get("kind") not in GENERATORS:
            raise ConfigError(f"generator.kind must be one of {GENERATORS}")
        if self.inputs is not None and "dataset" not in self.inputs:
            raise ConfigError("inputs.dataset is required")
        if not self.learners:
            raise ConfigError("learners must be nonempty")
        unknown = [name for name in self.learners if name not in LEARNERS]
        if unknown:
            raise ConfigError(f"unknown learners {unknown}; choose from {sorted(LEARNERS)}")
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must lie in (0, 1), got {self.split}")
        if int(self.replications) < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if int(self.workers) < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if any(not (float(k) > 0 and math.isfinite(float(k))) for k in self.k_sweep):
            raise ConfigError("k_sweep values must be positive and finite")
        self.train_config()
        if self.generator is not None:
            self.gen_config(self.seed)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown config fields {extra}")
        if "version" not in data:
            raise ConfigError("config is missing 'version'")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: not valid JSON ({err})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def config_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def train_config(self, k: float | None = None) -> TrainConfig:
        t = dict(self.train)
        base_k = t.pop("k", EsrConfig().k)
        try:
            return TrainConfig(esr=EsrConfig(float(k if k is not None else base_k)), **t)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad train section: {err}") from None

    def gen_config(self, seed: int) -> GenConfig:
        g = {k: v for k, v in self.generator.items() if k not in ("kind", "p0", "p1", "seed")}
        for key in ("beta_values", "beta_probs"):
            if key in g:
                g[key] = tuple(g[key])
        try:
            return GenConfig(seed=seed, **g)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad generator section: {err}") from None

    def click_models(self):
        return tuple(
            LogisticLinear(float(p["intercept"]), tuple(p["coef"]))
            for p in (self.generator.get("p0", {"intercept": 0.0, "coef": []}),
                      self.generator.get("p1", {"intercept": 0.0, "coef": []}))
        )


# ---------------------------------------------------------------- data


def _generate(cfg: ExperimentConfig, seed: int):
    """``(dataset, counterfactuals or None, truth dict)`` for one generator call."""
    kind = cfg.generator["kind"]
    gc = cfg.gen_config(seed)
    if kind == "level_shift":
        ds, cf = gen_level_shift(gc)
        return ds, cf, {}
    if kind == "paired":
        cf, ds = gen_paired(gc)
        return ds, cf, {}
    if kind == "loglinear":
        return gen_loglinear(gc)
    p0, p1 = cfg.click_models()
    ds, truth = gen_click_logs(gc, p0, p1)
    return ds, None, truth.to_dict()


def _replication_data(cfg: ExperimentConfig, rep: SeededRng):
    """Train set, test counterfactuals (or None), test logs and click truth."""
    if cfg.generator is not None:
        ds, cf, _ = _generate(cfg, rep.child("data").seed)
    else:
        ds = read_dataset(cfg.inputs["dataset"])
        cf = read_counterfactuals(cfg.inputs["counterfactuals"]) if cfg.inputs.get("counterfactuals") else None
    split_rng = rep.child("split")
    if cf is not None and len(ds) == 2 * len(cf):
        # paired layout: rows 2i and 2i+1 share context i, so split contexts
        train_ids, test_ids = split_indices(len(cf), cfg.split, split_rng)
        rows = np.stack([2 * train_ids, 2 * train_ids + 1], axis=1).reshape(-1)
        return ds.subset(rows), cf.subset(test_ids), None, None
    train, test = train_test_split(ds, cfg.split, split_rng)
    test_cf = train_test_split(cf, cfg.split, split_rng)[1] if cf is not None else None
    truth = None
    if cfg.generator is not None and cfg.generator["kind"] == "click_logs":
        p0, p1 = cfg.click_models()
        truth = ClickTruth(test.w, p0, p1)
    return train, test_cf, test, truth


# ---------------------------------------------------------------- bench


def _tasks(cfg: ExperimentConfig):
    """``(learner, k)`` pairs; ``k`` is None for learners without one."""
    out = []
    for name in cfg.learners:
        if name == "esr":
            ks = cfg.k_sweep or [cfg.train.get("k", EsrConfig().k)]
            out.extend(("esr", float(k)) for k in ks)
        else:
            out.append((name, None))
    return out


def replication_seed(master_seed: int, r: int) -> SeededRng:
    """Seed of replication ``r``; depends only on the master seed and ``r``."""
    return SeededRng(master_seed).child("replication", r)


def run_replication(cfg: ExperimentConfig, r: int) -> dict:
    """Fit and score every learner for replication ``r``.

    Returns ``{"r", "results": {task: {metric: value}}, "errors": {task: message}}``
    with tasks keyed as ``"learner"`` or ``"esr@k"``.
    """
    rep = replication_seed(cfg.seed, r)
    out = {"r": r, "results": {}, "errors": {}}
    try:
        train, test_cf, test_logs, truth = _replication_data(cfg, rep)
    except Exception as err:  # noqa: BLE001 - recorded per replication
        for name, k in _tasks(cfg):
            out["errors"][_task_key(name, k)] = f"data: {type(err).__name__}: {err}"
        return out
    for name, k in _tasks(cfg):
        key = _task_key(name, k)
        try:
            policy = fit(name, train, cfg.train_config(k), rep.child("learner", name))
            metrics = {}
            if test_cf is not None:
                metrics["regret"] = hard_regret_paired(test_cf, policy)
            if test_logs is not None and test_cf is None:
                metrics["offpolicy_value"] = offpolicy_estimate(policy, test_logs).value
                metrics["match_rate"] = match_rate(policy, test_logs)
                if truth is not None:
                    metrics["true_value"] = truth.value(policy)
            if not all(math.isfinite(v) for v in metrics.values()):
                raise FloatingPointError(f"non-finite metric {metrics}")
            out["results"][key] = metrics
            if cfg.save_policies:
                pdir = Path(cfg.output_dir) / "policies"
                pdir.mkdir(parents=True, exist_ok=True)
                save_policy(policy, pdir / f"r{r}_{key.replace('@', '_k')}.json")
        except Exception as err:  # noqa: BLE001 - recorded per replication
            out["errors"][key] = f"{type(err).__name__}: {err}"
    return out


def _task_key(name, k):
    return name if k is None else f"{name}@{k!r}"


def _run_one(args):
    cfg_dict, r = args
    return run_replication(ExperimentConfig.from_dict(cfg_dict), r)


def cmd_bench(cfg: ExperimentConfig) -> list[dict]:
    """Run all replications and write ``results.csv`` and ``results.json``.

    Replications run in a process pool when ``workers > 1``; results are
    keyed by replication index so the tables do not depend on scheduling.
    """
    jobs = [(cfg.to_dict(), r) for r in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            reps = list(pool.map(_run_one, jobs))
    else:
        reps = [_run_one(job) for job in jobs]
    reps.sort(key=lambda rep: rep["r"])

    chash = cfg.config_hash()
    rows, raw = [], []
    for name, k in _tasks(cfg):
        key = _task_key(name, k)
        failures = [{"r": rep["r"], "error": rep["errors"][key]} for rep in reps if key in rep["errors"]]
        done = [rep for rep in reps if key in rep["results"]]
        metrics = sorted({m for rep in done for m in rep["results"][key]}) or ["regret"]
        for metric in metrics:
            values = [rep["results"][key][metric] for rep in done if metric in rep["results"][key]]
            if values:
                report = EvalReport.from_values(metric, values)
                stats = (report.mean, report.ci_low, report.ci_high)
            else:
                stats = (math.nan, math.nan, math.nan)
            row = {
                "learner": name,
                "k": "" if k is None else k,
                "metric": metric,
                "mean": stats[0],
                "ci_low": stats[1],
                "ci_high": stats[2],
                "R_effective": len(values),
                "seed": cfg.seed,
                "config_hash": chash,
            }
            rows.append(row)
            raw.append({**row, "R_requested": cfg.replications, "values": values,
                        "replications": [rep["r"] for rep in done if metric in rep["results"][key]],
                        "failures": failures})

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in CSV_HEADER.split(",")))
    (out / "results.csv").write_text("\n".join(lines) + "\n")
    (out / "results.json").write_text(
        json.dumps({"config": cfg.to_dict(), "config_hash": chash, "rows": raw}, indent=2, sort_keys=True) + "\n"
    )
    return rows


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------- gen / parse / eval


def cmd_gen(cfg: ExperimentConfig) -> dict:
    """Write ``dataset.csv``, ``counterfactuals.csv`` (when defined) and ``truth.json``."""
    if cfg.generator is None:
        raise ConfigError("gen needs a 'generator' section")
    ds, cf, truth = _generate(cfg, cfg.seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {"dataset": str(out / "dataset.csv")}
    write_dataset(ds, out / "dataset.csv")
    if cf is not None:
        write_counterfactuals(cf, out / "counterfactuals.csv")
        written["counterfactuals"] = str(out / "counterfactuals.csv")
    sidecar = {"generator": cfg.generator, "seed": cfg.seed, "truth": _jsonable(truth),
               "dataset_sha256": ds.content_hash()}
    (out / "truth.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    written["truth"] = str(out / "truth.json")
    return written


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def cmd_parse(inputs, output, pair=None, seed: int = 0, dim: int = 6) -> dict:
    """Stream log files through the parser and the two-article filter."""
    counts = {"read": 0, "kept": 0, "parse_errors": 0}
    errors = []

    def events():
        for path in inputs:
            with open(path, "rb") as fh:
                for item in parse_lines(fh):
                    if isinstance(item, ParseError):
                        counts["parse_errors"] += 1
                        if len(errors) < 20:
                            errors.append(f"{path}: {item}")
                        continue
                    counts["read"] += 1
                    yield item

    ds = filter_binary(events(), pair, SeededRng(seed), dim)
    counts["kept"] = len(ds)
    if len(ds) == 0:
        raise ValueError("no events kept")
    write_dataset(ds, output)
    counts["first_errors"] = errors
    return counts


def cmd_eval(policy_path, dataset=None, counterfactuals=None) -> dict:
    """Score a saved policy on logs (off-policy value) or counterfactual data (regret)."""
    if (dataset is None) == (counterfactuals is None):
        raise ValueError("give exactly one of --logs and --counterfactuals")
    policy = load_policy(policy_path)
    if counterfactuals is not None:
        cf = read_counterfactuals(counterfactuals)
        return {"metric": "regret", "value": hard_regret_paired(cf, policy), "n": len(cf)}
    logs = read_dataset(dataset)
    bad = validate_dataset(logs)
    if bad:
        raise ValueError(f"invalid log dataset: {bad[0].reason} (row {bad[0].index})")
    est = offpolicy_estimate(policy, logs)
    return {"metric": "offpolicy_value", "value": est.value, "se": est.se,
            "n_matched": est.n_matched, "n": est.n, "match_rate": est.n_matched / est.n}


# ---------------------------------------------------------------- entry point


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    overrides = {}
    for name in ("replications", "workers", "seed"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "learners", None):
        overrides["learners"] = args.learners.split(",")
    if getattr(args, "save_policies", False):
        overrides["save_policies"] = True
    if overrides:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softregret", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("config")
    g.add_argument("--out")
    g.add_argument("--seed", type=int)

    b = sub.add_parser("bench", help="run replicated learner comparisons")
    b.add_argument("config")
    b.add_argument("--out")
    b.add_argument("--seed", type=int)
    b.add_argument("--replications", type=int)
    b.add_argument("--workers", type=int)
    b.add_argument("--learners", help="comma-separated learner names")
    b.add_argument("--save-policies", action="store_true")

    q = sub.add_parser("parse", help="parse click logs into a two-action dataset")
    q.add_argument("inputs", nargs="+")
    q.add_argument("--out", required=True, help="output .csv or .jsonl")
    q.add_argument("--pair", help="two article ids 'a,b'; default draws two from the first pool")
    q.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("eval", help="score a saved policy")
    e.add_argument("policy")
    e.add_argument("--logs")
    e.add_argument("--counterfactuals")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            result = cmd_gen(_load_config(args))
        elif args.command == "bench":
            cfg = _load_config(args)
            rows = cmd_bench(cfg)
            result = {"output_dir": cfg.output_dir, "rows": len(rows),
                      "failed": sum(cfg.replications - r["R_effective"] for r in rows)}
        elif args.command == "parse":
            pair = tuple(args.pair.split(",")) if args.pair else None
            if pair is not None and len(pair) != 2:
                raise ValueError("--pair takes exactly two ids")
            result = cmd_parse(args.inputs, args.out, pair, args.seed)
            print(f"read {result['read']}, kept {result['kept']}, parse errors {result['parse_errors']}",
                  file=sys.stderr)
        else:
            result = cmd_eval(args.policy, args.logs, args.counterfactuals)
    except ConfigError as err:
        print(json.dumps({"error": "config", "message": str(err)}), file=sys.stderr)
        return 2
    except (OSError, ValueError) as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
