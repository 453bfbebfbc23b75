"""Command-line pipeline: prepare, train, tune, gen-queries, infer, eval.

Every command reads one TOML config.  Relative paths resolve against the
config file's directory, every random draw flows from a named seed, and
each artifact is recorded with its sha256 in ``manifest.json``.  Wall-clock
timestamps live only in ``metadata.json`` so that re-runs are otherwise
byte-identical.

Exit codes: 0 success, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .autodiff import ShapeError
from .errors import NumericError, ValidationError
from .evaluation import evaluate, write_reports
from .graph import (
    induced_subgraph,
    load_graph,
    load_graph_json,
    load_split,
    preprocess,
    save_graph_json,
    save_split,
    split_nodes,
)
from .inference import infer_deterministic, infer_mc, load_query, save_answer
from .model import TrainConfig, load_checkpoint, save_checkpoint, train, write_trace
from .queries import DEFAULT_TARGET_NODES, FAMILIES, MODES, generate, load_suite, save_suite
from .synthetic import planted_partition
from .tuning import INNER_EPOCHS, mock_objective, tune_weights, validation_objective, write_tuning_trace

log = logging.getLogger("vgaeplus")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3
SEED_KEYS = ("split_seed", "train_seed", "tune_seed", "suite_seed", "mc_seed")


@dataclass
class RunConfig:
    base: Path
    data: dict
    seeds: dict
    train: dict = field(default_factory=dict)
    tune: dict = field(default_factory=dict)
    inference: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)
    out: Path = Path("run")

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def train_config(self, epochs: int | None = None) -> TrainConfig:
        t = self.train
        return TrainConfig(
            epochs=int(epochs if epochs is not None else t.get("epochs", 300)),
            learning_rate=float(t.get("learning_rate", 1e-2)),
            seed=self.seeds["train_seed"],
            kl_weight=t.get("kl_weight"),
            link_balance=t.get("link_balance", "ratio"),
            alpha_zero=bool(t.get("alpha_zero", False)),
            beta_zero=bool(t.get("beta_zero", False)),
            gamma_zero=bool(t.get("gamma_zero", False)),
            embedding_dim=int(t.get("embedding_dim", 128)),
            hidden_dim=int(t.get("hidden_dim", 128)),
            aggregation=t.get("aggregation", "mean"),
        )


def load_config(path, out_override=None) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    seeds = raw.get("seeds", {})
    missing = [k for k in SEED_KEYS if k not in seeds]
    if missing:
        raise ValidationError(f"{path}: [seeds] must set {', '.join(missing)} explicitly")
    if "data" not in raw:
        raise ValidationError(f"{path}: missing [data] section")
    cfg = RunConfig(
        base=path.resolve().parent,
        data=raw["data"],
        seeds={k: int(seeds[k]) for k in SEED_KEYS},
        train=raw.get("train", {}),
        tune=raw.get("tune", {}),
        inference=raw.get("inference", {}),
        suite=raw.get("suite", {}),
    )
    cfg.out = Path(out_override) if out_override else cfg.path(raw.get("output", {}).get("dir", "run"))
    if int(cfg.inference.get("samples", 30)) < 1:
        raise ValidationError("[inference] samples must be >= 1")
    if cfg.tune.get("enabled", True) and int(cfg.tune.get("budget", 25)) < 8:
        raise ValidationError("[tune] budget must be >= 8")
    for fam in cfg.suite.get("families", FAMILIES):
        if fam not in FAMILIES:
            raise ValidationError(f"[suite] unknown family {fam!r}")
    for mode in cfg.suite.get("modes", MODES):
        if mode not in MODES:
            raise ValidationError(f"[suite] unknown mode {mode!r}")
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _record(cfg: RunConfig, command: str, artifacts: list[Path], extra: dict | None = None) -> None:
    manifest_path = cfg.out / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {"artifacts": {}}
    for p in artifacts:
        manifest["artifacts"][p.relative_to(cfg.out).as_posix()] = _sha256(p)
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    meta_path = cfg.out / "metadata.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    meta[command] = {"finished": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"), **(extra or {})}
    meta_path.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def _need(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ValidationError(f"{path} not found; run `{hint}` first")
    return path


def _graph_and_split(cfg: RunConfig):
    g = load_graph_json(_need(cfg.out / "graph.json", "prepare"))
    return g, load_split(_need(cfg.out / "split.json", "prepare"), g)


def cmd_prepare(cfg: RunConfig) -> list[Path]:
    d = cfg.data
    if "synthetic" in d:
        syn = dict(d["synthetic"])
        syn.setdefault("seed", cfg.seeds["split_seed"])
        g = planted_partition(**syn)
    else:
        for key in ("edges", "features"):
            if key not in d:
                raise ValidationError(f"[data] needs '{key}' (or a [data.synthetic] table)")
        labels = cfg.path(d["labels"]) if "labels" in d else None
        g = preprocess(
            load_graph(cfg.path(d["edges"]), cfg.path(d["features"]), labels, d.get("n_classes"))
        )
        unlabelled = int((g.class_index < 0).sum())
        if unlabelled:
            log.warning("%d unlabelled nodes", unlabelled)
    split = split_nodes(g, cfg.seeds["split_seed"])
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_graph_json(g, cfg.out / "graph.json")
    save_split(split, g, cfg.out / "split.json")
    log.info("prepared %d nodes: split %d/%d/%d", g.n_nodes, len(split.train), len(split.validation), len(split.test))
    return [cfg.out / "graph.json", cfg.out / "split.json"]


def _weights(cfg: RunConfig):
    w = cfg.train.get("weights", [1.0, 1.0, 1.0])
    if w == "tuned":
        w = json.loads(_need(cfg.out / "weights.json", "tune").read_text())["weights"]
    if len(w) != 3 or not all(0.0 <= float(v) <= 1.0 for v in w):
        raise ValidationError(f"[train] weights must be three numbers in [0,1], got {w}")
    return tuple(float(v) for v in w)


def cmd_train(cfg: RunConfig) -> list[Path]:
    g, split = _graph_and_split(cfg)
    model = train(induced_subgraph(g, split.train), cfg.train_config(), weights=_weights(cfg))
    save_checkpoint(model, cfg.out / "checkpoint.json")
    write_trace(model.trace, cfg.out / "train_trace.csv")
    return [cfg.out / "checkpoint.json", cfg.out / "train_trace.csv"]


def cmd_tune(cfg: RunConfig) -> list[Path]:
    t = cfg.tune
    budget = int(t.get("budget", 25))
    seed = cfg.seeds["tune_seed"]
    if t.get("mock", False):
        objective = mock_objective
    else:
        g, split = _graph_and_split(cfg)
        tr, va = induced_subgraph(g, split.train), induced_subgraph(g, split.validation)
        inner = cfg.train_config(epochs=int(t.get("inner_epochs", INNER_EPOCHS)))
        objective = lambda w: validation_objective(w, tr, va, inner)  # noqa: E731
    best, state = tune_weights(objective, budget, seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    payload = {"weights": list(best), "objective": state.best[1], "budget": budget, "seed": seed}
    (cfg.out / "weights.json").write_text(json.dumps(payload, indent=1) + "\n")
    write_tuning_trace(state, cfg.out / "tuning_trace.csv")
    return [cfg.out / "weights.json", cfg.out / "tuning_trace.csv"]


def _suite_path(cfg: RunConfig, family: str, mode: str) -> Path:
    return cfg.out / "suites" / f"{family}__{mode}.json"


def cmd_gen_queries(cfg: RunConfig) -> list[Path]:
    g, split = _graph_and_split(cfg)
    n_target = int(cfg.suite.get("n_target_nodes", DEFAULT_TARGET_NODES))
    (cfg.out / "suites").mkdir(parents=True, exist_ok=True)
    written = []
    for family in cfg.suite.get("families", FAMILIES):
        for mode in cfg.suite.get("modes", MODES):
            suite = generate(g, split, family, mode, cfg.seeds["suite_seed"], n_target)
            if suite.skipped:
                log.info("%s/%s: skipped %d target nodes", family, mode, len(suite.skipped))
            p = _suite_path(cfg, family, mode)
            save_suite(suite, p)
            written.append(p)
    return written


def _answer(model, q, cfg: RunConfig):
    mode = cfg.inference.get("mode", "deterministic")
    if mode == "deterministic":
        return infer_deterministic(model, q)
    if mode == "mc":
        return infer_mc(model, q, int(cfg.inference.get("samples", 30)), seed=cfg.seeds["mc_seed"])
    raise ValidationError(f"[inference] mode must be 'deterministic' or 'mc', got {mode!r}")


def cmd_infer(cfg: RunConfig, query_file, answer_file=None) -> list[Path]:
    if query_file is None:
        raise ValidationError("infer needs --query <file>")
    model = load_checkpoint(_need(cfg.out / "checkpoint.json", "train"))
    q = load_query(query_file)
    ans = _answer(model, q, cfg)
    dest = Path(answer_file) if answer_file else cfg.out / "answers" / f"{Path(query_file).stem}.answer.json"
    dest.parent.mkdir(parents=True, exist_ok=True)
    save_answer(ans, dest, q)
    try:
        dest.relative_to(cfg.out)
    except ValueError:
        return []  # outside the run directory: not tracked
    return [dest]


def cmd_eval(cfg: RunConfig, timings: dict | None = None) -> list[Path]:
    model = load_checkpoint(_need(cfg.out / "checkpoint.json", "train"))
    mode = cfg.inference.get("mode", "deterministic")
    samples = int(cfg.inference.get("samples", 30))
    reports = []
    for family in cfg.suite.get("families", FAMILIES):
        for m in cfg.suite.get("modes", MODES):
            suite = load_suite(_need(_suite_path(cfg, family, m), "gen-queries"))
            if len(suite) == 0:
                log.warning("%s/%s: empty suite, not scored", family, m)
                continue
            reports.append(evaluate(model, suite, mode, samples, cfg.seeds["mc_seed"]))
    write_reports(reports, cfg.out / "report.json", cfg.out / "report.csv", timing=False)
    if timings is not None:
        timings["seconds_per_query"] = {f"{r.family}/{r.mode}": r.seconds_per_query for r in reports}
    return [cfg.out / "report.json", cfg.out / "report.csv"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vgaeplus", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("prepare", "train", "tune", "gen-queries", "infer", "eval"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", help="override [output] dir")
        if name == "infer":
            p.add_argument("--query", help="query JSON file")
            p.add_argument("--answer", help="answer JSON destination")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    extra: dict = {}
    try:
        cfg = load_config(args.config, args.out)
        if args.command == "prepare":
            artifacts = cmd_prepare(cfg)
        elif args.command == "train":
            artifacts = cmd_train(cfg)
        elif args.command == "tune":
            artifacts = cmd_tune(cfg)
        elif args.command == "gen-queries":
            artifacts = cmd_gen_queries(cfg)
        elif args.command == "infer":
            artifacts = cmd_infer(cfg, args.query, args.answer)
        else:
            artifacts = cmd_eval(cfg, extra)
        _record(cfg, args.command, artifacts, extra)
    except (ValidationError, ShapeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
