"""Command-line front end.

    attnforecast synth    --out DIR [--seed N] [--participants N] ...
    attnforecast stats    --data DIR --out DIR
    attnforecast features --data DIR --out DIR [--group G] [--stride S]
    attnforecast examples --data DIR --out DIR [--task T] [--target-window W]
    attnforecast train    --data DIR --out DIR [--task T] [--group G]
    attnforecast eval     --data DIR --out DIR [--task T] [--group G]
    attnforecast run      --data DIR --out DIR

Settings come from defaults, then ``--config FILE`` (JSON), then flags.
The fully resolved settings are written into every output file. Exit
status: 0 ok, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import forest as rf
from .errors import AttnForecastError, ConfigError
from .evaluation import dumps_report, format_table, run_experiment
from .examples import Task, TaskConfig, generate
from .features import FeatureExtractor, FeatureGroup
from .recording import load_corpus
from .synth import SynthConfig, write_corpus
from .timeline import summarize


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    data: str | None = None
    out: str | None = None
    task: str = Task.SHIFT_TO_ENVIRONMENT.value
    group: str = FeatureGroup.PROPOSED.value
    target_window: float | None = None
    feature_window: float = 1.0
    stride: float = 0.5
    grid: list | None = None  # None -> default grid per feature group
    n_trees: int = 100
    cv_folds: int = 3
    seed: int = 0
    workers: int = 1
    synth: dict = field(default_factory=dict)

    def task_config(self, task: str | None = None) -> TaskConfig:
        task = Task(task or self.task)
        tw = self.target_window if task == Task(self.task) else None
        return TaskConfig(task, tw, self.feature_window, self.stride)

    def hyper_grid(self, n_features: int) -> list[rf.Hyperparams]:
        if self.grid is None:
            return rf.default_grid(n_features, self.n_trees)
        grid = [rf.Hyperparams(**g) for g in self.grid]
        for hp in grid:
            if hp.n_features_per_split > n_features:
                raise ConfigError(f"grid n_features_per_split={hp.n_features_per_split} exceeds "
                                  f"the {n_features} features of this group")
        return grid

    def resolved(self) -> "RunConfig":
        """Fill per-task defaults so the echoed config is explicit."""
        cfg = self.task_config()
        return replace(self, task=cfg.task.value, group=FeatureGroup(self.group).value,
                       target_window=float(cfg.target_window))

    def to_json(self) -> dict:
        return asdict(self)


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    unknown = sorted(set(doc) - _CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return doc


def _build_config(args) -> RunConfig:
    values = _load_config(args.config)
    for name in ("data", "out", "task", "group", "target_window", "stride", "seed", "workers"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    synth = dict(values.get("synth", {}))
    for flag, key in (("participants", "n_participants"), ("session_length", "session_length"),
                      ("cue_probability", "cue_probability")):
        v = getattr(args, flag, None)
        if v is not None:
            synth[key] = v
    if hasattr(args, "participants") and args.seed is not None:
        synth["seed"] = args.seed  # an explicit --seed beats a seed in the config file
    values["synth"] = synth
    try:
        cfg = RunConfig(**values).resolved()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.workers < 1:
        raise UsageError("--workers must be >= 1")
    if cfg.grid is not None:
        if not isinstance(cfg.grid, list) or not cfg.grid:
            raise UsageError("grid must be a non-empty list of hyperparameter objects")
        for g in cfg.grid:
            try:
                rf.Hyperparams(**g)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad grid entry {g!r}: {exc}") from None
    return cfg


# -- output helpers ----------------------------------------------------------------------

def _out_dir(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise UsageError("--out is required")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(dumps_report(doc), encoding="utf-8")


def _provenance(cfg: RunConfig) -> str:
    """Comment line carrying the resolved config, for text and CSV outputs."""
    return "# run_config: " + json.dumps(cfg.to_json(), sort_keys=True, separators=(",", ":")) + "\n"


def _write_jsonl(path: Path, header: dict, rows) -> int:
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
            n += 1
    return n


def _corpus(cfg: RunConfig):
    if not cfg.data:
        raise UsageError("--data is required")
    if not Path(cfg.data).is_dir():
        raise AttnForecastError(f"data directory {cfg.data} does not exist")
    recs = load_corpus(cfg.data)
    if not recs:
        raise AttnForecastError(f"no recordings (*/manifest.json) under {cfg.data}")
    return recs


# -- subcommands -----------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> int:
    """Write a synthetic corpus and its ground truth."""
    out = _out_dir(cfg)
    synth = {**cfg.synth}
    synth.setdefault("seed", cfg.seed)
    try:
        scfg = SynthConfig(**synth)
    except TypeError as exc:
        raise UsageError(f"bad synth config: {exc}") from None
    paths = write_corpus(scfg, out, provenance=cfg.to_json())
    print(f"wrote {len(paths)} recordings to {out}")
    return 0


def cmd_stats(cfg: RunConfig) -> int:
    """Per-participant and pooled corpus statistics."""
    recs = _corpus(cfg)
    out = _out_dir(cfg)
    stats = summarize(recs)
    _write_json(out / "stats.json", {"run_config": cfg.to_json(), **stats.to_json()})
    lines = []
    for fam, rows in stats.table.items():
        for row, v in rows.items():
            lines.append(f"{fam:18s} {row:16s} mean={v['mean']:.3f} std={v['std']:.3f} total={v['total']:.3f}")
    text = "\n".join(lines) + "\n"
    (out / "stats.txt").write_text(_provenance(cfg) + text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_features(cfg: RunConfig) -> int:
    """Feature vectors on the stride grid for one group."""
    recs = _corpus(cfg)
    out = _out_dir(cfg)
    group = FeatureGroup(cfg.group)
    names = None

    def rows():
        nonlocal names
        for rec in recs:
            fx = FeatureExtractor(rec)
            names = fx.names(group)
            lo, hi = rec.time_range()
            k0 = int(np.ceil((lo + cfg.feature_window) / cfg.stride - 1e-9))
            k1 = int(np.floor(hi / cfg.stride + 1e-9))
            t_ends = [round(k * cfg.stride, 9) for k in range(k0, k1 + 1)]
            if not t_ends:
                continue
            M = fx.matrix(t_ends, cfg.feature_window, group)
            for t, row in zip(t_ends, M):
                yield {"participant_id": rec.participant_id, "t_end": t, "values": row.tolist()}

    header = {"run_config": cfg.to_json(), "feature_names": list(FeatureExtractor(recs[0]).names(group))}
    n = _write_jsonl(out / "features.jsonl", header, rows())
    print(f"wrote {n} feature vectors ({len(header['feature_names'])} features) to {out / 'features.jsonl'}")
    return 0


def cmd_examples(cfg: RunConfig) -> int:
    """Labelled examples and LOPO fold membership for one task."""
    recs = _corpus(cfg)
    out = _out_dir(cfg)
    tcfg = cfg.task_config()
    group = FeatureGroup(cfg.group)
    examples = []
    for rec in recs:
        examples.extend(generate(rec, tcfg, group))
    header = {"run_config": cfg.to_json(),
              "feature_names": list(examples[0].features.names) if examples else []}
    n = _write_jsonl(out / "examples.jsonl", header, (e.to_json() for e in examples))
    folds = {"participants": sorted({r.participant_id for r in recs}),
             "run_config": cfg.to_json(),
             "folds": [{"test": r.participant_id,
                        "n_test": sum(e.participant_id == r.participant_id for e in examples)}
                       for r in recs]}
    _write_json(out / "folds.json", folds)
    pos = sum(e.label for e in examples)
    print(f"wrote {n} examples ({pos} positive) to {out / 'examples.jsonl'}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    """Fit one forest on the balanced examples of all participants."""
    recs = _corpus(cfg)
    out = _out_dir(cfg)
    tcfg = cfg.task_config()
    group = FeatureGroup(cfg.group)
    examples = []
    for rec in recs:
        examples.extend(generate(rec, tcfg, group))
    from .examples import balance
    if not examples:
        raise AttnForecastError("no eligible examples in the corpus")
    train = balance(examples, cfg.seed)
    grid = cfg.hyper_grid(len(train[0].features))
    hp = rf.tune(train, grid, cfg.cv_folds, cfg.seed)
    model = rf.train(train, hp, cfg.seed, workers=cfg.workers)
    model.save(out / "model.json", extra={"run_config": cfg.to_json(), "n_train": len(train)})
    print(f"trained {hp.n_trees} trees on {len(train)} balanced examples "
          f"(max_depth={hp.max_depth}, min_samples_leaf={hp.min_samples_leaf}, "
          f"n_features_per_split={hp.n_features_per_split}) -> {out / 'model.json'}")
    return 0


def _experiment(cfg: RunConfig, recs, task: str, group: FeatureGroup, extractors: dict):
    tcfg = cfg.task_config(task)
    d = len(FeatureExtractor(recs[0]).names(group)) if recs else 0
    grid = cfg.hyper_grid(d)
    return run_experiment(recs, tcfg, group, grid=grid, seed=cfg.seed, cv_folds=cfg.cv_folds,
                          workers=cfg.workers, extractors=extractors, config=cfg.to_json())


def cmd_eval(cfg: RunConfig) -> int:
    """LOPO evaluation of one task and feature group."""
    recs = _corpus(cfg)
    out = _out_dir(cfg)
    rep = _experiment(cfg, recs, cfg.task, FeatureGroup(cfg.group), {})
    _write_json(out / "report.json", {"run_config": cfg.to_json(), **rep.to_json()})
    (out / "report.txt").write_text(_provenance(cfg) + rep.to_text(), encoding="utf-8")
    (out / "confusion.csv").write_text(_provenance(cfg) + rep.confusion_csv(), encoding="utf-8")
    sys.stdout.write(rep.to_text())
    return 0


def cmd_run(cfg: RunConfig) -> int:
    """All three tasks (default target windows) x all four feature groups."""
    recs = _corpus(cfg)
    out = _out_dir(cfg)
    extractors: dict = {}
    reports = []
    for task in Task:
        for group in FeatureGroup:
            reports.append(_experiment(cfg, recs, task.value, group, extractors))
    doc = {"run_config": cfg.to_json(), "reports": [r.to_json() for r in reports]}
    _write_json(out / "report.json", doc)
    text = format_table(reports)
    (out / "report.txt").write_text(_provenance(cfg) + text, encoding="utf-8")
    with (out / "confusion.csv").open("w", encoding="utf-8") as fh:
        fh.write(_provenance(cfg))
        for r in reports:
            fh.write(f"# {r.task} {r.group} target={r.target_window:g}\n")
            fh.write(r.confusion_csv())
    sys.stdout.write(text)
    return 0


COMMANDS = {"synth": cmd_synth, "stats": cmd_stats, "features": cmd_features, "examples": cmd_examples,
            "train": cmd_train, "eval": cmd_eval, "run": cmd_run}


# -- argument parsing -------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="attnforecast", description="Attention-shift forecasting pipeline.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, help="parallel LOPO folds; results do not depend on it")
        if name != "synth":
            sp.add_argument("--data", help="corpus directory (one sub-directory per participant)")
            sp.add_argument("--task", choices=[t.value for t in Task], help="prediction task")
            sp.add_argument("--group", choices=[g.value for g in FeatureGroup], help="feature group")
            sp.add_argument("--target-window", dest="target_window", type=_positive_float,
                            help="seconds ahead (default 1, 10 or 5 by task)")
            sp.add_argument("--stride", type=_positive_float, help="seconds between examples (default 0.5)")
        else:
            sp.add_argument("--participants", type=int, help="number of participants (default 10)")
            sp.add_argument("--session-length", dest="session_length", type=_positive_float,
                            help="seconds per participant (default 1800)")
            sp.add_argument("--cue-probability", dest="cue_probability", type=float,
                            help="chance that a shift carries a planted cue (default 0)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        cfg = _build_config(args)
        if not cfg.out:
            raise UsageError("--out is required")
        return COMMANDS[args.command](cfg)
    except (UsageError, ConfigError) as exc:
        print(f"attnforecast: error: {exc}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return 1
    except AttnForecastError as exc:
        print(f"attnforecast: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"attnforecast: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
