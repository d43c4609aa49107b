"""Command-line entry point: single JSON run config plus mode flags.

Subcommands: normalize, encode, train, repr, shallow, eval, compare. Every
artifact embeds the hash of the run config that produced it; compare refuses
to mix runs with differing hashes unless forced.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import evaluation, model, shallow
from .corpus import DatasetSplit, load_dataset
from .embed import encode_tweet, load_embedding_table
from .features import (
    ExternalFeatureSet,
    FeatureConfig,
    FeatureSource,
    ScoredLexicon,
    assemble_features,
    load_external_features,
)
from .model import (
    EncodedDataset,
    Model,
    ModelConfig,
    hash_config,
    load_checkpoint,
    model_from_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .normalize import EmojiLexicon, FrequencyLexicon, NormalizeOptions, normalize

CLI_MODES = {"stl-class": "stl_class", "stl-intensity": "stl_intensity", "mtl": "mtl"}


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    data_paths: dict[str, str]
    data_kind: str
    freq_lexicon: str
    emoji_lexicon: str
    word_vectors: str
    word_dim: int
    emoji_vectors: str
    char_vectors: str
    scored_lexicons: list[str]
    external: list[dict]
    feature_order: list[str]
    allow_missing: bool
    normalize_opts: NormalizeOptions
    model_overrides: dict
    shallow_params: dict
    seeds: list[int]
    out_dir: str
    config_hash: str = ""


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    data = raw.get("data", {})
    res = raw.get("resources", {})
    feats = raw.get("features", {})
    norm = raw.get("normalize", {})
    cfg = RunConfig(
        data_paths={k: v for k, v in data.items() if k in ("train", "dev", "test")},
        data_kind=data.get("kind", "both"),
        freq_lexicon=res.get("freq_lexicon", ""),
        emoji_lexicon=res.get("emoji_lexicon", ""),
        word_vectors=res.get("word_vectors", ""),
        word_dim=int(res.get("word_dim", 200)),
        emoji_vectors=res.get("emoji_vectors", ""),
        char_vectors=res.get("char_vectors", ""),
        scored_lexicons=list(feats.get("scored_lexicons", [])),
        external=list(feats.get("external", [])),
        feature_order=list(feats.get("order", [])),
        allow_missing=bool(feats.get("allow_missing", False)),
        normalize_opts=NormalizeOptions(**norm),
        model_overrides=dict(raw.get("model", {})),
        shallow_params=dict(raw.get("shallow", {})),
        seeds=[int(s) for s in raw.get("seeds", [0])],
        out_dir=raw.get("out_dir", "runs"),
    )
    canonical = {
        "data": {"paths": cfg.data_paths, "kind": cfg.data_kind},
        "resources": [
            cfg.freq_lexicon,
            cfg.emoji_lexicon,
            cfg.word_vectors,
            cfg.word_dim,
            cfg.emoji_vectors,
            cfg.char_vectors,
        ],
        "features": [
            cfg.scored_lexicons,
            cfg.external,
            cfg.feature_order,
            cfg.allow_missing,
        ],
        "normalize": cfg.normalize_opts.__dict__,
        "model": cfg.model_overrides,
        "shallow": cfg.shallow_params,
        "seeds": cfg.seeds,
    }
    cfg.config_hash = hash_config(canonical)
    return cfg


def validate_run_config(cfg: RunConfig) -> list[str]:
    """Collect every problem up front so nothing fails mid-run."""
    problems = []
    for split, path in cfg.data_paths.items():
        if not os.path.exists(path):
            problems.append(f"data.{split}: no such file {path}")
    for label, path in [
        ("resources.freq_lexicon", cfg.freq_lexicon),
        ("resources.emoji_lexicon", cfg.emoji_lexicon),
        ("resources.word_vectors", cfg.word_vectors),
        ("resources.emoji_vectors", cfg.emoji_vectors),
        ("resources.char_vectors", cfg.char_vectors),
    ]:
        if not path:
            problems.append(f"{label}: missing")
        elif not os.path.exists(path):
            problems.append(f"{label}: no such file {path}")
    for path in cfg.scored_lexicons:
        if not os.path.exists(path):
            problems.append(f"features.scored_lexicons: no such file {path}")
    for ext in cfg.external:
        if not os.path.exists(ext.get("path", "")):
            problems.append(f"features.external {ext.get('name')}: no such file")
    if not cfg.feature_order:
        problems.append("features.order: must list at least one source")
    if not cfg.seeds:
        problems.append("seeds: must list at least one seed")
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
        if not os.access(cfg.out_dir, os.W_OK):
            raise PermissionError(cfg.out_dir)
    except OSError as exc:
        problems.append(f"out_dir: not writable ({exc})")
    return problems


class Pipeline:
    """Loaded resources plus the encode-everything glue."""

    def __init__(self, cfg: RunConfig):
        problems = validate_run_config(cfg)
        if problems:
            raise CliError("invalid run config:\n  " + "\n  ".join(problems))
        self.cfg = cfg
        self.freq = FrequencyLexicon.load(cfg.freq_lexicon)
        self.emo = EmojiLexicon.load(cfg.emoji_lexicon)
        base = ModelConfig()
        overrides = dict(cfg.model_overrides)
        overrides["filter_widths"] = tuple(
            overrides.get("filter_widths", base.filter_widths)
        )
        embed_dim = int(overrides.get("embed_dim", base.embed_dim))
        self.word_table = load_embedding_table(
            cfg.word_vectors, cfg.word_dim, name="words"
        )
        self.emoji_table = load_embedding_table(
            cfg.emoji_vectors, embed_dim, name="emoji"
        )
        self.char_table = load_embedding_table(
            cfg.char_vectors, embed_dim, name="chars"
        )
        sources = []
        lexicons = [ScoredLexicon.load(p) for p in cfg.scored_lexicons]
        externals = {
            e["name"]: load_external_features(e["path"], e.get("dim"))
            for e in cfg.external
        }
        for name in cfg.feature_order:
            if name == "lexicons":
                sources.append(FeatureSource(name="lexicons", lexicons=lexicons))
            elif name in externals:
                sources.append(FeatureSource(name=name, external=externals[name]))
            else:
                raise CliError(f"feature order names unknown source {name!r}")
        self.feature_config = FeatureConfig(
            sources=sources, allow_missing=cfg.allow_missing
        )
        overrides["feature_dim"] = self.feature_config.width
        overrides["feature_config"] = tuple(cfg.feature_order)
        self.base_model_config = replace(base, **overrides)

    def model_config(self, mode: str, seed: int) -> ModelConfig:
        return replace(self.base_model_config, task_mode=mode, seed=seed)

    def load_split(self, name: str) -> DatasetSplit:
        path = self.cfg.data_paths.get(name)
        if path is None:
            raise CliError(f"run config has no data path for split {name!r}")
        return load_dataset(path, self.cfg.data_kind, name=name)

    def encode_split(self, split: DatasetSplit) -> EncodedDataset:
        mcfg = self.base_model_config
        ids, xs, masks, feats = [], [], [], []
        y_class, y_int = [], []
        for tweet in split.examples:
            norm = normalize(
                tweet.text, self.freq, self.emo, self.cfg.normalize_opts, tweet.id
            )
            mat = encode_tweet(
                norm, self.word_table, self.emoji_table, self.char_table, mcfg.max_len
            )
            hv = assemble_features(tweet.id, norm.tokens, self.feature_config)
            ids.append(tweet.id)
            xs.append(mat.values)
            masks.append(mat.mask)
            feats.append(hv.values)
            y_class.append(None if tweet.valence is None else int(tweet.valence))
            y_int.append(tweet.intensity)
        have_class = all(v is not None for v in y_class) and ids
        have_int = all(v is not None for v in y_int) and ids
        return EncodedDataset(
            ids=ids,
            x=np.array(xs),
            mask=np.array(masks),
            feats=np.array(feats),
            y_class=np.array(y_class, dtype=int) if have_class else None,
            y_intensity=np.array(y_int, dtype=float) if have_int else None,
        )


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _report_payload(report, cfg_hash, seed, mode, head, split_name) -> dict:
    payload = report.to_dict()
    payload.update(
        {
            "config_hash": cfg_hash,
            "seed": seed,
            "mode": mode,
            "head": head,
            "split": split_name,
        }
    )
    return payload


def _dl_reports(m: Model, data: EncodedDataset, split: DatasetSplit) -> dict:
    """EvalReports for the active deep heads on one split."""
    preds = predict(m, data)
    out = {}
    if m.config.has_class_head and data.y_class is not None:
        mapping = {p.id: p.valence for p in preds}
        out["class"] = evaluation.evaluate_run(mapping, split, "classification")
    if m.config.has_intensity_head and data.y_intensity is not None:
        mapping = {p.id: p.intensity for p in preds}
        out["intensity"] = evaluation.evaluate_run(mapping, split, "intensity")
    return out


def cmd_normalize(args) -> int:
    for path in (args.freq, args.emoji):
        if not os.path.exists(path):
            raise CliError(f"no such lexicon file: {path}")
    if not os.path.exists(getattr(args, "in")):
        raise CliError(f"no such input file: {getattr(args, 'in')}")
    freq = FrequencyLexicon.load(args.freq)
    emo = EmojiLexicon.load(args.emoji)
    with open(getattr(args, "in"), encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise CliError("input file is empty, header row required")
    out_lines = [lines[0]]
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) < 2:
            raise CliError(f"line {line_no}: expected at least 2 columns")
        norm = normalize(cols[1], freq, emo)
        cols[1] = " ".join(norm.tokens)
        out_lines.append("\t".join(cols))
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("\n".join(out_lines) + "\n")
    print(f"normalized {len(out_lines) - 1} tweets -> {args.out}")
    return 0


def cmd_encode(args) -> int:
    cfg = load_run_config(args.config)
    pipe = Pipeline(cfg)
    split = pipe.load_split(args.split)
    data = pipe.encode_split(split)
    payload = {
        "ids": np.array(data.ids),
        "x": data.x,
        "mask": data.mask,
        "feats": data.feats,
        "config_hash": np.array(cfg.config_hash),
    }
    if data.y_class is not None:
        payload["y_class"] = data.y_class
    if data.y_intensity is not None:
        payload["y_intensity"] = data.y_intensity
    np.savez(args.out, **payload)
    print(f"encoded {len(data)} tweets -> {args.out}")
    return 0


def _train_one(pipe: Pipeline, mode: str, seed: int, out_dir: str, cache: dict) -> None:
    cfg = pipe.cfg
    mcfg = pipe.model_config(CLI_MODES[mode], seed)
    for name in ("train", "dev") + (("test",) if "test" in cfg.data_paths else ()):
        if name not in cache:
            split = pipe.load_split(name)
            cache[name] = (split, pipe.encode_split(split))
    train_split, train_data = cache["train"]
    dev_split, dev_data = cache["dev"]
    m = Model(mcfg)
    ckpt = train(m, train_data, dev_data)
    ckpt.config_hash = cfg.config_hash  # provenance ties to the run config file
    run_dir = os.path.join(out_dir, mode, f"seed_{seed}")
    os.makedirs(run_dir, exist_ok=True)
    save_checkpoint(ckpt, os.path.join(run_dir, "checkpoint.bin"))
    _write_json(
        os.path.join(run_dir, "history.json"),
        {
            "config_hash": cfg.config_hash,
            "seed": seed,
            "mode": mode,
            "best_epoch": ckpt.best_epoch,
            "history": ckpt.history,
        },
    )
    split_sets = [("dev", dev_split, dev_data)]
    if "test" in cache:
        split_sets.append(("test",) + cache["test"])
    for split_name, split, data in split_sets:
        for task, report in _dl_reports(m, data, split).items():
            _write_json(
                os.path.join(run_dir, f"report_dl_{task}_{split_name}.json"),
                _report_payload(report, cfg.config_hash, seed, mode, "dl", split_name),
            )
    print(f"trained mode={mode} seed={seed} best_epoch={ckpt.best_epoch} -> {run_dir}")


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    pipe = Pipeline(cfg)
    out_dir = args.out or cfg.out_dir
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    cache: dict = {}
    for seed in seeds:
        _train_one(pipe, args.mode, seed, out_dir, cache)
    return 0


def cmd_repr(args) -> int:
    cfg = load_run_config(args.config)
    pipe = Pipeline(cfg)
    ckpt = load_checkpoint(args.checkpoint)
    m = model_from_checkpoint(ckpt)
    split = pipe.load_split(args.split)
    data = pipe.encode_split(split)
    reprs = model.extract_representations(m, data)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(f"repr:{cfg.config_hash[:12]}\t{reprs.shape[1]}\n")
        for tweet_id, row in zip(data.ids, reprs):
            f.write(tweet_id + "\t" + " ".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {reprs.shape[0]} x {reprs.shape[1]} representations -> {args.out}")
    return 0


def _aligned_features(reprs: ExternalFeatureSet, split: DatasetSplit) -> np.ndarray:
    missing = [t.id for t in split.examples if reprs.get(t.id) is None]
    if missing:
        raise CliError(f"representation file missing ids: {missing}")
    return np.stack([reprs.get(t.id) for t in split.examples])


def cmd_shallow(args) -> int:
    cfg = load_run_config(args.config)
    params = cfg.shallow_params
    train_split = load_dataset(args.train_data, cfg.data_kind, name="train")
    eval_split = load_dataset(args.eval_data, cfg.data_kind, name="test")
    train_reprs = load_external_features(args.train_reprs)
    eval_reprs = load_external_features(args.eval_reprs)
    if train_reprs.dim != eval_reprs.dim:
        raise CliError(
            f"representation widths differ: {train_reprs.dim} vs {eval_reprs.dim}"
        )
    x_train = _aligned_features(train_reprs, train_split)
    x_eval = _aligned_features(eval_reprs, eval_split)
    os.makedirs(args.out, exist_ok=True)
    common = dict(
        c=float(params.get("c", 1.0)),
        epochs=int(params.get("epochs", 50)),
        seed=int(params.get("seed", 0)),
        standardize=bool(params.get("standardize", True)),
    )
    if args.head == "svm":
        golds = [t.valence for t in train_split.examples]
        if any(g is None for g in golds):
            raise CliError("svm head needs valence labels on the training split")
        fitted = shallow.train_svm(x_train, [int(g) for g in golds], **common)
        preds = shallow.predict_svm(fitted, x_eval)
        mapping = {
            t.id: int(p) for t, p in zip(eval_split.examples, preds)
        }
        report = evaluation.evaluate_run(mapping, eval_split, "classification")
        task = "class"
    else:
        golds = [t.intensity for t in train_split.examples]
        if any(g is None for g in golds):
            raise CliError("svr head needs intensity scores on the training split")
        fitted = shallow.train_svr(
            x_train, golds, epsilon=float(params.get("epsilon", 0.1)), **common
        )
        preds = shallow.predict_svr(fitted, x_eval)
        mapping = {t.id: float(p) for t, p in zip(eval_split.examples, preds)}
        report = evaluation.evaluate_run(mapping, eval_split, "intensity")
        task = "intensity"
    shallow.save_shallow(fitted, os.path.join(args.out, f"shallow_{args.head}.bin"))
    _write_json(
        os.path.join(args.out, f"report_ml_{task}_{args.split_name}.json"),
        _report_payload(
            report, cfg.config_hash, int(args.seed), args.mode, "ml", args.split_name
        ),
    )
    flag = "" if report.pearson_defined else " (undefined)"
    print(f"shallow {args.head}: pearson={report.pearson:.4f}{flag} -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    pipe = Pipeline(cfg)
    ckpt = load_checkpoint(args.checkpoint)
    m = model_from_checkpoint(ckpt)
    split = pipe.load_split(args.split)
    data = pipe.encode_split(split)
    os.makedirs(args.out, exist_ok=True)
    reports = _dl_reports(m, data, split)
    if not reports:
        raise CliError(f"split {args.split!r} lacks labels for the model's heads")
    for task, report in reports.items():
        _write_json(
            os.path.join(args.out, f"report_dl_{task}_{args.split}.json"),
            _report_payload(
                report, cfg.config_hash, ckpt.config.seed,
                ckpt.config.task_mode.replace("_", "-"), "dl", args.split,
            ),
        )
        if report.confusion is not None:
            evaluation.save_confusion_csv(
                report.confusion, os.path.join(args.out, f"confusion_{args.split}.csv")
            )
            evaluation.save_confusion_heatmap(
                report.confusion, os.path.join(args.out, f"confusion_{args.split}.png")
            )
        flag = "" if report.pearson_defined else " (undefined)"
        print(f"{task}: pearson={report.pearson:.4f}{flag} n={report.n}")
    return 0


def _collect_arm(dirs: list[str], split: str) -> dict:
    """Map (head, task) -> {seed: report payload} across run directories."""
    cells: dict[tuple[str, str], dict[int, dict]] = {}
    for arm_dir in dirs:
        pattern = os.path.join(arm_dir, "**", f"report_*_{split}.json")
        for path in sorted(glob.glob(pattern, recursive=True)):
            with open(path, encoding="utf-8") as f:
                payload = json.load(f)
            head = payload.get("head")
            task = "class" if payload.get("task") == "classification" else "intensity"
            seed = int(payload.get("seed"))
            cell = cells.setdefault((head, task), {})
            if seed in cell:
                raise CliError(
                    f"duplicate report for head={head} task={task} seed={seed} "
                    f"under {arm_dir}"
                )
            cell[seed] = payload
    return cells


def cmd_compare(args) -> int:
    mtl_cells = _collect_arm(args.mtl, args.split)
    stl_cells = _collect_arm(args.stl, args.split)
    if not mtl_cells or not stl_cells:
        raise CliError("no reports found; run train/eval/shallow first")
    hashes = {
        payload["config_hash"]
        for cells in (mtl_cells, stl_cells)
        for cell in cells.values()
        for payload in cell.values()
    }
    if len(hashes) > 1 and not args.force:
        raise CliError(
            f"runs mix {len(hashes)} different config hashes; pass --force to override"
        )
    table = {}
    for key in sorted(set(mtl_cells) & set(stl_cells)):
        head, task = key
        mtl_by_seed = mtl_cells[key]
        stl_by_seed = stl_cells[key]
        if set(mtl_by_seed) != set(stl_by_seed):
            raise CliError(
                f"seed sets differ for head={head} task={task}: "
                f"{sorted(mtl_by_seed)} vs {sorted(stl_by_seed)}"
            )
        seeds = sorted(mtl_by_seed)
        if len(seeds) < 2:
            raise CliError(f"need >= 2 seeds per arm, got {len(seeds)}")
        mtl_scores = [mtl_by_seed[s]["pearson"] for s in seeds]
        stl_scores = [stl_by_seed[s]["pearson"] for s in seeds]
        ttest = evaluation.paired_ttest(mtl_scores, stl_scores)
        table[f"{head}_{task}"] = {
            "seeds": seeds,
            "mtl_scores": mtl_scores,
            "stl_scores": stl_scores,
            "mtl_mean": float(np.mean(mtl_scores)),
            "stl_mean": float(np.mean(stl_scores)),
            "t": None if not np.isfinite(ttest.t) else ttest.t,
            "p_value": None if not ttest.defined else ttest.p,
            "p_defined": ttest.defined,
            "df": ttest.df,
        }
    if not table:
        raise CliError("MTL and STL arms share no (head, task) cells")
    os.makedirs(args.out, exist_ok=True)
    _write_json(
        os.path.join(args.out, "compare.json"),
        {"split": args.split, "config_hashes": sorted(hashes), "cells": table},
    )
    col_keys = [k for k in ("dl_class", "ml_class", "dl_intensity", "ml_intensity") if k in table]
    col_keys += [k for k in sorted(table) if k not in col_keys]
    header = ["framework"] + col_keys
    rows = [
        ["STL"] + [f"{table[k]['stl_mean']:.4f}" for k in col_keys],
        ["MTL"] + [f"{table[k]['mtl_mean']:.4f}" for k in col_keys],
        ["p-value"]
        + [
            "undef" if not table[k]["p_defined"] else f"{table[k]['p_value']:.4g}"
            for k in col_keys
        ],
    ]
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    for row in [header] + rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    print(f"wrote {os.path.join(args.out, 'compare.json')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtaffect",
        description="Multi-task valence classification and intensity regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="preprocess raw tweets to clean tokens")
    p.add_argument("--in", required=True, help="input TSV (ID, Tweet, ...)")
    p.add_argument("--out", required=True)
    p.add_argument("--freq", required=True, help="word<TAB>count lexicon")
    p.add_argument("--emoji", required=True, help="emoji<TAB>words lexicon")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("encode", help="encode a split to matrices (.npz)")
    p.add_argument("--config", required=True)
    p.add_argument("--split", required=True, choices=("train", "dev", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train one or all seeds of a mode")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", required=True, choices=sorted(CLI_MODES))
    p.add_argument("--seed", type=int, default=None, help="override the seed list")
    p.add_argument("--out", default=None, help="override config out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("repr", help="export shared representations to TSV")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", required=True, choices=("train", "dev", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_repr)

    p = sub.add_parser("shallow", help="train an SVM/SVR head on representations")
    p.add_argument("--config", required=True)
    p.add_argument("--head", required=True, choices=("svm", "svr"))
    p.add_argument("--train-reprs", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--eval-reprs", required=True)
    p.add_argument("--eval-data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", default=0, help="seed recorded in the report")
    p.add_argument("--mode", default="mtl", help="mode recorded in the report")
    p.add_argument("--split-name", default="test", help="split recorded in the report")
    p.set_defaults(func=cmd_shallow)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", required=True, choices=("train", "dev", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="MTL vs STL table with paired t-tests")
    p.add_argument("--mtl", action="append", required=True, help="MTL run dir")
    p.add_argument("--stl", action="append", required=True, help="STL run dir")
    p.add_argument("--split", default="test", choices=("dev", "test"))
    p.add_argument("--force", action="store_true", help="allow mixed config hashes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
