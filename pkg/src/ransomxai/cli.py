"""Command-line entry point: ``extract``, ``run`` and ``plotdata``.

Exit codes: 0 success, 1 partial failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._random import derive_seed
from .data import (SCHEMAS, FeatureSchema, SynthSpec, concat, family, load_csv, stratified_split,
                   synth_data1_like, synth_data2_like, synth_generate, write_csv)
from .errors import InvalidConfig, MissingArtifacts, RansomXAIError
from .explain import ShapConfig, SummaryRanking, explain_dataset, sample_background, summarize
from .learners.params import KINDS, check_kind, params_to_dict
from .parallel import get_threads, set_threads, threads
from .pcap import featurize_capture
from .pipeline import PipelineConfig, run_pipeline
from .report import (ArmTiming, comparison_report, confusion_csv, curve_csv, dump_json,
                     metrics_table, summary_csv, timing_table, write_atomic)
from .rfecv import RfecvConfig, RfecvResult
from .search import SearchConfig, space_from_json

log = logging.getLogger("ransomxai")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


# ---------------------------------------------------------------- configuration


@dataclass
class ExperimentConfig:
    dataset: dict
    output_dir: Path
    seed: int = 0
    test_fraction: float = 0.2
    classifiers: tuple = KINDS
    fs_min: object = "half"  # "half" or an integer
    fs_cv_folds: int = 5
    fs_step: int = 1
    search: SearchConfig = field(default_factory=SearchConfig)
    spaces: dict = field(default_factory=dict)
    shap: ShapConfig = field(default_factory=ShapConfig)
    explain_rows: int = 50
    impute_k: int = 5
    scale: bool = True
    timing_repeats: int = 1
    raw: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _take(doc, key, default, cast):
    try:
        return cast(doc[key]) if key in doc else default
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"{key}: {exc}") from None


def parse_config(doc: dict, base_dir=".", seed_override=None) -> ExperimentConfig:
    """Validate a JSON experiment document.

    Relative paths resolve against ``base_dir`` (the config file's folder).
    """
    if not isinstance(doc, dict):
        raise InvalidConfig("config must be a JSON object")
    doc = dict(doc)
    if seed_override is not None:
        doc["seed"] = int(seed_override)
    known = {"dataset", "output_dir", "seed", "test_fraction", "classifiers", "fs", "search",
             "shap", "preprocess", "timing_repeats"}
    unknown = set(doc) - known
    if unknown:
        raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
    base_dir = Path(base_dir)
    ds = doc.get("dataset")
    if not isinstance(ds, dict) or not (("path" in ds) ^ ("synthetic" in ds)):
        raise InvalidConfig("dataset must give exactly one of 'path' or 'synthetic'")
    if "path" in ds:
        path = base_dir / ds["path"]
        if not path.is_file():
            raise InvalidConfig(f"dataset file {path} does not exist")
        schema = ds.get("schema", "numeric")
        if schema not in SCHEMAS and schema != "numeric":
            raise InvalidConfig(f"unknown schema {schema!r}")
    if "output_dir" not in doc:
        raise InvalidConfig("output_dir is required")

    try:
        seed = _take(doc, "seed", 0, int)
        classifiers = tuple(check_kind(k) for k in doc.get("classifiers", KINDS))
        if not classifiers or len(set(classifiers)) != len(classifiers):
            raise InvalidConfig("classifiers must be a non-empty list without repeats")
        fs = doc.get("fs", {})
        fs_min = fs.get("min_features_to_select", "half")
        if fs_min != "half" and not (isinstance(fs_min, int) and fs_min >= 1):
            raise InvalidConfig("fs.min_features_to_select must be 'half' or a positive integer")
        s = doc.get("search", {})
        search = SearchConfig(_take(s, "n_iter", 25, int), _take(s, "cv_folds", 5, int),
                              s.get("scoring", "accuracy"), seed)
        spaces = {check_kind(k): space_from_json(v) for k, v in s.get("spaces", {}).items()}
        sh = doc.get("shap", {})
        shap = ShapConfig(_take(sh, "background_size", 100, int), _take(sh, "exact_threshold", 12, int),
                          _take(sh, "n_coalition_samples", 2048, int), sh.get("target", "predicted_class"),
                          seed)
        pre = doc.get("preprocess", {})
        cfg = ExperimentConfig(
            dataset=ds, output_dir=base_dir / doc["output_dir"], seed=seed,
            test_fraction=_take(doc, "test_fraction", 0.2, float), classifiers=classifiers,
            fs_min=fs_min, fs_cv_folds=_take(fs, "cv_folds", 5, int), fs_step=_take(fs, "step", 1, int),
            search=search, spaces=spaces, shap=shap, explain_rows=_take(sh, "explain_rows", 50, int),
            impute_k=_take(pre, "impute_k", 5, int), scale=bool(pre.get("scale", True)),
            timing_repeats=_take(doc, "timing_repeats", 1, int), raw=doc, base_dir=base_dir)
        for kind, space in spaces.items():
            PipelineConfig(kind, space)
    except InvalidConfig:
        raise
    except RansomXAIError as exc:
        raise InvalidConfig(str(exc)) from None
    if not 0 < cfg.test_fraction < 1:
        raise InvalidConfig("test_fraction must lie in (0, 1)")
    if cfg.explain_rows < 0 or cfg.timing_repeats < 1:
        raise InvalidConfig("explain_rows must be >= 0 and timing_repeats >= 1")
    return cfg


def load_config(path, seed_override=None) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise InvalidConfig(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config file {path} is not valid JSON: {exc}") from None
    return parse_config(doc, path.parent, seed_override)


def _csv_header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def load_dataset(cfg: ExperimentConfig):
    ds = cfg.dataset
    if "path" in ds:
        path = cfg.base_dir / ds["path"]
        schema_id = ds.get("schema", "numeric")
        label = ds.get("label_column", "family")
        if schema_id == "numeric":
            names = [h for h in _csv_header(path) if h != label]
            schema = FeatureSchema.numeric_only(names, label_column=label)
        else:
            schema = SCHEMAS[schema_id]
        return load_csv(path, schema, label_column=label)
    syn = dict(ds["synthetic"])
    shape = syn.pop("shape", "data1")
    seed = int(syn.pop("seed", cfg.seed))
    try:
        if shape == "data1":
            return synth_data1_like(seed, **syn)
        if shape == "data2":
            return synth_data2_like(seed, **syn)
        if shape == "blobs":
            return synth_generate(SynthSpec(**syn), seed)
    except TypeError as exc:
        raise InvalidConfig(f"synthetic dataset: {exc}") from None
    raise InvalidConfig(f"unknown synthetic shape {shape!r}")


def resolve_min_features(fs_min, n_raw_features: int) -> int:
    """``"half"`` means ceil(n / 2) of the raw (pre-encoding) feature count."""
    if fs_min == "half":
        return max(1, math.ceil(n_raw_features / 2))
    return int(fs_min)


# ---------------------------------------------------------------- run


def _explain(result, train_matrix, test_matrix, cfg: ExperimentConfig, clf: str):
    shap_cfg = ShapConfig(cfg.shap.background_size, cfg.shap.exact_threshold,
                          cfg.shap.n_coalition_samples, cfg.shap.target,
                          derive_seed(cfg.seed, "shap", clf))
    background = sample_background(train_matrix, shap_cfg)
    rows = np.arange(len(test_matrix))
    if len(rows) > cfg.explain_rows:
        rng = np.random.default_rng(derive_seed(cfg.seed, "explain-rows", clf))
        rows = np.sort(rng.choice(len(rows), cfg.explain_rows, replace=False))
    shap = explain_dataset(result.model, test_matrix[rows], background, shap_cfg)
    ranking = summarize(shap)
    return SummaryRanking(ranking.features, ranking.mean_abs, shap_cfg.seed)


def cmd_run(config_path, seed=None, single_thread_timing=False) -> int:
    cfg = load_config(config_path, seed)
    try:
        data = load_dataset(cfg)
    except (RansomXAIError, OSError) as exc:
        raise InvalidConfig(f"cannot load dataset: {exc}") from None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    split = stratified_split(data, cfg.test_fraction, derive_seed(cfg.seed, "split"))
    train, test = data.take(split.train), data.take(split.test)
    min_feat = resolve_min_features(cfg.fs_min, data.n_features)

    confusions, timings, selections, rankings = {}, {}, {}, {}
    failures = []
    arms = []
    for clf in cfg.classifiers:
        results = {}
        for fs in (False, True):
            rcfg = RfecvConfig(min_feat, cfg.fs_cv_folds, cfg.fs_step) if fs else None
            pcfg = PipelineConfig(clf, cfg.spaces.get(clf), rcfg, cfg.search,
                                  derive_seed(cfg.seed, "arm", clf), cfg.impute_k, cfg.scale,
                                  cfg.timing_repeats)
            arm = "with" if fs else "without"
            try:
                ctx = threads(1) if single_thread_timing else contextlib.nullcontext()
                with ctx:
                    res = run_pipeline(pcfg, train, test)
            except Exception as exc:
                log.error("%s %s-FS arm failed: %s", clf, arm, exc)
                failures.append({"classifier": clf, "arm": arm, "stage": "pipeline",
                                 "error": f"{type(exc).__name__}: {exc}"})
                arms.append({"classifier": clf, "arm": arm, "status": "failed"})
                continue
            results[fs] = res
            confusions[(clf, fs)] = res.confusion
            timings[(clf, fs)] = ArmTiming(res.seconds, res.final_fit_seconds)
            write_atomic(out / "confusion" / f"{clf}_{arm}.csv", confusion_csv(res.confusion))
            arms.append({"classifier": clf, "arm": arm, "status": "ok",
                         "n_features": len(res.feature_names),
                         "best_hyperparams": params_to_dict(res.search.best_hp),
                         "best_cv_score": res.search.best_cv_score})
            log.info("%s %s-FS: accuracy %.2f, %d columns", clf, arm, res.report.accuracy,
                     len(res.feature_names))
        if True in results:
            sel = results[True].rfecv
            selections[clf] = sel
            doc = sel.to_dict()
            doc["classifier"] = clf
            doc["min_features_to_select"] = min_feat
            doc["hyperparams"] = params_to_dict(results[True].search.best_hp)
            write_atomic(out / "selected" / f"{clf}.json", dump_json(doc))
        if False in results and cfg.explain_rows > 0:
            res = results[False]
            try:
                Xtr = res.preprocessor.transform(train).to_matrix()
                Xte = res.preprocessor.transform(test).to_matrix()
                rankings[clf] = _explain(res, Xtr, Xte, cfg, clf)
            except Exception as exc:
                log.error("%s SHAP stage failed: %s", clf, exc)
                failures.append({"classifier": clf, "arm": "without", "stage": "shap",
                                 "error": f"{type(exc).__name__}: {exc}"})

    write_atomic(out / "metrics.csv", metrics_table(confusions, cfg.classifiers))
    write_atomic(out / "timing.csv", timing_table(timings, cfg.classifiers))
    comparison = comparison_report(selections, rankings, confusions, cfg.classifiers, cfg.seed)
    k = comparison["k"]
    for clf, ranking in rankings.items():
        write_atomic(out / "shap" / f"{clf}_top_k.csv", summary_csv(ranking, k or None))
        write_atomic(out / "shap" / f"{clf}_ranking.json", dump_json(ranking.to_dict()))
    write_atomic(out / "comparison.json", dump_json(comparison))
    manifest = {
        "tool": "ransomxai", "version": __version__, "seed": cfg.seed,
        "config_hash": cfg.config_hash, "config": cfg.raw, "threads": get_threads(),
        "single_thread_timing": bool(single_thread_timing),
        "min_features_to_select": min_feat, "k": k,
        "n_train": int(train.n_rows), "n_test": int(test.n_rows),
        "arms": arms, "failures": failures,
    }
    write_atomic(out / "manifest.json", dump_json(manifest))
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------- plotdata


def cmd_plotdata(run_dir) -> list:
    """Write plot-ready CSVs into ``<run_dir>/plots``; returns the paths written."""
    run_dir = Path(run_dir)
    manifest = run_dir / "manifest.json"
    if not manifest.is_file():
        raise MissingArtifacts(f"{manifest} not found; is {run_dir} a completed run?")
    classifiers = json.loads(manifest.read_text())["config"].get("classifiers", list(KINDS))
    shap_files = {c: run_dir / "shap" / f"{c}_top_k.csv" for c in classifiers}
    sel_files = {c: run_dir / "selected" / f"{c}.json" for c in classifiers}
    shap_found = {c: p for c, p in shap_files.items() if p.is_file()}
    if not shap_found:
        raise MissingArtifacts(f"no SHAP summaries under {run_dir / 'shap'}")
    written = []
    for clf, path in shap_found.items():
        ranking = SummaryRanking.from_csv(path.read_text())
        target = run_dir / "plots" / f"shap_summary_{clf}.csv"
        write_atomic(target, summary_csv(ranking))
        written.append(target)
    for clf, path in sel_files.items():
        if not path.is_file():
            continue
        sel = RfecvResult.from_dict(json.loads(path.read_text()))
        target = run_dir / "plots" / f"rfecv_curve_{clf}.csv"
        write_atomic(target, curve_csv(sel.cv_curve))
        written.append(target)
    return written


# ---------------------------------------------------------------- extract


def _read_manifest(path: Path) -> dict:
    """``capture,family`` CSV (header optional) or a JSON object."""
    text = path.read_text()
    if path.suffix == ".json":
        return {str(k): v for k, v in json.loads(text).items()}
    out = {}
    for row in csv.reader(text.splitlines()):
        if not row or row[0].strip().lower() in ("capture", "file", "path"):
            continue
        out[row[0].strip()] = row[1].strip()
    return out


def _captures(pcap_dir: Path, family_map):
    if family_map is not None:
        mapping = _read_manifest(Path(family_map))
        return [(pcap_dir / rel, fam) for rel, fam in sorted(mapping.items())]
    out = []
    for sub in sorted(p for p in pcap_dir.iterdir() if p.is_dir()):
        for f in sorted(sub.rglob("*")):
            if f.is_file() and f.suffix.lower() in (".pcap", ".cap", ".pcapng"):
                out.append((f, sub.name))
    return out


def cmd_extract(pcap_dir, family_map, out_csv) -> int:
    """Featurize every capture under ``pcap_dir`` into one Data2-schema CSV.

    Families come from the subfolder names, or from ``family_map`` when
    given. Rows keep capture order, then flow start time.
    """
    pcap_dir = Path(pcap_dir)
    if not pcap_dir.is_dir():
        log.error("%s is not a directory", pcap_dir)
        return EXIT_CONFIG
    try:
        captures = _captures(pcap_dir, family_map)
    except (OSError, ValueError, IndexError) as exc:
        log.error("cannot read family map: %s", exc)
        return EXIT_CONFIG
    if not captures:
        log.error("no captures found under %s", pcap_dir)
        return EXIT_PARTIAL
    parts, failed = [], 0
    for path, fam in captures:
        stats: dict = {}
        try:
            rows = featurize_capture(path.read_bytes(), family(fam), stats)
        except Exception as exc:
            failed += 1
            log.warning("%s: skipped (%s: %s)", path, type(exc).__name__, exc)
            continue
        print(f"{path}: family={family(fam).code} rows={rows.n_rows} flows={stats['flows']} "
              f"http={stats['http']} dns={stats['dns']} frames={stats['frames']} "
              f"skipped={stats['skipped'] + stats['unsupported']}", file=sys.stderr)
        parts.append(rows)
    if failed == len(captures):
        log.error("every capture failed")
        return EXIT_PARTIAL
    write_csv(concat(parts), out_csv)
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------- argparse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ransomxai", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", help="featurize a directory of captures into a CSV")
    e.add_argument("pcap_dir")
    e.add_argument("out_csv")
    e.add_argument("--family-map", default=None, help="capture,family manifest (CSV or JSON)")

    r = sub.add_parser("run", help="run both arms for every configured classifier")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--single-thread-timing", action="store_true",
                   help="run the timed arms on one thread")

    d = sub.add_parser("plotdata", help="emit plot-ready CSVs from a run directory")
    d.add_argument("run_dir")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.threads is not None and args.threads < 1:
        log.error("--threads must be at least 1")
        return EXIT_CONFIG
    set_threads(args.threads or os.cpu_count() or 1)
    try:
        if args.command == "extract":
            return cmd_extract(args.pcap_dir, args.family_map, args.out_csv)
        if args.command == "run":
            return cmd_run(args.config, args.seed, args.single_thread_timing)
        for path in cmd_plotdata(args.run_dir):
            print(path)
        return EXIT_OK
    except InvalidConfig as exc:
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG
    except MissingArtifacts as exc:
        log.error("%s", exc)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
