"""Command-line entry point.

Subcommands compose into a pipeline over one shared run configuration:

    fixture   -> synthetic chain + labels + run.json
    features  -> features.csv + senders.json (per-address vectors)
    cluster   -> clusters.json (unsupervised structure, label-based quality)
    classify  -> classify.json + fitted model files (cross-validated)
    explain   -> attributions.csv + explain.json (per-feature Shapley values)
    decode    -> inspect the modeled function/event signature table

Every produced file carries the tool version, the SHA-256 of the effective
configuration, and the seed, so any output can be traced to the exact run
that made it. No output embeds wall-clock time: identical inputs give
byte-identical files.

Exit codes: 0 success, 1 bad input (files, config, flags), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from typing import Optional, Sequence

import numpy as np

from . import __version__, abi
from .chain import load_chain_data
from .config import RunConfig, load_config
from .dataset import load_labels, load_mev_labels, k_folds, select_multiclass_rows
from .errors import InputError
from .explain import mean_abs_attribution, sample_background, write_attributions_csv
from .features import (FeatureMatrix, build_feature_matrix, feature_registry,
                       read_features_csv, write_features_csv)
from .fixture import generate_fixture
from .models import (cluster_quality, cross_validate, elbow_select,
                     fit_adaboost, fit_gradient_boosting, fit_preprocessor,
                     fit_random_forest, gmm_bic, gmm_fit, gmm_predict,
                     kmeans_fit, kmeans_predict, load_classifier,
                     save_classifier)

log = logging.getLogger("botdetect.cli")


# ---------------------------------------------------------------- plumbing

def _provenance(cfg: RunConfig) -> dict:
    return {"tool": "botdetect", "version": __version__,
            "config_sha256": cfg.sha256, "seed": cfg.seed}


def _comment(cfg: RunConfig) -> str:
    return f"botdetect {__version__} config_sha256={cfg.sha256} seed={cfg.seed}"


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_features(cfg: RunConfig) -> tuple[FeatureMatrix, dict]:
    fpath = cfg.out_path("features.csv")
    spath = cfg.out_path("senders.json")
    for p in (fpath, spath):
        if not os.path.exists(p):
            raise InputError(f"{p} not found; run `botdetect features` first")
    with open(spath, encoding="utf-8") as fh:
        manifest = json.load(fh)
    return read_features_csv(fpath), manifest


def _labeled_rows(cfg: RunConfig, matrix: FeatureMatrix,
                  manifest: dict) -> tuple[list[str], list[str], list[str], dict]:
    """Split matrix rows into evaluation (test-window senders) and the rest.

    Returns (eval_rows, eval_binary_labels, other_rows, account_by_address).
    Every test-window sender must be labeled and present in the matrix.
    """
    accounts = {a.address: a for a in load_labels(cfg.labels)}
    test_senders = set(manifest["test_senders"])
    absent = sorted(test_senders - set(matrix.addresses))
    if absent:
        raise InputError(f"features.csv is stale: missing test senders "
                         f"{', '.join(absent[:5])}; rerun `botdetect features`")
    unlabeled = sorted(a for a in test_senders if a not in accounts)
    if unlabeled:
        raise InputError(f"unlabeled test-window senders: {', '.join(unlabeled[:5])}"
                         f"{' ...' if len(unlabeled) > 5 else ''}")
    eval_rows = [a for a in matrix.addresses if a in test_senders]
    other_rows = [a for a in matrix.addresses if a not in test_senders]
    eval_labels = [accounts[a].binary_label for a in eval_rows]
    return eval_rows, eval_labels, other_rows, accounts


# ---------------------------------------------------------------- features

def cmd_features(cfg: RunConfig, args: argparse.Namespace) -> int:
    data = load_chain_data(cfg.blocks, cfg.txs, cfg.logs, cfg.block_range)
    addresses = sorted(data.all_senders())
    if not addresses:
        raise InputError(f"no transaction senders in blocks "
                         f"{cfg.block_range[0]}..{cfg.block_range[1]}")
    matrix = build_feature_matrix(data, addresses)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_features_csv(matrix, cfg.out_path("features.csv"), comment=_comment(cfg))
    test_lo, test_hi = cfg.test_blocks
    _write_json(cfg.out_path("senders.json"), {
        "provenance": _provenance(cfg),
        "block_range": list(cfg.block_range),
        "test_blocks": [test_lo, test_hi],
        "n_addresses": len(addresses),
        "test_senders": sorted(data.senders_in_blocks((test_lo, test_hi))),
    })
    n, d = matrix.shape
    print(f"features: {n} addresses x {d} features -> {cfg.out_path('features.csv')}")
    return 0


def cmd_registry(args: argparse.Namespace) -> int:
    specs = feature_registry()
    width = max(len(s.name) for s in specs)
    for s in specs:
        print(f"{s.name:<{width}}  [{s.group}]  {s.definition}")
    print(f"{len(specs)} features")
    return 0


# ----------------------------------------------------------------- cluster

def _quality(assignments: np.ndarray, labels: Sequence[str]) -> dict:
    report = cluster_quality(assignments, labels)
    return report.to_json()


def cmd_cluster(cfg: RunConfig, args: argparse.Namespace) -> int:
    matrix, manifest = _read_features(cfg)
    eval_rows, eval_labels, fit_rows, accounts = _labeled_rows(cfg, matrix, manifest)
    fine_labels = [accounts[a].fine_label or accounts[a].binary_label
                   for a in eval_rows]
    if len(fit_rows) < 2:
        raise InputError(f"only {len(fit_rows)} rows outside the test window; "
                         "clustering needs at least 2")
    fit_matrix = matrix.subset(fit_rows)
    eval_matrix = matrix.subset(eval_rows)
    cl = cfg.cluster
    scale = cfg.preprocessing["scale"]

    transformed: dict[tuple[str, bool], tuple[np.ndarray, np.ndarray]] = {}
    for imputation in cl["imputations"]:
        for embed in cl["embeds"]:
            pre = fit_preprocessor(fit_matrix, kind=scale,
                                   imputation=imputation, embed=embed)
            transformed[(imputation, embed)] = (pre.transform(fit_matrix),
                                                pre.transform(eval_matrix))

    def fit_and_eval(algorithm: str, k: int, Xf: np.ndarray, Xe: np.ndarray) -> dict:
        if algorithm == "kmeans":
            model = kmeans_fit(Xf, k, cfg.seed)
            assignments = kmeans_predict(model, Xe)
            fit_stats = {"inertia": model.inertia, "n_iter": model.n_iter}
        else:
            model = gmm_fit(Xf, k, covariance_type=cl["covariance"], seed=cfg.seed)
            assignments = gmm_predict(model, Xe)
            fit_stats = {"log_likelihood": model.log_likelihood,
                         "n_iter": model.n_iter, "bic": gmm_bic(model, Xf)}
        return {"fit": fit_stats,
                "evaluation": {"binary": _quality(assignments, eval_labels),
                               "fine": _quality(assignments, fine_labels)}}

    combos = []
    for imputation in cl["imputations"]:
        for embed in cl["embeds"]:
            Xf, Xe = transformed[(imputation, embed)]
            for algorithm in cl["algorithms"]:
                for k in cl["k_values"]:
                    entry = {"algorithm": algorithm, "k": k,
                             "imputation": imputation, "embed": embed}
                    if k > len(fit_rows):
                        entry["skipped"] = f"k={k} exceeds {len(fit_rows)} rows"
                    else:
                        entry.update(fit_and_eval(algorithm, k, Xf, Xe))
                    combos.append(entry)

    # Model-order selection on the default preprocessing: BIC over GMM fits
    # and the elbow of the k-means inertia curve.
    default_key = (cfg.preprocessing["imputation"], cfg.preprocessing["embed"])
    if default_key not in transformed:
        pre = fit_preprocessor(fit_matrix, kind=scale, imputation=default_key[0],
                               embed=default_key[1])
        transformed[default_key] = (pre.transform(fit_matrix),
                                    pre.transform(eval_matrix))
    Xf, Xe = transformed[default_key]
    k_scan = [k for k in cl["k_scan"] if k <= len(fit_rows)]
    selection: dict[str, dict] = {}
    if len(k_scan) >= 3:
        bic_curve, gmm_models = [], {}
        for k in k_scan:
            m = gmm_fit(Xf, k, covariance_type=cl["covariance"], seed=cfg.seed)
            gmm_models[k] = m
            bic_curve.append((k, gmm_bic(m, Xf)))
        bic_k = min(bic_curve, key=lambda kv: (kv[1], kv[0]))[0]
        selection["bic"] = {
            "curve": [{"k": k, "bic": v} for k, v in bic_curve],
            "chosen_k": bic_k,
            "evaluation": {"binary": _quality(gmm_predict(gmm_models[bic_k], Xe),
                                              eval_labels)},
        }
        inertia_curve, km_models = [], {}
        for k in k_scan:
            m = kmeans_fit(Xf, k, cfg.seed)
            km_models[k] = m
            inertia_curve.append((k, m.inertia))
        elbow_k = elbow_select(inertia_curve)
        selection["elbow"] = {
            "curve": [{"k": k, "inertia": v} for k, v in inertia_curve],
            "chosen_k": elbow_k,
            "evaluation": {"binary": _quality(kmeans_predict(km_models[elbow_k], Xe),
                                              eval_labels)},
        }

    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_json(cfg.out_path("clusters.json"), {
        "provenance": _provenance(cfg),
        "n_fit_rows": len(fit_rows),
        "n_eval_rows": len(eval_rows),
        "scale": scale,
        "combos": combos,
        "selection": selection,
    })

    for entry in combos:
        tag = (f"{entry['algorithm']} k={entry['k']} "
               f"imputation={entry['imputation']} embed={entry['embed']}")
        if "skipped" in entry:
            print(f"cluster: {tag}: skipped ({entry['skipped']})")
            continue
        q = entry["evaluation"]["binary"]
        print(f"cluster: {tag}: weighted purity {q['weighted_purity']:.3f} "
              f"entropy {q['weighted_entropy']:.3f}")
    for name in ("bic", "elbow"):
        if name in selection:
            sel = selection[name]
            q = sel["evaluation"]["binary"]
            print(f"cluster: {name}-selected k={sel['chosen_k']}: "
                  f"weighted purity {q['weighted_purity']:.3f} "
                  f"entropy {q['weighted_entropy']:.3f}")
    print(f"cluster: report -> {cfg.out_path('clusters.json')}")
    return 0


# ---------------------------------------------------------------- classify

def _fitters(cfg: RunConfig) -> dict:
    cf = cfg.classify
    return {
        "random_forest": lambda X, y: fit_random_forest(
            X, y, n_trees=cf["n_trees"], seed=cfg.seed),
        "gradient_boosting": lambda X, y: fit_gradient_boosting(
            X, y, rounds=cf["gb_rounds"], depth=cf["gb_depth"],
            rate=cf["gb_rate"], seed=cfg.seed),
        "adaboost": lambda X, y: fit_adaboost(
            X, y, rounds=cf["ada_rounds"], seed=cfg.seed),
    }


def _classify_dataset(cfg: RunConfig, name: str, matrix: FeatureMatrix,
                      rows: list[str], labels: list[str], folds: int,
                      positive_class: Optional[str]) -> dict:
    cf, pre = cfg.classify, cfg.preprocessing
    X = matrix.subset(rows)
    splits = k_folds(len(rows), labels, folds, cfg.seed,
                     stratified=cf["stratified"])
    fitters = _fitters(cfg)
    out = {"n_rows": len(rows), "folds": folds, "stratified": cf["stratified"],
           "models": {}}
    print(f"classify: {name} ({len(rows)} rows, {folds} folds)")
    for kind in cf["models"]:
        report = cross_validate(X, labels, splits, fitters[kind],
                                scale_kind=pre["scale"],
                                imputation=pre["imputation"],
                                embed=pre["embed"],
                                positive_class=positive_class)
        out["models"][kind] = report.to_json()
        print(f"  {kind}")
        for line in report.summary_lines():
            print(f"    {line}")
        # Refit on all rows and persist, so `explain` has a model to load.
        p = fit_preprocessor(X, kind=pre["scale"], imputation=pre["imputation"],
                             embed=pre["embed"])
        model = fitters[kind](p.transform(X), labels)
        path = cfg.out_path(f"model_{name}_{kind}.json")
        save_classifier(model, path, provenance=_provenance(cfg))
        out["models"][kind]["model_file"] = os.path.basename(path)
    return out


def cmd_classify(cfg: RunConfig, args: argparse.Namespace) -> int:
    matrix, manifest = _read_features(cfg)
    eval_rows, eval_labels, _, accounts = _labeled_rows(cfg, matrix, manifest)
    cf = cfg.classify
    os.makedirs(cfg.out_dir, exist_ok=True)
    doc = {"provenance": _provenance(cfg)}
    if "binary" in cf["datasets"]:
        doc["binary"] = _classify_dataset(cfg, "binary", matrix, eval_rows,
                                          eval_labels, cf["folds"],
                                          positive_class="Bot")
    if "multiclass" in cf["datasets"]:
        if cfg.mev_labels is None:
            raise InputError("multiclass dataset requested but mev_labels is not set")
        mev = load_mev_labels(cfg.mev_labels)
        nonmev_pool = [a for a, acct in accounts.items()
                       if acct.binary_label == "Human"]
        rows, mlabels = select_multiclass_rows(mev, nonmev_pool,
                                               cf["per_class"], cfg.seed)
        doc["multiclass"] = _classify_dataset(cfg, "multiclass", matrix, rows,
                                              mlabels, cf["multiclass_folds"],
                                              positive_class=None)
    _write_json(cfg.out_path("classify.json"), doc)
    print(f"classify: report -> {cfg.out_path('classify.json')}")
    return 0


# ----------------------------------------------------------------- explain

def cmd_explain(cfg: RunConfig, args: argparse.Namespace) -> int:
    model_path = args.model or cfg.out_path("model_binary_random_forest.json")
    if not os.path.exists(model_path):
        raise InputError(f"{model_path} not found; run `botdetect classify` first "
                         "or pass --model")
    model = load_classifier(model_path)
    matrix, manifest = _read_features(cfg)
    eval_rows, _, _, _ = _labeled_rows(cfg, matrix, manifest)
    pre_cfg = cfg.preprocessing
    X = matrix.subset(eval_rows)
    p = fit_preprocessor(X, kind=pre_cfg["scale"],
                         imputation=pre_cfg["imputation"], embed=pre_cfg["embed"])
    Xt = p.transform(X)
    names = (["component_1", "component_2"] if pre_cfg["embed"]
             else list(matrix.names))
    ex = cfg.explain
    background = sample_background(Xt, ex["background_size"], cfg.seed)
    attributions, table = mean_abs_attribution(
        model, Xt, instance_ids=eval_rows,
        n_permutations=ex["n_permutations"], seed=cfg.seed,
        background=background)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_attributions_csv(attributions, names,
                           cfg.out_path("attributions.csv"), comment=_comment(cfg))
    overall = table.mean(axis=1)
    order = np.argsort(-overall, kind="stable")
    ranking = [{"feature": names[j], "mean_abs": float(overall[j]),
                "per_class": {cls: float(table[j, ci])
                              for ci, cls in enumerate(model.classes)}}
               for j in order]
    _write_json(cfg.out_path("explain.json"), {
        "provenance": _provenance(cfg),
        "model_file": os.path.basename(model_path),
        "model_kind": model.kind,
        "classes": list(model.classes),
        "n_instances": len(eval_rows),
        "n_permutations": ex["n_permutations"],
        "background_size": int(len(background)),
        "ranking": ranking,
    })
    top = ranking[:ex["top_n"]]
    width = max(len(r["feature"]) for r in top)
    print(f"explain: {model.kind} over {len(eval_rows)} instances, "
          f"{ex['n_permutations']} permutations")
    for rank, r in enumerate(top, start=1):
        print(f"  {rank:>2}. {r['feature']:<{width}}  {r['mean_abs']:.4f}")
    print(f"explain: attributions -> {cfg.out_path('attributions.csv')}")
    return 0


# ------------------------------------------------------- fixture and decode

def cmd_fixture(args: argparse.Namespace) -> int:
    report = generate_fixture(args.out, seed=args.seed, scale=args.scale)
    for key in ("out_dir", "seed", "scale", "blocks", "block_range",
                "test_blocks", "txs", "logs", "bots", "humans",
                "background_senders", "labeled"):
        print(f"fixture: {key} = {report[key]}")
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    print("functions (selector  signature)")
    for spec in abi.function_specs():
        print(f"  {spec.selector.hex()}  {spec.signature}")
    print("events (topic0  signature)")
    for spec in abi.event_specs():
        print(f"  {spec.topic0.hex()}  {spec.signature}")
    return 0


# -------------------------------------------------------------- arg parsing

class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with the input-error exit code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _parse_block_range(text: str) -> list[int]:
    try:
        lo, hi = text.split(":")
        return [int(lo), int(hi)]
    except ValueError:
        raise InputError(f"--block-range expects LO:HI, got {text!r}") from None


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise InputError(f"expected comma-separated integers, got {text!r}") from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", required=True, help="run config JSON file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", help="override the output directory")
    p.add_argument("--block-range", help="override the block range as LO:HI")
    p.add_argument("--test-block-count", type=int,
                   help="override how many trailing blocks form the test window")


def _overrides(args: argparse.Namespace) -> dict:
    out = {
        "seed": args.seed,
        "out_dir": args.out_dir,
        "test_block_count": args.test_block_count,
        "block_range": (_parse_block_range(args.block_range)
                        if args.block_range else None),
    }
    for flag, key in (("k", "cluster.k_values"),
                      ("folds", "classify.folds"),
                      ("permutations", "explain.n_permutations"),
                      ("background_size", "explain.background_size"),
                      ("top_n", "explain.top_n")):
        if hasattr(args, flag):
            out[key] = getattr(args, flag)
    if out.get("cluster.k_values") is not None:
        out["cluster.k_values"] = _parse_int_list(out["cluster.k_values"])
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="botdetect",
                     description="Detect automated trading accounts from "
                                 "raw transaction and event exports.")
    parser.add_argument("--version", action="version",
                        version=f"botdetect {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", parents=[], help="build per-address feature vectors")
    p.add_argument("--registry", action="store_true",
                   help="list the feature registry and exit (no config needed)")
    p.add_argument("-c", "--config", help="run config JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--block-range")
    p.add_argument("--test-block-count", type=int)
    p.set_defaults(kind="features")

    p = sub.add_parser("cluster", help="fit clusterings and score them on labels")
    _add_config_flags(p)
    p.add_argument("--k", help="override cluster counts, e.g. 5,15,30")
    p.set_defaults(kind="cluster")

    p = sub.add_parser("classify", help="cross-validate the supervised models")
    _add_config_flags(p)
    p.add_argument("--folds", type=int, help="override the fold count")
    p.set_defaults(kind="classify")

    p = sub.add_parser("explain", help="per-feature attribution for a fitted model")
    _add_config_flags(p)
    p.add_argument("--model", help="model JSON (default: the binary random forest)")
    p.add_argument("--permutations", type=int, dest="permutations",
                   help="override the sampled permutation count")
    p.add_argument("--background-size", type=int, dest="background_size")
    p.add_argument("--top-n", type=int, dest="top_n")
    p.set_defaults(kind="explain")

    p = sub.add_parser("fixture", help="generate the synthetic end-to-end scenario")
    p.add_argument("--out", required=True, help="directory to write into")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--scale", type=int, default=1,
                   help="block-count multiplier (default 1)")
    p.set_defaults(kind="fixture")

    p = sub.add_parser("decode", help="inspect the modeled signature table")
    p.add_argument("--list-specs", action="store_true", required=True,
                   help="print the function and event signature table")
    p.set_defaults(kind="decode")
    return parser


class _DedupeFilter(logging.Filter):
    """Show each distinct library warning once per invocation."""

    def __init__(self):
        super().__init__()
        self._seen: set[tuple] = set()

    def filter(self, record: logging.LogRecord) -> bool:
        key = (record.name, record.levelno, record.getMessage())
        if key in self._seen:
            return False
        self._seen.add(key)
        return True


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    dedupe = _DedupeFilter()
    root_handlers = list(logging.getLogger().handlers)
    for handler in root_handlers:
        handler.addFilter(dedupe)
    try:
        args = build_parser().parse_args(argv)
        if args.kind == "fixture":
            return cmd_fixture(args)
        if args.kind == "decode":
            return cmd_decode(args)
        if args.kind == "features" and args.registry:
            return cmd_registry(args)
        if args.config is None:
            raise InputError("missing -c/--config (required unless --registry)")
        cfg = load_config(args.config, _overrides(args))
        command = {"features": cmd_features, "cluster": cmd_cluster,
                   "classify": cmd_classify, "explain": cmd_explain}[args.kind]
        return command(cfg, args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2
    finally:
        for handler in root_handlers:
            handler.removeFilter(dedupe)


if __name__ == "__main__":
    sys.exit(main())
