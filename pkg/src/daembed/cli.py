"""Command line entry point: ``daembed {lsa,adapt,eval,pipeline}``.

All commands read one YAML config; ``--seed`` and ``--out`` override it.
Exit codes: 0 success, 2 parse error, 3 numerical error, 4 config error.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import yaml
from threadpoolctl import threadpool_limits

from .adapt import METHODS, AdaptConfig, adapt
from .embeddings import EmbeddingTable, load_embeddings, save_embeddings
from .evaluation import LabeledDataset, cross_validate, load_dataset, stratified_folds
from .exceptions import ConfigError, DaembedError
from .lsa import LSAEmbedder, read_corpus

logger = logging.getLogger("daembed")

THREADS_ENV = "DAEMBED_NUM_THREADS"
BASELINES = ("generic-only", "ds-only")
ALL_METHODS = METHODS + BASELINES

DEFAULTS = {
    "seed": 0,
    "out": "results",
    "dataset": {"path": None, "name": None},
    "generic": {},
    "generic_lowercase": False,
    "ds": {"source": "lsa", "name": "lsa", "path": None},
    "lsa": {"k": 70, "weighting": "tf-idf", "scaling_power": 1.0},
    "methods": ["cca", "kcca", "concsvd", "generic-only", "ds-only"],
    "adapt": {
        "d_grid": None,
        "ridge": 1e-3,
        "kappa": 0.1,
        "sigma_rules": ["median", "twice-median"],
        "shared_sigma": False,
        "sample_cap": 1000,
        "select_metric": "f_score",
    },
    "eval": {
        "folds": 10,
        "weighting": "uniform",
        "oov_policy": "skip",
        "l2_lambda": 1.0,
        "tol": 1e-6,
        "max_iter": 500,
        "threshold": 0.5,
        "standardize": True,
    },
    "embeddings": {},
}


def _merge(base, override, where="config"):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown key {where}.{key}")
        if isinstance(base[key], dict) and base[key] and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{where}.{key}")
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=None):
    """Read a YAML config, fill defaults, apply overrides and validate."""
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        base_dir = Path(path).resolve().parent
    else:
        base_dir = Path.cwd()
    cfg = _merge(DEFAULTS, raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    cfg["_base_dir"] = str(base_dir)
    validate_config(cfg)
    return cfg


def _resolve(cfg, p):
    if p is None:
        return None
    p = Path(os.path.expanduser(str(p)))
    return p if p.is_absolute() else Path(cfg["_base_dir"]) / p


def validate_config(cfg):
    methods = cfg["methods"]
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods must be a non-empty list")
    unknown = [m for m in methods if m not in ALL_METHODS]
    if unknown:
        raise ConfigError(f"unknown method(s) {unknown}; expected any of {list(ALL_METHODS)}")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed must be an integer")
    if cfg["ds"]["source"] not in ("lsa", "file"):
        raise ConfigError("ds.source must be 'lsa' or 'file'")
    if cfg["ds"]["source"] == "file" and not cfg["ds"]["path"]:
        raise ConfigError("ds.path is required when ds.source is 'file'")
    if not isinstance(cfg["generic"], dict):
        raise ConfigError("generic must map names to embedding files")
    for name in list(cfg["generic"]) + list(cfg["embeddings"]) + [cfg["ds"]["name"]]:
        if not isinstance(name, str) or not name or any(c in name for c in "/\\ \t"):
            raise ConfigError(f"invalid source name {name!r}")
    paths = [("dataset.path", cfg["dataset"]["path"])]
    paths += [(f"generic.{k}", v) for k, v in cfg["generic"].items()]
    paths += [(f"embeddings.{k}", v) for k, v in cfg["embeddings"].items()]
    if cfg["ds"]["source"] == "file":
        paths.append(("ds.path", cfg["ds"]["path"]))
    for key, p in paths:
        if p is not None and not _resolve(cfg, p).is_file():
            raise ConfigError(f"{key}: file not found: {p}")
    adapt_cfg = cfg["adapt"]
    if adapt_cfg["d_grid"] is not None:
        if not isinstance(adapt_cfg["d_grid"], list) or not adapt_cfg["d_grid"]:
            raise ConfigError("adapt.d_grid must be a non-empty list or null")
    if int(cfg["eval"]["folds"]) < 2:
        raise ConfigError("eval.folds must be at least 2")


def config_hash(cfg) -> str:
    public = {k: v for k, v in cfg.items() if not k.startswith("_") and k != "out"}
    blob = json.dumps(public, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class _Context:
    def __init__(self, cfg):
        self.cfg = cfg
        self.seed = cfg["seed"]
        self.hash = config_hash(cfg)
        self.out = _resolve(cfg, cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self._dataset = None

    @property
    def provenance(self):
        return {"config_hash": self.hash, "seed": self.seed}

    def header(self):
        return [f"config_hash={self.hash} seed={self.seed}"]

    def dataset(self) -> LabeledDataset:
        if self._dataset is None:
            path = self.cfg["dataset"]["path"]
            if path is None:
                raise ConfigError("dataset.path is required for this command")
            self._dataset = load_dataset(_resolve(self.cfg, path), self.cfg["dataset"]["name"])
        return self._dataset

    @property
    def dataset_name(self):
        return self.cfg["dataset"]["name"] or self.dataset().name

    def write_json(self, path, payload):
        payload = dict(payload, **self.provenance)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def write_table(self, table: EmbeddingTable, path, **meta):
        save_embeddings(table, path)
        self.write_json(Path(f"{path}.meta.json"), dict(meta, n_tokens=len(table), dim=table.dim))

    def lsa_path(self):
        return self.out / f"lsa-{self.dataset_name}.txt"

    def ds_table(self) -> EmbeddingTable:
        ds = self.cfg["ds"]
        if ds["source"] == "file":
            return load_embeddings(_resolve(self.cfg, ds["path"]))
        path = self.lsa_path()
        if not path.is_file():
            cmd_lsa(self)
        return load_embeddings(path)

    def generic_table(self, name) -> EmbeddingTable:
        vocab = set(t for doc in self.dataset().documents for t in doc) \
            if self.cfg["dataset"]["path"] else None
        lower = self.cfg["generic_lowercase"]
        keep = _LowerKeep(vocab) if (vocab is not None and lower) else vocab
        table = load_embeddings(_resolve(self.cfg, self.cfg["generic"][name]), keep=keep)
        return table.lowercased() if lower else table

    def eval_options(self):
        e = self.cfg["eval"]
        return {k: e[k] for k in ("weighting", "oov_policy", "l2_lambda", "tol", "max_iter",
                                  "threshold", "standardize")}


class _LowerKeep:
    def __init__(self, vocab):
        self.vocab = vocab

    def __contains__(self, token):
        return token.lower() in self.vocab


def cmd_lsa(ctx: _Context):
    """Train LSA vectors on the dataset texts; writes the table and a stats sidecar."""
    cfg = ctx.cfg
    path = cfg["dataset"]["path"]
    if path is None:
        raise ConfigError("dataset.path is required for lsa")
    corpus = read_corpus(_resolve(cfg, path))
    lsa = LSAEmbedder(int(cfg["lsa"]["k"]), cfg["lsa"]["weighting"],
                      float(cfg["lsa"]["scaling_power"])).fit(corpus)
    table = lsa.table_
    out = ctx.lsa_path()
    save_embeddings(table, out)
    ctx.write_json(Path(f"{out}.stats.json"), {
        "n_documents": len(corpus),
        "n_dropped_documents": len(corpus.dropped),
        "vocab_size": len(table),
        "dim": table.dim,
        "weighting": cfg["lsa"]["weighting"],
        "scaling_power": cfg["lsa"]["scaling_power"],
        "singular_values": [float(v) for v in lsa.singular_values_],
    })
    logger.info("wrote %s (%d tokens, dim %d)", out, len(table), table.dim)
    return out


def da_name(method, gen_name, ds_name):
    return f"{method}-{gen_name}-{ds_name}"


def cmd_adapt(ctx: _Context):
    """Build one domain-adapted table per (method, generic source)."""
    cfg = ctx.cfg
    methods = [m for m in cfg["methods"] if m in METHODS]
    if not methods:
        logger.info("no adaptation method configured")
        return []
    if not cfg["generic"]:
        raise ConfigError("generic embeddings are required for adapt")
    ds = ctx.ds_table()
    dataset = ctx.dataset() if cfg["dataset"]["path"] else None
    a = cfg["adapt"]
    written = []
    for gen_name in sorted(cfg["generic"]):
        gen = ctx.generic_table(gen_name)
        for method in methods:
            acfg = AdaptConfig(
                method=method,
                d_grid=tuple(a["d_grid"]) if a["d_grid"] is not None else None,
                sigma_rules=tuple(a["sigma_rules"]),
                ridge=float(a["ridge"]), kappa=float(a["kappa"]),
                shared_sigma=bool(a["shared_sigma"]), sample_cap=int(a["sample_cap"]),
                cv_folds=int(cfg["eval"]["folds"]), seed=ctx.seed,
                select_metric=a["select_metric"], eval_options=ctx.eval_options(),
            )
            name = da_name(method, gen_name, cfg["ds"]["name"])
            table, report = adapt(ds, gen, acfg, dataset)
            path = ctx.out / f"{name}.txt"
            ctx.write_table(table, path, method=method, generic=gen_name,
                            ds=cfg["ds"]["name"], d=report.best.d,
                            sigma_rule=report.best.sigma_rule or None)
            (ctx.out / f"{name}.selection.tsv").write_text(
                report.to_tsv(ctx.header()), encoding="utf-8")
            logger.info("wrote %s (d=%d)", path, report.best.d)
            written.append(path)
    return written


def _eval_sources(ctx: _Context):
    cfg = ctx.cfg
    sources = []
    for gen_name in sorted(cfg["generic"]):
        for method in METHODS:
            if method in cfg["methods"]:
                name = da_name(method, gen_name, cfg["ds"]["name"])
                path = ctx.out / f"{name}.txt"
                if not path.is_file():
                    raise ConfigError(f"{path} not found; run 'adapt' first")
                sources.append((name, lambda p=path: load_embeddings(p)))
    if "generic-only" in cfg["methods"]:
        for gen_name in sorted(cfg["generic"]):
            sources.append((gen_name, lambda g=gen_name: ctx.generic_table(g)))
    if "ds-only" in cfg["methods"]:
        sources.append((cfg["ds"]["name"], ctx.ds_table))
    for name in sorted(cfg["embeddings"]):
        sources.append((name, lambda n=name: load_embeddings(_resolve(cfg, cfg["embeddings"][n]))))
    return sources


def format_table(rows, title):
    """Percent-scaled ``mean ± std`` rows in the style of a results table."""
    width = max([len("Embedding")] + [len(name) for name, _ in rows])
    lines = [title, f"{'Embedding':<{width}}  {'Avg Precision':>14}  {'Avg F-score':>14}  {'Avg AUC':>14}"]
    for name, rep in rows:
        cells = [f"{100 * rep.mean[m]:6.2f} ± {100 * rep.std[m]:4.1f}"
                 for m in ("precision", "f_score", "auc")]
        lines.append(f"{name:<{width}}  " + "  ".join(f"{c:>14}" for c in cells))
    return "\n".join(lines) + "\n"


def cmd_eval(ctx: _Context):
    """Cross-validate every configured embedding source on one shared split."""
    cfg = ctx.cfg
    dataset = ctx.dataset()
    folds = stratified_folds(dataset.labels, int(cfg["eval"]["folds"]), ctx.seed)
    rows = []
    for name, loader in _eval_sources(ctx):
        try:
            table = loader()
            rep = cross_validate(dataset, table, int(cfg["eval"]["folds"]), ctx.seed,
                                 fold_ids=folds, name=name, **ctx.eval_options())
        except DaembedError as exc:
            raise type(exc)(f"{name}: {exc}") from exc
        rows.append((name, rep))
    ds_name = ctx.dataset_name
    tsv = [f"# {h}" for h in ctx.header()]
    tsv.append("embedding\tmetric\tmean\tstd\tfolds")
    for name, rep in rows:
        for j, m in enumerate(("precision", "f_score", "auc")):
            folds_txt = ",".join(repr(float(v)) for v in rep.fold_metrics[:, j])
            tsv.append(f"{name}\t{m}\t{rep.mean[m]!r}\t{rep.std[m]!r}\t{folds_txt}")
    (ctx.out / f"eval-{ds_name}.tsv").write_text("\n".join(tsv) + "\n", encoding="utf-8")
    title = f"{ds_name} ({cfg['eval']['folds']}-fold CV, config_hash={ctx.hash} seed={ctx.seed})"
    text = format_table(rows, title)
    (ctx.out / f"eval-{ds_name}.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return rows


def cmd_pipeline(ctx: _Context):
    if ctx.cfg["ds"]["source"] == "lsa":
        cmd_lsa(ctx)
    cmd_adapt(ctx)
    return cmd_eval(ctx)


COMMANDS = {"lsa": cmd_lsa, "adapt": cmd_adapt, "eval": cmd_eval, "pipeline": cmd_pipeline}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="daembed",
        description="Domain-adapted word embeddings via CCA / kernel CCA.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--out", help="override output directory")
        p.add_argument("--dataset", help="override dataset.path")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    threads = os.environ.get(THREADS_ENV)
    try:
        out = str(Path(args.out).resolve()) if args.out else None
        cfg = load_config(args.config, {"seed": args.seed, "out": out})
        if args.dataset:
            cfg["dataset"]["path"] = str(Path(args.dataset).resolve())
            validate_config(cfg)
        ctx = _Context(cfg)
        try:
            limit = int(threads) if threads else None
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {threads!r}") from None
        with threadpool_limits(limits=limit):
            COMMANDS[args.command](ctx)
    except DaembedError as exc:
        print(f"daembed: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"daembed: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"daembed: error: {exc}", file=sys.stderr)
        return 4
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
