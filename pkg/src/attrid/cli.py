"""Command-line entry points.

Every option may also come from a flat TOML config (``--config``); flags
override config values, which override built-in defaults. Relative paths in
a config file resolve against the config file's directory.
"""

import argparse
import logging
import os
import sys

from attrid import baselines, evaluation, ltr
from attrid.baselines import BaselineParams, InvertedIndex, build_index, rank_attributes_baseline
from attrid.embedding import load_vectors
from attrid.errors import AttrIdError
from attrid.evaluation import RunList, compute_metrics, format_run, paired_t_test
from attrid.kb import load_kb
from attrid.lexsim import load_taxonomy
from attrid.linker import DictionaryLinker, load_annotations, load_queries, load_stoplist
from attrid.mrf import MrfParams, rank_attributes_mrf

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("attrid")

PATH_KEYS = ("kb", "vectors", "taxonomy", "annotations", "queries", "qrels", "stoplist", "index", "model", "features", "categories")
DEFAULTS = {
    "k": 5, "depth": 100, "seed": 0,
    "k1": 1.2, "b": 0.8, "mu": 2000.0, "w_title": 0.2, "w_content": 0.8,
    "lambda1": 0.6, "lambda2": 0.2, "lambda3": 0.2, "mu1": 0.5, "mu2": 0.5, "epsilon": 1e-9,
    "folds": 5, "restarts": 3,
}


class UsageError(Exception):
    pass


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("inputs")
    g.add_argument("--config", metavar="PATH", help="TOML file with option defaults")
    g.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    g.add_argument("--kb", metavar="PATH", help="knowledge base TSV")
    g.add_argument("--vectors", metavar="PATH", help="word vectors (text, optionally .gz)")
    g.add_argument("--taxonomy", metavar="PATH", help="taxonomy TSV for path similarity")
    g.add_argument("--annotations", metavar="PATH", help="query annotation TSV")
    g.add_argument("--queries", metavar="PATH", help="qid<TAB>text; linked by exact dictionary match")
    g.add_argument("--qrels", metavar="PATH")
    g.add_argument("--stoplist", metavar="PATH")
    g.add_argument("--index", metavar="PATH", help="index snapshot written by 'index'")
    o = p.add_argument_group("parameters")
    o.add_argument("--seed", type=int)
    o.add_argument("--k", type=int, help="metric cutoff (default 5)")
    o.add_argument("--depth", type=int, help="ranked attributes written per query (default 100)")
    o.add_argument("--k1", type=float)
    o.add_argument("--b", type=float)
    o.add_argument("--mu", type=float, help="Dirichlet prior for LM and MLM")
    o.add_argument("--w-title", dest="w_title", type=float)
    o.add_argument("--w-content", dest="w_content", type=float)
    for n in (1, 2, 3):
        o.add_argument(f"--lambda{n}", type=float)
    o.add_argument("--mu1", type=float)
    o.add_argument("--mu2", type=float)
    o.add_argument("--epsilon", type=float)
    o.add_argument("--restarts", type=int)
    o.add_argument("--folds", type=int)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="attrid", description="Rank knowledge-base attributes for entity-bearing queries.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("index", parents=[common], help="build and persist the baseline index")

    p = sub.add_parser("rank", parents=[common], help="rank attributes with mrf or a lexical baseline")
    p.add_argument("--method", required=True, help="bm25, lm, mlm or mrf")
    p.add_argument("--sweep", action="store_true", help="mrf only: grid-search lambda/mu against --qrels")

    p = sub.add_parser("train", parents=[common], help="cross-validate and train the coordinate-ascent model")
    p.add_argument("--features", metavar="PATH", help="precomputed feature dump instead of KB resources")
    p.add_argument("--dump-features", metavar="PATH")
    p.add_argument("--run-out", metavar="PATH", help="pooled cross-validation run")
    p.add_argument("--ablation", action="store_true", help="also report single-feature rankers")

    p = sub.add_parser("rank-ltr", parents=[common], help="rank attributes with a trained model")
    p.add_argument("--model", required=True, metavar="PATH")
    p.add_argument("--features", metavar="PATH")

    p = sub.add_parser("evaluate", parents=[common], help="metrics table with significance markers")
    p.add_argument("runs", nargs="+", metavar="RUN")
    p.add_argument("--baseline", help="run tag or path significance is tested against (default: first run)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--matrix", action="store_true", help="also print pairwise NDCG t-test p-values")
    p.add_argument("--categories", metavar="PATH", help="qid<TAB>category for per-category means")

    p = sub.add_parser("pool", parents=[common], help="candidate attribute pool from relevant entities")
    p.add_argument("--relevant", required=True, metavar="PATH")

    p = sub.add_parser("kappa", parents=[common], help="Fleiss' kappa of annotator labels")
    p.add_argument("labels", metavar="LABELS")
    return parser


def _load_config(path):
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    out = {}
    for key, val in cfg.items():
        key = key.replace("-", "_")
        if isinstance(val, dict):
            raise UsageError(f"config {path}: nested table [{key}] not supported")
        if key in PATH_KEYS and isinstance(val, str) and not os.path.isabs(val):
            val = os.path.join(base, val)
        out[key] = val
    return out


def resolve(args):
    """Merge defaults < config < flags into ``args`` in place."""
    cfg = _load_config(args.config) if args.config else {}
    for key, val in cfg.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    for key, val in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    for key in PATH_KEYS:
        if not hasattr(args, key):
            setattr(args, key, None)
    if args.k <= 0 or args.depth <= 0:
        raise UsageError("--k and --depth must be positive")
    return args


def _require(args, *names):
    missing = [n for n in names if not getattr(args, n, None)]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _mrf_params(args):
    return MrfParams(args.lambda1, args.lambda2, args.lambda3, args.mu1, args.mu2, args.epsilon)


def _baseline_params(args):
    return BaselineParams(args.k1, args.b, args.mu, args.w_title, args.w_content)


def _stopwords(args):
    return load_stoplist(args.stoplist) if args.stoplist else None


def _annotations(args, kb):
    if args.annotations and args.queries:
        raise UsageError("--annotations and --queries are mutually exclusive")
    if args.annotations:
        return load_annotations(args.annotations)
    if args.queries:
        linker = DictionaryLinker(kb)
        return [linker.link(text, qid) for qid, text in load_queries(args.queries)]
    raise UsageError("one of --annotations or --queries is required")


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_index(args):
    _require(args, "kb", "out")
    index = build_index(load_kb(args.kb))
    index.save(args.out)
    logger.info("indexed %d documents into %s", index.num_docs, args.out)


def _mrf_run(kb, store, anns, params, depth, stopwords):
    run = RunList("mrf")
    for ann in sorted(anns, key=lambda a: a.query_id):
        ranked = rank_attributes_mrf(kb, store, ann, params, depth, stopwords)
        run.add(ann.query_id, [(c.attribute, c.score) for c in ranked])
    return run


def sweep_grid():
    """lambda simplex in steps of 0.1 crossed with mu1, mu2 in steps of 0.25."""
    mus = [i / 4 for i in range(5)]
    for i in range(11):
        for j in range(11 - i):
            l1, l2 = i / 10, j / 10
            l3 = round(1.0 - l1 - l2, 10)
            for m1 in mus:
                for m2 in mus:
                    yield l1, l2, l3, m1, m2


def cmd_rank(args):
    method = args.method
    if method not in baselines.METHODS + ("mrf",):
        raise UsageError(f"unknown method {method!r}; choose bm25, lm, mlm or mrf")
    if args.sweep and method != "mrf":
        raise UsageError("--sweep only applies to --method mrf")
    _require(args, "kb")
    kb = load_kb(args.kb)
    anns = _annotations(args, kb)
    stop = _stopwords(args)
    if method == "mrf":
        _require(args, "vectors")
        store = load_vectors(args.vectors)
        if args.sweep:
            _require(args, "qrels")
            return _sweep(args, kb, store, anns, stop)
        run = _mrf_run(kb, store, anns, _mrf_params(args), args.depth, stop)
    else:
        index = InvertedIndex.load(args.index) if args.index else build_index(kb)
        params = _baseline_params(args)
        run = RunList(method)
        for ann in sorted(anns, key=lambda a: a.query_id):
            run.add(ann.query_id, rank_attributes_baseline(index, kb, ann, method, params, args.depth, stop))
    _emit(args, format_run(run))


def _sweep(args, kb, store, anns, stop):
    qrels = evaluation.load_qrels(args.qrels)
    judged = [a for a in anns if a.query_id in qrels]
    rows, best = [], None
    for l1, l2, l3, m1, m2 in sweep_grid():
        params = MrfParams(l1, l2, l3, m1, m2, args.epsilon)
        run = _mrf_run(kb, store, judged, params, args.depth, stop)
        ndcg = compute_metrics(run, qrels, args.k).mean("ndcg")
        rows.append((ndcg, params))
        if best is None or ndcg > best[0] + 1e-12:
            best = (ndcg, params)
    sys.stdout.write(f"lambda1\tlambda2\tlambda3\tmu1\tmu2\tNDCG@{args.k}\n")
    for ndcg, p in rows:
        sys.stdout.write(f"{p.lambda1:.1f}\t{p.lambda2:.1f}\t{p.lambda3:.1f}\t{p.mu1:.2f}\t{p.mu2:.2f}\t{ndcg:.4f}\n")
    ndcg, p = best
    print(f"best: lambda=({p.lambda1:.1f}, {p.lambda2:.1f}, {p.lambda3:.1f}) mu=({p.mu1:.2f}, {p.mu2:.2f}) "
          f"NDCG@{args.k}={ndcg:.4f}", file=sys.stderr)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_run(_mrf_run(kb, store, anns, p, args.depth, stop)))


def _instances(args, with_qrels):
    if args.features:
        if args.annotations or args.queries:
            raise UsageError("--features cannot be combined with --annotations/--queries")
        return ltr.load_feature_dump(args.features)
    _require(args, "kb", "vectors")
    kb = load_kb(args.kb)
    store = load_vectors(args.vectors)
    tax = load_taxonomy(args.taxonomy) if args.taxonomy else None
    if tax is None:
        logger.warning("no --taxonomy given; taxonomy features f4/f6 are 0")
    anns = _annotations(args, kb)
    qrels = evaluation.load_qrels(args.qrels) if with_qrels else None
    return ltr.build_instances(kb, store, tax, anns, qrels, _mrf_params(args), _stopwords(args))


def cmd_train(args):
    _require(args, "out")
    if not args.features:
        _require(args, "qrels")
    instances = _instances(args, with_qrels=not args.features)
    if args.dump_features:
        with open(args.dump_features, "w", encoding="utf-8", newline="\n") as fh:
            ltr.write_feature_dump(instances, fh)
    qrels = evaluation.load_qrels(args.qrels) if args.qrels else None
    cv = ltr.cross_validate(instances, args.folds, args.restarts, args.seed, args.k, qrels=qrels, cutoff=args.depth)
    model = ltr.ca_train(ltr.RankingData(instances, args.k), args.restarts, args.seed)
    model.metadata.update(folds=args.folds, cv_ndcg=f"{cv.ndcg!r}")
    model.save(args.out)
    if args.run_out:
        evaluation.write_run(cv.run, args.run_out)
    out = [f"fold\tqueries\tNDCG@{args.k}\tP@{args.k}\tMRR\tMAP\n"]
    for f, m in enumerate(cv.fold_metrics):
        n = sum(1 for v in cv.fold_of.values() if v == f)
        out.append(f"{f}\t{n}\t{m['ndcg']:.4f}\t{m['p']:.4f}\t{m['mrr']:.4f}\t{m['map']:.4f}\n")
    means = cv.evaluation.means()
    out.append(f"all\t{len(cv.fold_of)}\t{means['ndcg']:.4f}\t{means['p']:.4f}\t{means['mrr']:.4f}\t{means['map']:.4f}\n")
    if args.ablation:
        out.append(f"\nfeature\tNDCG@{args.k}\tdelta%\n")
        for row in ltr.feature_ablation(instances, args.folds, args.restarts, args.seed, args.k, qrels):
            out.append(f"{row.features}\t{row.ndcg:.4f}\t{row.delta_pct:.2f}%\n")
    sys.stdout.write("".join(out))


def cmd_rank_ltr(args):
    model = ltr.LinearModel.load(args.model)
    instances = _instances(args, with_qrels=False)
    _emit(args, format_run(ltr.rank_queries(model, instances, "ltr", args.depth)))


def _significance_table(runs, evals, ref, alpha, k):
    header = f"{'run':<16}" + "".join(f"{h:>10}" for h in (f"NDCG@{k}", f"P@{k}", "MRR", "MAP"))
    lines = [header]
    qids = sorted(evals[ref].per_query)
    for name in runs:
        cells = []
        for metric in evaluation.METRICS:
            mark = " "
            if name != ref:
                res = paired_t_test(evals[name].series(metric, qids), evals[ref].series(metric, qids), alpha)
                if res.significant and res.t > 0:
                    mark = "*"
            cells.append(f"{evals[name].mean(metric):>9.4f}{mark}")
        lines.append(f"{name:<16}" + "".join(cells))
    lines.append(f"* significant improvement over {ref} (two-tailed paired t-test, alpha={alpha})")
    return lines


def cmd_evaluate(args):
    _require(args, "qrels")
    qrels = evaluation.load_qrels(args.qrels)
    runs, evals = [], {}
    for path in args.runs:
        run = evaluation.load_run(path)
        name = run.tag if run.tag not in evals else path
        runs.append(name)
        evals[name] = compute_metrics(run, qrels, args.k)
    ref = runs[0]
    if args.baseline:
        matches = [n for n, p in zip(runs, args.runs) if args.baseline in (n, p)]
        if not matches:
            raise UsageError(f"--baseline {args.baseline!r} matches no run")
        ref = matches[0]
    lines = _significance_table(runs, evals, ref, args.alpha, args.k)
    if args.matrix and len(runs) > 1:
        qids = sorted(qrels)
        lines += ["", f"paired t-test p-values, NDCG@{args.k}", f"{'':<16}" + "".join(f"{n:>16}" for n in runs)]
        for a in runs:
            cells = []
            for b in runs:
                if a == b:
                    cells.append(f"{'-':>16}")
                else:
                    res = paired_t_test(evals[a].series("ndcg", qids), evals[b].series("ndcg", qids), args.alpha)
                    cells.append(f"{res.p:>15.4g}{'*' if res.significant else ' '}")
            lines.append(f"{a:<16}" + "".join(cells))
    if args.categories:
        cats = evaluation.load_categories(args.categories)
        names = sorted(set(cats.values()))
        lines += ["", f"{'category':<16}{'queries':>8}" + "".join(f"{n:>16}" for n in runs)]
        for c in names:
            qids = [q for q in sorted(qrels) if cats.get(q) == c]
            if not qids:
                continue
            cells = "".join(f"{sum(evals[n].series('ndcg', qids)) / len(qids):>16.4f}" for n in runs)
            lines.append(f"{c:<16}{len(qids):>8}" + cells)
    _emit(args, "\n".join(lines) + "\n")


def cmd_pool(args):
    _require(args, "kb")
    kb = load_kb(args.kb)
    anns = _annotations(args, kb)
    pools = evaluation.build_candidate_pool(kb, anns, evaluation.load_relevant_entities(args.relevant))
    _emit(args, "".join(f"{q}\t{a}\n" for q in sorted(pools) for a in sorted(pools[q])))


def cmd_kappa(args):
    counts, _ = evaluation.labels_to_counts(evaluation.load_labels(args.labels))
    _emit(args, f"{evaluation.fleiss_kappa(counts):.6f}\n")


COMMANDS = {
    "index": cmd_index, "rank": cmd_rank, "train": cmd_train, "rank-ltr": cmd_rank_ltr,
    "evaluate": cmd_evaluate, "pool": cmd_pool, "kappa": cmd_kappa,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        resolve(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (AttrIdError, OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        print(f"attrid: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
