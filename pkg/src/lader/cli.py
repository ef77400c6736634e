"""Command-line pipeline: ingest, build-index, run, eval, sweep, analyze, search.

Every command is deterministic given its inputs, flags, and seed. A manifest
JSON (config snapshot, input digests, tool version, timestamps) is written
next to each command's primary output; the data artifacts themselves carry no
timestamps so repeated runs are byte-identical.

Exit codes: 0 success, 2 usage, 3 data validation, 4 I/O. The LADER_THREADS
environment variable caps internal parallelism (default 1).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, corpus, evaluation, fusion, lexical
from .embed import (EmbeddingMatrix, HashingEmbedder, load_embeddings,
                    save_embeddings)
from .errors import FormatError, ParseError, ValidationError
from .evaluation import RunFile
from .index import FlatIndex, load_index, save_index

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4

_PATH_KEYS = {
    "docs", "queries", "clicklog", "triples", "qrels", "run", "run_full", "run_dr",
    "query_embeddings", "doc_embeddings", "qindex", "dindex",
    "out", "outdir", "features_out", "coeffs_out",
}


@dataclass
class RunManifest:
    command: str
    version: str
    parameters: dict
    inputs: dict
    outputs: list[str]
    created_utc: str

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(args: argparse.Namespace, outputs: list[Path], anchor: Path) -> None:
    params = {k: str(v) for k, v in vars(args).items()
              if k not in ("func", "config") and v is not None}
    inputs = {}
    for key in sorted(_PATH_KEYS):
        value = getattr(args, key, None)
        if value and key not in ("out", "outdir", "features_out", "coeffs_out"):
            p = Path(value)
            if p.is_file():
                inputs[key] = {"path": str(p), "sha256": _sha256(p)}
    manifest = RunManifest(
        command=args.command,
        version=__version__,
        parameters=params,
        inputs=inputs,
        outputs=[str(p) for p in outputs],
        created_utc=datetime.now(timezone.utc).isoformat(),
    )
    target = anchor / "manifest.json" if anchor.is_dir() else anchor.with_suffix(
        anchor.suffix + ".manifest.json")
    manifest.write(target)


def load_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; paths are resolved relative to its directory."""
    base = Path(path).parent
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", path, lineno)
            key, _, value = line.partition("=")
            key, value = key.strip().replace("-", "_"), value.strip()
            if key in _PATH_KEYS and value and not Path(value).is_absolute():
                value = str(base / value)
            values[key] = value
    return values


def _inject_config(argv: list[str]) -> list[str]:
    """Turn config entries into flags placed before explicit flags (which win)."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    cfg_path = argv[at + 1]
    values = load_config(cfg_path)
    explicit = {a for a in argv if a.startswith("--")}
    extra: list[str] = []
    for key, value in values.items():
        flag = "--" + key.replace("_", "-")
        if flag in explicit:
            continue
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                extra.append(flag)
        else:
            extra.extend([flag, value])
    head, tail = argv[:1], argv[1:]
    return head + extra + tail


def _threads() -> int:
    return max(1, int(os.environ.get("LADER_THREADS", "1")))


def _groups_from_queries(queries: list[corpus.Query]) -> dict[str, str]:
    return {q.id: corpus.group_of(q.frequency) for q in queries}


def _lambda_of(args, groups: dict[str, str]):
    if args.lam is not None:
        value = args.lam
        return lambda qid: value
    by_group = {"HEAD": args.lambda_head, "TORSO": args.lambda_torso,
                "TAIL": args.lambda_tail}
    return lambda qid: by_group[groups.get(qid, "TAIL")]


def _load_eval_queries(args) -> tuple[list[corpus.Query], EmbeddingMatrix]:
    queries = corpus.load_queries(args.queries)
    if args.query_embeddings:
        store = load_embeddings(args.query_embeddings)
        missing = [q.id for q in queries if q.id not in store]
        if missing:
            raise ValidationError(
                f"{args.query_embeddings}: no embedding for query ids {missing[:5]}"
                + ("..." if len(missing) > 5 else "")
            )
        data = np.stack([store.row(q.id) for q in queries])
        matrix = EmbeddingMatrix(ids=[q.id for q in queries], data=data, dim=store.dim)
    elif args.hash_dim:
        embedder = HashingEmbedder(dim=args.hash_dim, seed=args.hash_seed)
        data = np.stack([embedder.embed(q.text) for q in queries])
        matrix = EmbeddingMatrix(ids=[q.id for q in queries], data=data, dim=args.hash_dim)
    else:
        raise ValidationError("provide --query-embeddings or --hash-dim for the queries")
    return queries, matrix


def cmd_ingest(args) -> int:
    docs = corpus.load_documents(args.docs) if args.docs else []
    log = corpus.load_click_log(args.clicklog)
    queries = corpus.load_queries(args.queries, log=log) if args.queries else []
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    raw_path, dctr_path = outdir / "qrels.raw.txt", outdir / "qrels.dctr.txt"
    evaluation.write_qrels(evaluation.build_raw_qrels(log), raw_path)
    evaluation.write_qrels(evaluation.build_dctr_qrels(log), dctr_path)
    groups_path = outdir / "groups.tsv"
    with open(groups_path, "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            fh.write(f"{q.id}\t{q.frequency}\t{corpus.group_of(q.frequency)}\n")
    print(f"documents={len(docs)} queries={len(queries)} "
          f"click_records={len(log.records)} log_queries={len(log.query_ids())}")
    write_manifest(args, [raw_path, dctr_path, groups_path], outdir)
    return EXIT_OK


def _matrix_from_args(emb_path, jsonl_path, text_of, args) -> EmbeddingMatrix:
    if emb_path:
        return load_embeddings(emb_path)
    if not jsonl_path or not args.hash_dim:
        raise ValidationError("provide an embeddings file, or a corpus file with --hash-dim")
    embedder = HashingEmbedder(dim=args.hash_dim, seed=args.hash_seed)
    ids, rows = [], []
    for item in text_of(jsonl_path):
        ids.append(item[0])
        rows.append(embedder.embed(item[1]))
    return EmbeddingMatrix(ids=ids, data=np.stack(rows), dim=args.hash_dim)


def cmd_build_index(args) -> int:
    q_matrix = _matrix_from_args(
        args.query_embeddings, args.queries,
        lambda p: [(q.id, q.text) for q in corpus.load_queries(p)], args)
    d_matrix = _matrix_from_args(
        args.doc_embeddings, args.docs,
        lambda p: [(d.id, d.text) for d in corpus.load_documents(p)], args)
    if q_matrix.dim != d_matrix.dim:
        raise ValidationError(
            f"query dim {q_matrix.dim} does not match document dim {d_matrix.dim}")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    q_path, d_path = outdir / "queries.lidx", outdir / "docs.lidx"
    save_index(FlatIndex(matrix=q_matrix), q_path)
    save_index(FlatIndex(matrix=d_matrix), d_path)
    print(f"N_q={len(q_matrix)} N_d={len(d_matrix)} dim={q_matrix.dim}")
    write_manifest(args, [q_path, d_path], outdir)
    return EXIT_OK


def _labm25_traces(queries, eval_matrix, q_index, inverted, log, cfg, k_out,
                   lambda_of) -> list[fusion.LaderTrace]:
    known = set(inverted.doc_ids)
    text_of = {q.id: q.text for q in queries}
    traces = []
    for i, qid in enumerate(eval_matrix.ids):
        sim_q = fusion.retrieve_similar_queries(eval_matrix.data[i], q_index, cfg,
                                                query_id=qid)
        sim_d = lexical.bm25_search(inverted, text_of[qid], cfg.n)
        local = replace(cfg, lam=lambda_of(qid))
        trace = fusion.fuse(qid, sim_q, sim_d, log.rel, local, known_docs=known)
        traces.append(replace(trace, final=trace.final.top(k_out)))
    return traces


def cmd_run(args) -> int:
    log = corpus.load_click_log(args.clicklog)
    queries, eval_matrix = _load_eval_queries(args)
    groups = _groups_from_queries(queries)
    lambda_of = _lambda_of(args, groups)
    mode = {"full": fusion.FULL, "dr-only": fusion.DR_ONLY,
            "la-only": fusion.LA_ONLY, "la-bm25": fusion.FULL}[args.mode]
    cfg = fusion.FusionConfig(m=args.m, n=args.n, mode=mode,
                              exclude_self=not args.no_exclude_self)
    q_index = load_index(args.qindex)

    if args.mode == "la-bm25":
        if not args.docs:
            raise ValidationError("--docs is required for mode la-bm25")
        inverted = lexical.build_lexical(corpus.load_documents(args.docs))
        traces = _labm25_traces(queries, eval_matrix, q_index, inverted, log,
                                cfg, args.k_out, lambda_of)
    else:
        d_index = load_index(args.dindex)
        traces = fusion.run_queries(eval_matrix, q_index, d_index, log.rel, cfg,
                                    args.k_out, lambda_of=lambda_of,
                                    threads=_threads())

    out = Path(args.out)
    fusion.write_run(traces, out, tag=args.tag)
    if all(not t.final for t in traces):
        print("warning: run file is empty (no scored candidates)", file=sys.stderr)
    write_manifest(args, [out], out)
    return EXIT_OK


def cmd_eval(args) -> int:
    run = evaluation.read_run(args.run)
    qrels = evaluation.read_qrels(args.qrels)
    groups = None
    if args.queries:
        groups = _groups_from_queries(corpus.load_queries(args.queries))
    table = evaluation.evaluate(run, qrels, groups)
    if not set(run) & set(qrels.judgments):
        raise ValidationError(
            f"no overlap between run queries ({len(run)}) and judged queries "
            f"({len(qrels.judgments)})")
    out = Path(args.out)
    table.write_csv(out)
    if table.unjudged:
        print(f"warning: {len(table.unjudged)} run queries have no judgments "
              f"and were skipped", file=sys.stderr)
    write_manifest(args, [out], out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    log = corpus.load_click_log(args.clicklog)
    queries, eval_matrix = _load_eval_queries(args)
    groups = _groups_from_queries(queries)
    lambda_of = _lambda_of(args, groups)
    qrels = evaluation.read_qrels(args.qrels)
    q_index = load_index(args.qindex)
    d_index = load_index(args.dindex)
    proportions = [float(p) for p in args.proportions.split(",") if p != ""]
    cfg = fusion.FusionConfig(m=args.m, n=args.n, mode=fusion.FULL,
                              exclude_self=not args.no_exclude_self)
    rows = analysis.sweep(proportions, args.sweep_seed,
                          eval_queries=eval_matrix, train_queries=q_index.matrix,
                          d_index=d_index, log=log, qrels=qrels, groups=groups,
                          cfg=cfg, k_out=args.k_out, lambda_of=lambda_of,
                          threads=_threads())
    out = Path(args.out)
    analysis.write_sweep_csv(rows, out)
    write_manifest(args, [out], out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    log = corpus.load_click_log(args.clicklog)
    queries, eval_matrix = _load_eval_queries(args)
    groups = _groups_from_queries(queries)
    lambda_of = _lambda_of(args, groups)
    qrels = evaluation.read_qrels(args.qrels)
    q_index = load_index(args.qindex)
    d_index = load_index(args.dindex)
    base = fusion.FusionConfig(m=args.m, n=args.n, mode=fusion.FULL,
                               exclude_self=not args.no_exclude_self)
    full = fusion.run_queries(eval_matrix, q_index, d_index, log.rel, base,
                              args.k_out, lambda_of=lambda_of, threads=_threads())
    dr = fusion.run_queries(eval_matrix, q_index, d_index, log.rel,
                            replace(base, mode=fusion.DR_ONLY), args.k_out,
                            lambda_of=lambda_of, threads=_threads())
    run_full: RunFile = {t.query_id: t.final for t in full}
    run_dr: RunFile = {t.query_id: t.final for t in dr}
    gains = analysis.gain_vector(run_full, run_dr, qrels)

    by_id = {q.id: q for q in queries}
    raw, qids = analysis.feature_matrix(full, by_id, log.rel)
    y = np.array([gains[qid] for qid in qids])

    features_out = Path(args.features_out)
    with open(features_out, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["query_id", *analysis.FEATURE_NAMES, "gain"])
        for qid, row, gain in zip(qids, raw, y):
            writer.writerow([qid, *[f"{v:.6f}" for v in row], f"{gain:.6f}"])

    result = analysis.fit_linear_regression(
        analysis.minmax_normalize(raw), y, names=analysis.FEATURE_NAMES)
    coeffs_out = Path(args.coeffs_out)
    with open(coeffs_out, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["term", "value"])
        for name in analysis.FEATURE_NAMES:
            writer.writerow([name, f"{result.coefficients[name]:.6f}"])
        writer.writerow(["intercept", f"{result.intercept:.6f}"])
    print(f"r_squared={result.r_squared:.6f} rank_deficient={result.rank_deficient}")
    write_manifest(args, [features_out, coeffs_out], features_out)
    return EXIT_OK


def cmd_search(args) -> int:
    log = corpus.load_click_log(args.clicklog)
    q_index = load_index(args.qindex)
    d_index = load_index(args.dindex)
    if args.text:
        if not args.hash_dim:
            raise ValidationError("--text needs --hash-dim to embed the query")
        vec = HashingEmbedder(dim=args.hash_dim, seed=args.hash_seed).embed(args.text)
        label, query_id = args.text, ""
    elif args.query_id:
        store = load_embeddings(args.query_embeddings) if args.query_embeddings \
            else q_index.matrix
        if args.query_id not in store:
            raise ValidationError(f"no embedding stored for query id {args.query_id!r}")
        vec = store.row(args.query_id)
        label, query_id = args.query_id, args.query_id
    else:
        raise ValidationError("provide --text or --query-id")
    lam = args.lam if args.lam is not None else args.lambda_tail
    cfg = fusion.FusionConfig(m=args.m, n=args.n, lam=lam, mode=fusion.FULL,
                              exclude_self=not args.no_exclude_self)
    trace = fusion.lader_score(vec, q_index, d_index, log.rel, cfg, query_id=query_id)
    print(f"query: {label}")
    print(f"lambda={cfg.lam} m={cfg.m} n={cfg.n}")
    print(f"top {min(args.k, len(trace.final))} documents:")
    for rank, (did, score) in enumerate(trace.final.entries[:args.k], start=1):
        print(f"  {rank:3d}. {did}  {score:.6f}")
    print(f"similar queries ({len(trace.similar_queries)}):")
    for qid, weight in trace.similar_queries.entries[:args.k]:
        clicked = ", ".join(sorted(log.rel.get(qid, ()))[:8]) or "-"
        print(f"  {qid}  weight={weight:.6f}  clicked: {clicked}")
    return EXIT_OK


def _add_lambda_flags(sub) -> None:
    sub.add_argument("--lam", type=float, default=None,
                     help="single lambda for all queries (overrides per-group values)")
    sub.add_argument("--lambda-head", type=float, default=fusion.DEFAULT_LAMBDA["HEAD"])
    sub.add_argument("--lambda-torso", type=float, default=fusion.DEFAULT_LAMBDA["TORSO"])
    sub.add_argument("--lambda-tail", type=float, default=fusion.DEFAULT_LAMBDA["TAIL"])


def _add_retrieval_flags(sub) -> None:
    sub.add_argument("--qindex", required=True, help="query-log index file")
    sub.add_argument("--dindex", help="document index file")
    sub.add_argument("--clicklog", required=True)
    sub.add_argument("--m", type=int, default=1000)
    sub.add_argument("--n", type=int, default=1000)
    sub.add_argument("--k-out", type=int, default=1000)
    sub.add_argument("--no-exclude-self", action="store_true",
                     help="keep the query itself in the similar-query list")


def _add_query_flags(sub) -> None:
    sub.add_argument("--queries", required=True, help="query TSV (id, text, frequency)")
    sub.add_argument("--query-embeddings", help="embedding store for the query ids")
    sub.add_argument("--hash-dim", type=int, default=0,
                     help="embed query text with the hashing embedder instead")
    sub.add_argument("--hash-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lader",
        description="Log-augmented dense retrieval pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="validate corpus files and derive qrels/groups")
    p.add_argument("--config")
    p.add_argument("--docs")
    p.add_argument("--queries")
    p.add_argument("--clicklog", required=True)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("build-index", help="build query-log and document indexes")
    p.add_argument("--config")
    p.add_argument("--query-embeddings")
    p.add_argument("--queries")
    p.add_argument("--doc-embeddings")
    p.add_argument("--docs")
    p.add_argument("--hash-dim", type=int, default=0)
    p.add_argument("--hash-seed", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_build_index)

    p = subs.add_parser("run", help="produce a TREC run file")
    p.add_argument("--config")
    p.add_argument("--mode", choices=["full", "dr-only", "la-only", "la-bm25"],
                   default="full")
    p.add_argument("--docs", help="documents JSONL (required for la-bm25)")
    p.add_argument("--tag", default="lader")
    p.add_argument("--out", required=True)
    _add_query_flags(p)
    _add_retrieval_flags(p)
    _add_lambda_flags(p)
    p.set_defaults(func=cmd_run)

    p = subs.add_parser("eval", help="score a run file against qrels")
    p.add_argument("--config")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--queries", help="query TSV supplying frequency groups")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("sweep", help="evaluate under increasing log proportions")
    p.add_argument("--config")
    p.add_argument("--proportions", default="0,0.25,0.5,0.75,1.0")
    p.add_argument("--sweep-seed", type=int, default=4)
    p.add_argument("--qrels", required=True)
    p.add_argument("--out", required=True)
    _add_query_flags(p)
    _add_retrieval_flags(p)
    _add_lambda_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("analyze", help="regress NDCG@10 gain on query features")
    p.add_argument("--config")
    p.add_argument("--qrels", required=True)
    p.add_argument("--features-out", required=True)
    p.add_argument("--coeffs-out", required=True)
    _add_query_flags(p)
    _add_retrieval_flags(p)
    _add_lambda_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = subs.add_parser("search", help="interactive single-query lookup with trace")
    p.add_argument("--config")
    p.add_argument("--text")
    p.add_argument("--query-id")
    p.add_argument("--query-embeddings")
    p.add_argument("--hash-dim", type=int, default=0)
    p.add_argument("--hash-seed", type=int, default=0)
    p.add_argument("-k", type=int, default=10)
    _add_retrieval_flags(p)
    _add_lambda_flags(p)
    p.set_defaults(func=cmd_search)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _inject_config(argv)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc, ParseError) else EXIT_IO
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()


__all__ = ["main", "entrypoint", "build_parser", "RunManifest", "load_config",
           "cmd_ingest", "cmd_build_index", "cmd_run", "cmd_eval", "cmd_sweep",
           "cmd_analyze", "cmd_search"]
