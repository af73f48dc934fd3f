"""Command-line entry point wiring the pipeline stages together.

Every subcommand validates its inputs, writes its outputs, and drops a
``<output>.manifest.json`` recording the command, the resolved config
snapshot, seeds, sha256 hashes of all input and output files, and wall
timings.  Re-running a command with identical inputs and seeds
reproduces identical output hashes.

Options resolve with precedence: explicit flag > config-file key >
built-in default.  Config files are flat ``key = value`` text; keys use
the same names as the long flags (dashes or underscores).
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .data import (
    FileFormatError,
    read_impressions,
    read_users,
    read_videos,
)
from .evaluation import (
    ABLATION_OPERATORS,
    evaluate_auc,
    rela_impr,
    run_ablation,
    write_ablation_report,
)
from .features import AblationMask, FeatureTables, StatNormalizer, preload_store
from .graph import HeteroGraph
from .linkage import build_graph, default_content_vectors, read_vectors
from .params import Checkpoint, CheckpointVersionError, NetConfig
from .sampling import NeighborStore, sample_all_cold, save_neighbor_store
from .serving import (
    BenchConfig,
    CtrServer,
    ScoringContext,
    bench_with_base_delta,
    make_workload,
)
from .synthetic import SyntheticWorldConfig, generate_world
from .training import TrainConfig, finetune, pretrain, write_metrics
from .validation import ValidationError
from .vocab import Vocabulary

SCHEMA_VERSION = 1


# -- config / manifest plumbing -----------------------------------------


def load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    text = Path(path).read_text()
    parser = configparser.ConfigParser()
    parser.read_string("[run]\n" + text)
    return {k.replace("-", "_"): v for k, v in parser["run"].items()}


def resolve(args, config: dict, key: str, default, cast):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        raw = config[key]
        return cast(raw) if cast is not bool else raw.strip().lower() in ("1", "true", "yes")
    return default


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    anchor: Path,
    command: str,
    config_snapshot: dict,
    seeds: list[int],
    inputs: list[Path],
    outputs: list[Path],
    started: float,
    extra: dict | None = None,
) -> Path:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config_snapshot,
        "seeds": seeds,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "timings": {"seconds": round(time.time() - started, 3)},
    }
    if extra:
        manifest["extra"] = extra
    path = Path(str(anchor) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_build_ts(graph_dir: Path) -> int:
    with (Path(graph_dir) / "nodes.tsv").open() as fh:
        header = fh.readline().rstrip("\n")
        ts_line = fh.readline().rstrip("\n")
    if header != "#schema=nodes.v1" or not ts_line.startswith("#build_ts="):
        raise FileFormatError(f"{graph_dir}/nodes.tsv: bad nodes.v1 header")
    return int(ts_line.split("=", 1)[1])


def _mlp_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x)


def _ablation(names: str | None) -> AblationMask:
    if not names:
        return AblationMask()
    return AblationMask.from_names([n.strip() for n in names.split(",") if n.strip()])


def load_world_tables(
    videos_path: Path,
    users_path: Path,
    graph_dir: Path,
    cfg: NetConfig | None,
    normalizer: StatNormalizer | None,
    net_overrides: dict | None = None,
):
    """Shared artifact loading for the training/eval/serve commands."""
    videos = read_videos(videos_path)
    users = read_users(users_path)
    vocab = Vocabulary.load(Path(graph_dir) / "vocab.tsv")
    for user in users:
        vocab.add("user", user.user_id)
    if cfg is None:
        cfg = NetConfig.from_vocab(vocab, **(net_overrides or {}))
    else:
        for ns, n in (
            ("video", cfg.n_videos),
            ("product", cfg.n_products),
            ("author", cfg.n_authors),
            ("category", cfg.n_categories),
            ("token", cfg.n_tokens),
            ("user", cfg.n_users),
        ):
            if vocab.size(ns) != n:
                raise ValidationError(
                    f"checkpoint expects {n} {ns} rows, vocabulary has {vocab.size(ns)}"
                )
    if normalizer is None:
        normalizer = StatNormalizer.fit(np.array([v.stats.as_tuple() for v in videos]))
    tables = FeatureTables(cfg, vocab, normalizer, videos, users)
    build_ts = read_build_ts(graph_dir)
    return tables, vocab, build_ts


def load_lookup(neighbors_path: Path, vocab: Vocabulary):
    store = NeighborStore(neighbors_path, vocab)
    return preload_store(store)


# -- subcommands ----------------------------------------------------------


def cmd_synth_data(args) -> int:
    started = time.time()
    config = load_config_file(args.config)
    fields = {
        name: resolve(args, config, name, getattr(SyntheticWorldConfig, name), int)
        for name in (
            "n_users",
            "n_authors",
            "n_products",
            "n_categories",
            "n_warm",
            "n_cold",
            "latent_dim",
            "content_dim",
            "impressions_per_user",
            "test_impressions_per_user",
            "seed",
        )
    }
    world_config = SyntheticWorldConfig(**fields)
    world = generate_world(world_config)
    out_dir = Path(args.out)
    paths = world.write(out_dir)
    write_manifest(
        out_dir / "world",
        "synth-data",
        {**fields, "config_file": args.config},
        [world_config.seed],
        [],
        list(paths.values()),
        started,
        extra={
            "impressions_full": len(world.d_full),
            "impressions_cold": len(world.d_cold),
            "impressions_test": len(world.d_test),
        },
    )
    print(
        f"synth-data: {len(world.videos)} videos, {len(world.d_full)} train impressions "
        f"({len(world.d_cold)} cold), {len(world.d_test)} test -> {out_dir}"
    )
    return 0


def cmd_build_graph(args) -> int:
    started = time.time()
    config = load_config_file(args.config)
    semantic_k = resolve(args, config, "semantic_k", 20, int)
    content_dim = resolve(args, config, "content_dim", 64, int)
    videos = read_videos(Path(args.videos))
    if args.vectors:
        vectors = read_vectors(Path(args.vectors))
    else:
        vectors = default_content_vectors(videos, dim=content_dim)
    users = read_users(Path(args.users))
    build_ts = resolve(args, config, "build_ts", max(v.release_ts for v in videos), int)
    graph, report = build_graph(videos, vectors, build_ts=build_ts, semantic_k=semantic_k)
    for user in users:
        graph.vocab.add("user", user.user_id)
    out_dir = Path(args.out)
    graph.save(out_dir)
    coverage = graph.coverage_stats()
    write_manifest(
        out_dir / "graph",
        "build-graph",
        {"semantic_k": semantic_k, "build_ts": build_ts, "config_file": args.config},
        [],
        [Path(p) for p in (args.videos, args.vectors, args.users) if p],
        [out_dir / "nodes.tsv", out_dir / "edges.tsv", out_dir / "vocab.tsv"],
        started,
        extra={
            "cold_count": coverage.cold_count,
            "physical_coverage": coverage.physical_fraction,
            "semantic_coverage": coverage.semantic_fraction,
            "physical_edges": report.edge_count,
            "missing_author": len(report.missing_author),
            "missing_product": len(report.missing_product),
        },
    )
    print(
        f"build-graph: {len(graph.videos)} videos, physical coverage "
        f"{coverage.physical_fraction:.4f}, semantic coverage {coverage.semantic_fraction:.4f}"
    )
    return 0


def cmd_sample_neighbors(args) -> int:
    started = time.time()
    config = load_config_file(args.config)
    cap = resolve(args, config, "cap", 20, int)
    graph = HeteroGraph.load(Path(args.graph))
    graphs = sample_all_cold(graph, cap=cap)
    out = Path(args.out)
    save_neighbor_store(out, graphs, graph.vocab)
    write_manifest(
        out,
        "sample-neighbors",
        {"cap": cap, "config_file": args.config},
        [],
        [Path(args.graph) / "nodes.tsv", Path(args.graph) / "edges.tsv"],
        [out, Path(str(out) + ".idx")],
        started,
        extra={"records": len(graphs)},
    )
    print(f"sample-neighbors: {len(graphs)} cold videos -> {out}")
    return 0


def _train_flags(args, config) -> tuple[TrainConfig, dict]:
    resolved = {
        "learning_rate": resolve(args, config, "learning_rate", 1e-4, float),
        "batch_size": resolve(args, config, "batch_size", 512, int),
        "pretrain_epochs": resolve(args, config, "pretrain_epochs", 2, int),
        "finetune_epochs": resolve(args, config, "finetune_epochs", 2, int),
        "adagrad_eps": resolve(args, config, "adagrad_eps", 1e-8, float),
        "seed": resolve(args, config, "seed", 0, int),
        "ablation": resolve(args, config, "ablation", "", str),
    }
    train_config = TrainConfig(
        learning_rate=resolved["learning_rate"],
        batch_size=resolved["batch_size"],
        pretrain_epochs=resolved["pretrain_epochs"],
        finetune_epochs=resolved["finetune_epochs"],
        adagrad_eps=resolved["adagrad_eps"],
        seed=resolved["seed"],
        ablation=_ablation(resolved["ablation"]),
    )
    return train_config, resolved


def _net_flags(args, config) -> dict:
    return {
        "hidden_dim": resolve(args, config, "hidden_dim", 128, int),
        "mlp_hidden": _mlp_tuple(resolve(args, config, "mlp_hidden", "512,256,128", str)),
        "neighbor_cap": resolve(args, config, "neighbor_cap", 20, int),
        "behavior_cap": resolve(args, config, "behavior_cap", 50, int),
        "title_cap": resolve(args, config, "title_cap", 12, int),
    }


def cmd_pretrain(args) -> int:
    started = time.time()
    config = load_config_file(args.config)
    train_config, train_snapshot = _train_flags(args, config)
    net_overrides = _net_flags(args, config)
    tables, vocab, build_ts = load_world_tables(
        Path(args.videos), Path(args.users), Path(args.graph), None, None, net_overrides
    )
    lookup = load_lookup(Path(args.neighbors), vocab)
    impressions = read_impressions(Path(args.impressions))
    checkpoint, metrics = pretrain(impressions, tables, lookup, train_config, build_ts)
    out = Path(args.out)
    checkpoint.save(out)
    outputs = [out]
    if args.metrics:
        write_metrics(Path(args.metrics), metrics)
        outputs.append(Path(args.metrics))
    write_manifest(
        out,
        "pretrain",
        {**train_snapshot, **{k: str(v) for k, v in net_overrides.items()}, "config_file": args.config},
        [train_config.seed],
        [Path(args.impressions), Path(args.videos), Path(args.users), Path(args.neighbors)],
        outputs,
        started,
        extra={"steps": len(metrics), "final_loss": metrics[-1][1] if metrics else None},
    )
    print(f"pretrain: {len(metrics)} steps -> {out}")
    return 0


def cmd_finetune(args) -> int:
    started = time.time()
    config = load_config_file(args.config)
    train_config, train_snapshot = _train_flags(args, config)
    base = Checkpoint.load(Path(args.checkpoint))
    normalizer = StatNormalizer.from_dict(base.normalizer_state)
    tables, vocab, build_ts = load_world_tables(
        Path(args.videos), Path(args.users), Path(args.graph), base.cfg, normalizer
    )
    lookup = load_lookup(Path(args.neighbors), vocab)
    cold = read_impressions(Path(args.impressions))
    full_ids = None
    if args.full_impressions:
        full_ids = {imp.impression_id for imp in read_impressions(Path(args.full_impressions))}
    checkpoint, metrics = finetune(base, cold, tables, lookup, train_config, build_ts, full_ids)
    out = Path(args.out)
    checkpoint.save(out)
    outputs = [out]
    if args.metrics:
        write_metrics(Path(args.metrics), metrics)
        outputs.append(Path(args.metrics))
    inputs = [Path(args.checkpoint), Path(args.impressions), Path(args.videos), Path(args.users)]
    if args.full_impressions:
        inputs.append(Path(args.full_impressions))
    write_manifest(
        out,
        "finetune",
        {**train_snapshot, "config_file": args.config},
        [train_config.seed],
        inputs,
        outputs,
        started,
        extra={"steps": len(metrics)},
    )
    print(f"finetune: {len(metrics)} steps -> {out}")
    return 0


def cmd_eval(args) -> int:
    started = time.time()
    config = load_config_file(args.config)
    checkpoint = Checkpoint.load(Path(args.checkpoint))
    normalizer = StatNormalizer.from_dict(checkpoint.normalizer_state)
    tables, vocab, _ = load_world_tables(
        Path(args.videos), Path(args.users), Path(args.graph), checkpoint.cfg, normalizer
    )
    lookup = load_lookup(Path(args.neighbors), vocab)
    impressions = read_impressions(Path(args.impressions))
    mask = _ablation(resolve(args, config, "ablation", "", str))
    auc = evaluate_auc(checkpoint, tables, impressions, lookup, mask)
    report = {"auc": auc, "n": len(impressions)}
    if args.base_auc is not None:
        report["rela_impr_vs_base"] = rela_impr(auc, args.base_auc)
    line = json.dumps(report, sort_keys=True)
    outputs = []
    if args.report:
        Path(args.report).write_text(line + "\n")
        outputs.append(Path(args.report))
        write_manifest(
            Path(args.report),
            "eval",
            {"ablation": ",".join(mask.as_names()), "config_file": args.config},
            [],
            [Path(args.checkpoint), Path(args.impressions)],
            outputs,
            started,
            extra=report,
        )
    print(f"eval: {line}")
    return 0


def cmd_ablate(args) -> int:
    started = time.time()
    config = load_config_file(args.config)
    train_config, train_snapshot = _train_flags(args, config)
    net_overrides = _net_flags(args, config)
    data_dir = Path(args.data)
    tables, vocab, build_ts = load_world_tables(
        data_dir / "videos.tsv", data_dir / "users.tsv", Path(args.graph), None, None, net_overrides
    )
    lookup = load_lookup(Path(args.neighbors), vocab)
    d_full = read_impressions(data_dir / "impressions_full.tsv")
    d_cold = read_impressions(data_dir / "impressions_cold.tsv")
    d_test = read_impressions(data_dir / "impressions_test.tsv")
    operators = None
    raw_ops = resolve(args, config, "operators", "", str)
    if raw_ops:
        operators = [op.strip() for op in raw_ops.split(",") if op.strip()]
    rows = run_ablation(tables, lookup, build_ts, d_full, d_cold, d_test, train_config, operators)
    out = Path(args.out)
    write_ablation_report(out, rows)
    write_manifest(
        out,
        "ablate",
        {**train_snapshot, "operators": raw_ops or ",".join(ABLATION_OPERATORS)},
        [train_config.seed],
        [data_dir / "impressions_full.tsv", data_dir / "impressions_test.tsv"],
        [out],
        started,
    )
    for row in rows:
        print(
            f"  {row.operator:<14} auc={row.auc:.4f} vs_full={row.rela_impr_vs_full:+.2f}% "
            f"vs_base={row.rela_impr_vs_base:+.2f}%"
        )
    return 0


def _scoring_context(args, config) -> tuple[ScoringContext, Vocabulary]:
    checkpoint = Checkpoint.load(Path(args.checkpoint))
    normalizer = StatNormalizer.from_dict(checkpoint.normalizer_state)
    tables, vocab, _ = load_world_tables(
        Path(args.videos), Path(args.users), Path(args.graph), checkpoint.cfg, normalizer
    )
    lookup = load_lookup(Path(args.neighbors), vocab)
    mask = _ablation(resolve(args, config, "ablation", "", str))
    return ScoringContext(checkpoint, tables, lookup, mask), vocab


def cmd_serve(args) -> int:
    config = load_config_file(args.config)
    context, _ = _scoring_context(args, config)
    host = resolve(args, config, "host", os.environ.get("GRAFTCTR_HOST", "127.0.0.1"), str)
    port = resolve(args, config, "port", int(os.environ.get("GRAFTCTR_PORT", "7474")), int)
    threads = resolve(args, config, "threads", int(os.environ.get("GRAFTCTR_THREADS", "8")), int)
    server = CtrServer(context, host=host, port=port, max_workers=threads)
    print(f"serve: listening on {host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_bench(args) -> int:
    started = time.time()
    config = load_config_file(args.config)
    bench_config = BenchConfig(
        n_requests=resolve(args, config, "requests", 200, int),
        candidates_per_request=resolve(args, config, "candidates", 16, int),
        behaviors_per_request=resolve(args, config, "behaviors", 10, int),
        concurrency=resolve(args, config, "concurrency", 2, int),
        seed=resolve(args, config, "seed", 0, int),
    )
    context, vocab = _scoring_context(args, config)
    users = [vocab.external("user", i) for i in range(1, vocab.size("user"))]
    videos = [vocab.external("video", i) for i in range(1, vocab.size("video"))]
    requests = make_workload(bench_config, users, videos)
    report = bench_with_base_delta(context, requests, bench_config.concurrency)
    line = json.dumps(report, sort_keys=True)
    if args.report:
        Path(args.report).write_text(line + "\n")
        write_manifest(
            Path(args.report),
            "bench",
            {**bench_config.__dict__},
            [bench_config.seed],
            [Path(args.checkpoint)],
            [Path(args.report)],
            started,
        )
    print(f"bench: {line}")
    return 0


def cmd_dump_neighbors(args) -> int:
    vocab = Vocabulary.load(Path(args.graph) / "vocab.tsv")
    store = NeighborStore(Path(args.neighbors), vocab)
    store.dump(sys.stdout)
    return 0


def cmd_dump_checkpoint(args) -> int:
    manifest = Checkpoint.read_manifest(Path(args.checkpoint))
    print(json.dumps({k: manifest[k] for k in ("schema_version", "meta", "shapes")}, indent=2, sort_keys=True))
    return 0


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graftctr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")

    p = sub.add_parser("synth-data", help="generate a synthetic world with a planted oracle")
    common(p)
    p.add_argument("--out", required=True)
    for name in (
        "n-users",
        "n-authors",
        "n-products",
        "n-categories",
        "n-warm",
        "n-cold",
        "latent-dim",
        "content-dim",
        "impressions-per-user",
        "test-impressions-per-user",
        "seed",
    ):
        p.add_argument(f"--{name}", type=int, dest=name.replace("-", "_"))
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("build-graph", help="build the heterogeneous graph and vocabulary")
    common(p)
    p.add_argument("--videos", required=True)
    p.add_argument("--vectors", help="content vector file; omitted -> deterministic embedder")
    p.add_argument("--users", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--semantic-k", type=int, dest="semantic_k")
    p.add_argument("--content-dim", type=int, dest="content_dim")
    p.add_argument("--build-ts", type=int, dest="build_ts")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("sample-neighbors", help="pre-sample per-cold-video computation graphs")
    common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int)
    p.set_defaults(func=cmd_sample_neighbors)

    def train_flags(p):
        p.add_argument("--learning-rate", type=float, dest="learning_rate")
        p.add_argument("--batch-size", type=int, dest="batch_size")
        p.add_argument("--pretrain-epochs", type=int, dest="pretrain_epochs")
        p.add_argument("--finetune-epochs", type=int, dest="finetune_epochs")
        p.add_argument("--adagrad-eps", type=float, dest="adagrad_eps")
        p.add_argument("--seed", type=int)
        p.add_argument("--ablation", help="comma-joined drop flags, e.g. h2,h3")

    def train_like(p, needs_out=True):
        common(p)
        p.add_argument("--videos", required=True)
        p.add_argument("--users", required=True)
        p.add_argument("--graph", required=True)
        p.add_argument("--neighbors", required=True)
        if needs_out:
            p.add_argument("--out", required=True)
        train_flags(p)

    def net_like(p):
        p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
        p.add_argument("--mlp-hidden", dest="mlp_hidden")
        p.add_argument("--neighbor-cap", type=int, dest="neighbor_cap")
        p.add_argument("--behavior-cap", type=int, dest="behavior_cap")
        p.add_argument("--title-cap", type=int, dest="title_cap")

    p = sub.add_parser("pretrain", help="train from scratch on the full log")
    train_like(p)
    net_like(p)
    p.add_argument("--impressions", required=True)
    p.add_argument("--metrics")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="continue training on cold-target impressions")
    train_like(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--impressions", required=True)
    p.add_argument("--full-impressions", dest="full_impressions")
    p.add_argument("--metrics")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="AUC of a checkpoint on an impression log")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--impressions", required=True)
    p.add_argument("--videos", required=True)
    p.add_argument("--users", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--ablation")
    p.add_argument("--base-auc", type=float, dest="base_auc")
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and score every ablation operator")
    common(p)
    p.add_argument("--data", required=True, help="directory produced by synth-data")
    p.add_argument("--graph", required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--operators", help="comma-joined operator names")
    p.add_argument("--out", required=True)
    train_flags(p)
    net_like(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="run the line-protocol prediction daemon")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--videos", required=True)
    p.add_argument("--users", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--ablation")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--threads", type=int, help="concurrent scoring bound (env GRAFTCTR_THREADS)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="seeded latency benchmark incl. base-model delta")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--videos", required=True)
    p.add_argument("--users", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--ablation")
    p.add_argument("--requests", type=int)
    p.add_argument("--candidates", type=int)
    p.add_argument("--behaviors", type=int)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--report")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump-neighbors", help="human-readable neighbor store listing")
    p.add_argument("--neighbors", required=True)
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_dump_neighbors)

    p = sub.add_parser("dump-checkpoint", help="print a checkpoint's shape manifest")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_dump_checkpoint)

    return parser


_ERROR_CATEGORIES = (
    (CheckpointVersionError, "version"),
    (FileFormatError, "format"),
    (ValidationError, "validation"),
    (FileNotFoundError, "missing-file"),
    (ValueError, "config"),
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except tuple(exc for exc, _ in _ERROR_CATEGORIES) as exc:
        category = next(cat for klass, cat in _ERROR_CATEGORIES if isinstance(exc, klass))
        print(f"error[{category}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
