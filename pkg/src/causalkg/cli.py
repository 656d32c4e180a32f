"""Command-line pipeline.

Subcommands cover the full path from raw event-graph corpora to metric
reports: preprocess, build-kg, split, train, evaluate, predict, explain,
stats, and grad-check. Every artifact write is atomic, guarded by a
lock file, and annotated with the tool version plus a digest of the
effective configuration, so identical inputs produce identical bytes.

Exit codes: 0 success, 1 validation problem (bad input content, bad
usage), 2 I/O problem, 3 numeric problem.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import dataclass, field

from .basemodels import BASE_KINDS, BaseModelSpec, init_base_model
from .ceg import (
    CausalNetwork,
    Rejected,
    extract_mediated_chains,
    network_from_dict,
    network_to_dict,
    parse_ceg_corpus,
    preprocess,
)
from .checkpoint import (
    Checkpoint,
    atomic_write_bytes,
    config_digest,
    load_checkpoint,
    save_checkpoint,
)
from .errors import (
    CausalKgError,
    NumericError,
    ValidationError,
)
from .hyper import HyperConfig, graph_edges, init_hyper
from .kg import (
    KgSplit,
    KnowledgeGraph,
    build_kg,
    kg_stats,
    merge_split,
    parse_kg,
    serialize_kg,
    split_kg,
)
from .numeric import grad_check
from .ranking import (
    FILTER_MODES,
    TASK_RELATIONS,
    TASKS,
    EvalConfig,
    Query,
    build_queries,
    candidate_pool,
    evaluate,
)
from .training import (
    BaseScorer,
    HyperScorer,
    TrainConfig,
    hyper_loss_and_grads,
    margin_loss_and_grads,
    smoothed_targets,
    train_base,
    train_hyper,
    truth_table,
)
from .vocab import Vocabulary, encode_links, encode_plain

TOOL_NAME = "causalkg"
try:
    from importlib.metadata import version as _dist_version

    TOOL_VERSION = _dist_version(TOOL_NAME)
except Exception:  # pragma: no cover - not installed
    TOOL_VERSION = "0.1.0"

MODEL_FAMILIES = ("hyper",) + BASE_KINDS


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    variant: str = "CT"
    mediated: bool = True
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    family: str = "hyper"
    dim: int = 32
    layers: int = 2
    alpha: float = 0.8
    composition: str = "mult"
    attention: bool = False
    transe_norm: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    paths: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.variant not in ("C", "CT"):
            raise ValidationError(f"variant must be C or CT, got {self.variant!r}")
        if self.family not in MODEL_FAMILIES:
            raise ValidationError(
                f"model must be one of {MODEL_FAMILIES}, got {self.family!r}"
            )

    def path(self, key: str) -> str | None:
        return dict(self.paths).get(key)

    def to_dict(self) -> dict:
        """Semantic configuration only; filesystem paths are wiring, not
        configuration, so they stay out of the digest and checkpoints."""
        return {
            "seed": self.seed,
            "variant": self.variant,
            "mediated": self.mediated,
            "split": {"ratios": list(self.ratios)},
            "model": {
                "family": self.family,
                "dim": self.dim,
                "layers": self.layers,
                "alpha": self.alpha,
                "composition": self.composition,
                "attention": self.attention,
                "transe_norm": self.transe_norm,
            },
            "train": self.train.to_dict(),
            "eval": self.eval.to_dict(),
        }

    def digest(self) -> str:
        return config_digest(self.to_dict())

    def base_spec(self) -> BaseModelSpec:
        return BaseModelSpec(
            kind=self.family, dim=self.dim, transe_norm=self.transe_norm
        )

    def hyper_config(self) -> HyperConfig:
        return HyperConfig(
            dim=self.dim,
            layers=self.layers,
            alpha=self.alpha,
            composition=self.composition,
            attention=self.attention,
        )


_TOP_KEYS = {"seed", "variant", "mediated", "split", "model", "train", "eval", "paths"}
_SPLIT_KEYS = {"ratios"}
_MODEL_KEYS = {
    "family",
    "dim",
    "layers",
    "alpha",
    "composition",
    "attention",
    "transe_norm",
}
_TRAIN_KEYS = {
    "epochs",
    "lr",
    "batch_size",
    "negatives",
    "margin",
    "label_smoothing",
    "patience",
    "eval_every",
}
_EVAL_KEYS = {"filter_mode", "candidates", "ks"}
_PATH_KEYS = {"corpus", "nets", "kg", "splits", "checkpoint", "report"}


def _reject_unknown(section: dict, allowed: set[str], pointer: str) -> None:
    if not isinstance(section, dict):
        raise ValidationError(f"config section at {pointer or '/'} must be an object")
    for key in sorted(set(section) - allowed):
        raise ValidationError(f"unknown config key at {pointer}/{key}")


def run_config_from_dict(data: dict) -> RunConfig:
    """Strict config parse: any key outside the schema is rejected with
    its JSON-pointer path."""
    _reject_unknown(data, _TOP_KEYS, "")
    split = data.get("split", {})
    _reject_unknown(split, _SPLIT_KEYS, "/split")
    model = data.get("model", {})
    _reject_unknown(model, _MODEL_KEYS, "/model")
    train = data.get("train", {})
    _reject_unknown(train, _TRAIN_KEYS, "/train")
    eval_section = data.get("eval", {})
    _reject_unknown(eval_section, _EVAL_KEYS, "/eval")
    paths = data.get("paths", {})
    _reject_unknown(paths, _PATH_KEYS, "/paths")
    for key in sorted(paths):
        if not isinstance(paths[key], str):
            raise ValidationError(f"config key /paths/{key} must be a string")

    defaults = RunConfig()
    seed = data.get("seed", defaults.seed)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("config key /seed must be an integer")
    mediated = data.get("mediated", defaults.mediated)
    if not isinstance(mediated, bool):
        raise ValidationError("config key /mediated must be a boolean")

    ratios = split.get("ratios", list(defaults.ratios))
    if not isinstance(ratios, (list, tuple)) or len(ratios) != 3:
        raise ValidationError("config key /split/ratios must list three fractions")

    train_kwargs = dict(train)
    train_kwargs["seed"] = seed
    eval_kwargs = dict(eval_section)
    if "ks" in eval_kwargs:
        eval_kwargs["ks"] = tuple(eval_kwargs["ks"])

    try:
        return RunConfig(
            seed=seed,
            variant=data.get("variant", defaults.variant),
            mediated=mediated,
            ratios=tuple(float(r) for r in ratios),
            family=model.get("family", defaults.family),
            dim=model.get("dim", defaults.dim),
            layers=model.get("layers", defaults.layers),
            alpha=model.get("alpha", defaults.alpha),
            composition=model.get("composition", defaults.composition),
            attention=model.get("attention", defaults.attention),
            transe_norm=model.get("transe_norm", defaults.transe_norm),
            train=TrainConfig(**train_kwargs),
            eval=EvalConfig(**eval_kwargs),
            paths=tuple(sorted((k, v) for k, v in paths.items())),
        )
    except TypeError as exc:
        raise ValidationError(f"bad config value: {exc}") from None


def load_run_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        raw = _read_bytes(path)
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: config root must be an object")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, leaf = key.partition(".")
        if leaf:
            data.setdefault(section, {})[leaf] = value
        else:
            data[key] = value
    return run_config_from_dict(data)


def _resolve_path(explicit: str | None, config: RunConfig, key: str, flag: str) -> str:
    if explicit:
        return explicit
    from_config = config.path(key)
    if from_config:
        return from_config
    raise ValidationError(f"missing {flag} (no config paths.{key} either)")


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as handle:
        return handle.read()


def _read_json(path: str):
    raw = _read_bytes(path)
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None


def canonical_json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _write_json(path: str, obj) -> None:
    atomic_write_bytes(path, canonical_json_bytes(obj))


def _write_jsonl(path: str, rows) -> None:
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    atomic_write_bytes(path, text.encode("utf-8"))


@contextlib.contextmanager
def output_lock(target: str):
    """Exclusive advisory lock next to the output path; a leftover lock
    from a concurrent or crashed run is reported rather than stolen."""
    if os.path.isdir(target):
        lock_path = os.path.join(target, ".causalkg.lock")
    else:
        parent = os.path.dirname(os.path.abspath(target))
        os.makedirs(parent, exist_ok=True)
        lock_path = target + ".lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OSError(
            f"lock file {lock_path} exists; another run may be writing "
            "this output (delete it if that run is gone)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(OSError):
            os.unlink(lock_path)


def annotate_kg(kg: KnowledgeGraph, digest: str) -> bytes:
    """Canonical graph bytes plus provenance headers, kept in the one
    global line sort so re-serialization is stable."""
    lines = serialize_kg(kg).decode("utf-8").splitlines()
    lines.append(f"#digest {digest}")
    lines.append(f"#tool {TOOL_NAME} {TOOL_VERSION}")
    lines.sort()
    return ("\n".join(lines) + "\n").encode("utf-8")


def _provenance(config: RunConfig) -> dict:
    return {"tool": f"{TOOL_NAME} {TOOL_VERSION}", "digest": config.digest()}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    config = load_run_config(args.config)
    source = _resolve_path(args.input, config, "corpus", "--in")
    out_dir = _resolve_path(args.out, config, "nets", "--out")
    corpus = parse_ceg_corpus(_read_bytes(source))
    os.makedirs(out_dir, exist_ok=True)
    with output_lock(out_dir):
        entries = []
        rejected = []
        accepted = 0
        for position, ceg in enumerate(corpus):
            result = preprocess(ceg)
            if isinstance(result, Rejected):
                rejected.append({"id": result.ceg_id, "reason": result.reason})
                continue
            filename = f"net_{accepted:05d}.json"
            _write_json(os.path.join(out_dir, filename), network_to_dict(result))
            entries.append({"file": filename, "id": result.id, "position": position})
            accepted += 1
        index = {
            "networks": entries,
            "rejected": rejected,
            "total": len(corpus),
            "accepted": accepted,
            **_provenance(config),
        }
        _write_json(os.path.join(out_dir, "index.json"), index)
        if args.report or config.path("report"):
            report_path = _resolve_path(args.report, config, "report", "--report")
            _write_json(
                report_path,
                {
                    "total": len(corpus),
                    "accepted": accepted,
                    "rejected": rejected,
                    **_provenance(config),
                },
            )
    print(f"accepted {accepted} of {len(corpus)} networks -> {out_dir}")
    return 0


def _load_networks(nets_dir: str) -> list[CausalNetwork]:
    index = _read_json(os.path.join(nets_dir, "index.json"))
    nets = []
    for entry in index["networks"]:
        nets.append(network_from_dict(_read_json(os.path.join(nets_dir, entry["file"]))))
    return nets


def cmd_build_kg(args) -> int:
    overrides = {"variant": args.variant, "mediated": args.mediated}
    config = load_run_config(args.config, overrides)
    nets_dir = _resolve_path(args.nets, config, "nets", "--nets")
    out_path = _resolve_path(args.out, config, "kg", "--out")
    nets = _load_networks(nets_dir)
    chains = {net.id: extract_mediated_chains(net) for net in nets}
    kg = build_kg(nets, chains, variant=config.variant, mediated=config.mediated)
    with output_lock(out_path):
        atomic_write_bytes(out_path, annotate_kg(kg, config.digest()))
    stats = kg_stats(kg)
    print(
        f"built {config.variant} graph: {stats.links} links, "
        f"{stats.entities} entities -> {out_path}"
    )
    return 0


def _parse_ratios(raw: str) -> list[float]:
    try:
        parts = [float(x) for x in raw.split(",")]
    except ValueError:
        raise ValidationError(f"--ratios must be three comma-separated fractions, got {raw!r}") from None
    return parts


def cmd_split(args) -> int:
    overrides = {"seed": args.seed}
    if args.ratios is not None:
        overrides["split.ratios"] = _parse_ratios(args.ratios)
    config = load_run_config(args.config, overrides)
    kg_path = _resolve_path(args.kg, config, "kg", "--kg")
    out_dir = _resolve_path(args.out, config, "splits", "--out")
    kg = parse_kg(_read_bytes(kg_path))
    split = split_kg(kg, config.ratios, config.seed)
    os.makedirs(out_dir, exist_ok=True)
    with output_lock(out_dir):
        digest = config.digest()
        counts = {}
        for name, member in split.members():
            atomic_write_bytes(
                os.path.join(out_dir, f"{name}.ckg"), annotate_kg(member, digest)
            )
            counts[name] = len(member.qlinks)
        _write_json(
            os.path.join(out_dir, "split.json"),
            {
                "counts": counts,
                "ratios": list(config.ratios),
                "seed": config.seed,
                **_provenance(config),
            },
        )
    print(
        f"split {sum(counts.values())} links into "
        f"{counts['train']}/{counts['valid']}/{counts['test']} -> {out_dir}"
    )
    return 0


def _load_split(split_dir: str) -> KgSplit:
    members = {}
    for name in ("train", "valid", "test"):
        members[name] = parse_kg(_read_bytes(os.path.join(split_dir, f"{name}.ckg")))
    split = KgSplit(**members)
    split.validate()
    return split


def cmd_train(args) -> int:
    config = load_run_config(args.config, {"model.family": args.model})
    split_dir = _resolve_path(args.split, config, "splits", "--split")
    out_path = _resolve_path(args.out, config, "checkpoint", "--out")
    split = _load_split(split_dir)
    vocab = Vocabulary.from_kg(merge_split(split))
    if config.family == "hyper":
        result = train_hyper(
            config.hyper_config(), split, vocab, config.train, config.eval
        )
        kind = "hyper"
    else:
        result = train_base(
            config.base_spec(), split, vocab, config.train, config.eval
        )
        kind = "base"
    ckpt = Checkpoint(
        kind=kind,
        config={"run": config.to_dict()},
        vocab=vocab,
        params=result.params,
        opt_state=None,
        epoch=result.best_epoch,
        val_mrr=result.best_val_mrr,
    )
    with output_lock(out_path):
        save_checkpoint(out_path, ckpt)
        if args.history:
            _write_jsonl(args.history, result.history)
    print(
        json.dumps(
            {
                "model": config.family,
                "epochs_run": len(result.history),
                "best_epoch": result.best_epoch,
                "best_val_mrr": result.best_val_mrr,
            },
            sort_keys=True,
        )
    )
    return 0


def _scorer_from_checkpoint(ckpt: Checkpoint, split: KgSplit, config: RunConfig):
    if ckpt.kind == "hyper":
        edges = graph_edges(split.train, ckpt.vocab)
        return HyperScorer(config.hyper_config(), ckpt.params, ckpt.vocab, edges)
    return BaseScorer(config.base_spec(), ckpt.params, ckpt.vocab)


def _config_from_checkpoint(ckpt: Checkpoint) -> RunConfig:
    data = json.loads(json.dumps(ckpt.config["run"]))
    # the stored train section carries the derived seed; the schema for
    # user-written configs keeps seed top-level only
    data.get("train", {}).pop("seed", None)
    return run_config_from_dict(data)


def cmd_evaluate(args) -> int:
    ckpt_path = args.checkpoint
    split_dir = args.split
    ckpt = load_checkpoint(ckpt_path)
    config = _config_from_checkpoint(ckpt)
    split = _load_split(split_dir)
    scorer = _scorer_from_checkpoint(ckpt, split, config)
    queries = build_queries(split.test, args.task)
    if args.filter == "both":
        modes = list(FILTER_MODES)
    elif args.filter:
        modes = [args.filter]
    else:
        modes = [config.eval.filter_mode]
    reports = {}
    for mode in modes:
        eval_config = EvalConfig(
            filter_mode=mode,
            candidates=config.eval.candidates,
            ks=config.eval.ks,
        )
        report = evaluate(scorer, queries, split, ckpt.vocab, eval_config)
        reports[mode] = report.to_dict()
        summary = {
            key: reports[mode][key]
            for key in ("task", "filter_mode", "mrr", "hits", "n_queries")
        }
        print(json.dumps(summary, sort_keys=True))
    payload = reports[modes[0]] if len(modes) == 1 else reports
    out_path = args.out or config.path("report")
    if out_path:
        with output_lock(out_path):
            _write_json(out_path, payload)
    return 0


def _parse_qualifiers(raw: str | None) -> tuple[tuple[str, str], ...]:
    if not raw:
        return ()
    pairs = []
    for item in raw.split(","):
        qrel, sep, qent = item.partition("=")
        if not sep or not qrel or not qent:
            raise ValidationError(
                f"qualifier {item!r} must look like relation=entity"
            )
        pairs.append((qrel.strip(), qent.strip()))
    return tuple(pairs)


def _cmd_rank(args, task: str) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    config = _config_from_checkpoint(ckpt)
    split = _load_split(args.split)
    scorer = _scorer_from_checkpoint(ckpt, split, config)
    qualifiers = _parse_qualifiers(args.qualifiers)
    relation = TASK_RELATIONS[task]
    # gold is a placeholder: scorers only read anchor/relation/qualifiers
    query = Query(
        task=task,
        anchor=args.anchor,
        relation=relation,
        gold=args.anchor,
        qualifiers=qualifiers,
    )
    names = candidate_pool(split, ckpt.vocab, args.candidates)
    candidate_ids = ckpt.vocab.entity_ids(names)
    scores = scorer.score_batch([query], candidate_ids)[0]
    order = sorted(range(len(names)), key=lambda i: (-scores[i], names[i]))
    ranked = [
        {"entity": names[i], "score": float(scores[i])} for i in order[: args.n]
    ]
    payload = {
        "task": task,
        "anchor": args.anchor,
        "relation": relation,
        "qualifiers": [list(q) for q in qualifiers],
        "candidates": args.candidates,
        "ranked": ranked,
        **_provenance(config),
    }
    if args.out:
        with output_lock(args.out):
            _write_json(args.out, payload)
    print(json.dumps(ranked, sort_keys=True))
    return 0


def cmd_predict(args) -> int:
    return _cmd_rank(args, "prediction")


def cmd_explain(args) -> int:
    return _cmd_rank(args, "explanation")


def cmd_stats(args) -> int:
    kg = parse_kg(_read_bytes(args.kg))
    payload = kg_stats(kg).to_dict()
    if args.out:
        with output_lock(args.out):
            _write_json(args.out, payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def _grad_check_fixture() -> tuple:
    from .ceg import NetEdge, NetNode

    nets = [
        CausalNetwork(
            id="g0",
            nodes=(
                NetNode("a", "Spark"),
                NetNode("b", "Fire"),
                NetNode("c", "Smoke"),
                NetNode("d", "Heat"),
            ),
            edges=(
                NetEdge("a", "b", 4),
                NetEdge("a", "d", 3),
                NetEdge("b", "c", 5),
            ),
        )
    ]
    chains = {nets[0].id: extract_mediated_chains(nets[0])}
    kg = build_kg(nets, chains, variant="CT", mediated=True)
    return nets, kg


def _grad_check_base(kind: str, kg: KnowledgeGraph, vocab: Vocabulary, seed: int):
    import numpy as np

    rng = np.random.default_rng(seed)
    heads, rels, tails = encode_plain(
        sorted((l.head, l.relation, l.tail) for l in kg.qlinks), vocab
    )
    pick = rng.choice(len(heads), size=min(3, len(heads)), replace=False)
    pos = (heads[pick], rels[pick], tails[pick])
    neg = (tails[pick], rels[pick], heads[pick])
    spec = BaseModelSpec(kind=kind, dim=8)
    params = init_base_model(spec, vocab.n_entities, vocab.n_relations, seed)
    return grad_check(
        lambda p: margin_loss_and_grads(spec, p, pos, neg, 1.0)[0],
        lambda p: margin_loss_and_grads(spec, p, pos, neg, 1.0)[1],
        params,
        seed=seed,
    )


def _grad_check_hyper(kg: KnowledgeGraph, vocab: Vocabulary, seed: int):
    hconfig = HyperConfig(dim=6, layers=1)
    hparams = init_hyper(hconfig, vocab.n_entities, vocab.n_relations, seed)
    edges = graph_edges(kg, vocab)
    batch = kg.sorted_qlinks()[:4]
    queries = encode_links(batch, vocab)
    truths = truth_table(kg.sorted_qlinks(), vocab)
    targets = smoothed_targets(batch, truths, vocab.n_entities, 0.1)
    return grad_check(
        lambda p: hyper_loss_and_grads(
            hconfig, p, edges, vocab.n_entities, queries, targets, need_grads=False
        )[0],
        lambda p: hyper_loss_and_grads(
            hconfig, p, edges, vocab.n_entities, queries, targets
        )[1],
        hparams,
        samples=150,
        seed=seed,
    )


def cmd_grad_check(args) -> int:
    _, kg = _grad_check_fixture()
    vocab = Vocabulary.from_kg(kg)
    wanted = MODEL_FAMILIES if args.model == "all" else (args.model,)
    report: dict = {"models": {}, "tol": 1e-4}
    ok = True
    for family in wanted:
        if family == "hyper":
            result = _grad_check_hyper(kg, vocab, args.seed)
        else:
            result = _grad_check_base(family, kg, vocab, args.seed)
        report["models"][family] = result.to_dict()
        ok = ok and result.passed
    report["passed"] = ok
    print(json.dumps(report, sort_keys=True))
    if not ok:
        raise NumericError("analytic gradients disagree with finite differences")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog=TOOL_NAME,
        description="Hyper-relational causal knowledge graphs: build, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="prune a raw event-graph corpus into networks")
    p.add_argument("--in", dest="input", default=None, help="corpus JSON file")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--report", default=None, help="optional prune report JSON")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("build-kg", help="assemble a knowledge graph from networks")
    p.add_argument("--nets", default=None, help="directory from preprocess")
    p.add_argument("--out", default=None, help="output .ckg file")
    p.add_argument("--config", default=None)
    p.add_argument("--variant", choices=("C", "CT"), default=None)
    p.add_argument(
        "--mediated", action=argparse.BooleanOptionalAction, default=None
    )
    p.set_defaults(func=cmd_build_kg)

    p = sub.add_parser("split", help="partition a graph into train/valid/test")
    p.add_argument("--kg", default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--config", default=None)
    p.add_argument("--ratios", default=None, help="e.g. 0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="fit a model on a split")
    p.add_argument("--split", default=None, help="directory from split")
    p.add_argument("--out", default=None, help="output checkpoint")
    p.add_argument("--config", default=None)
    p.add_argument("--model", choices=MODEL_FAMILIES, default=None)
    p.add_argument("--history", default=None, help="optional history JSON lines file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="filtered ranking metrics for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--task", choices=TASKS + ("both",), default="both")
    p.add_argument(
        "--filter", choices=FILTER_MODES + ("both",), default=None
    )
    p.add_argument("--out", default=None, help="report JSON")
    p.set_defaults(func=cmd_evaluate)

    for name, help_text, anchor_help in (
        ("predict", "rank candidate effect types for a cause", "cause entity"),
        ("explain", "rank candidate cause types for an effect", "effect entity"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--split", required=True)
        p.add_argument("--anchor", required=True, help=anchor_help)
        p.add_argument(
            "--qualifiers",
            default=None,
            help='e.g. "hasMediator=net0/ev1,hasMediatorType=type/Fire"',
        )
        p.add_argument("--n", type=int, default=10, help="how many candidates to list")
        p.add_argument("--candidates", choices=("types", "all"), default="types")
        p.add_argument("--out", default=None)
        p.set_defaults(func=cmd_predict if name == "predict" else cmd_explain)

    p = sub.add_parser("stats", help="count links, entities, types, relations")
    p.add_argument("--kg", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("grad-check", help="self-check analytic gradients")
    p.add_argument("--model", choices=MODEL_FAMILIES + ("all",), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except CausalKgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
