"""Command-line interface.

Subcommands: validate, label, eval, select, synth, coi.  Every report embeds
the resolved configuration (environment, config file, flags, and the merged
result) plus the seed, so re-running a command from a report's echo
reproduces its outputs byte for byte.

Exit codes are a stable contract: 0 success, 1 I/O, 2 validation, 3 client,
4 precondition, 5 selection.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .clients import make_clients
from .config import RunConfig, resolve_config
from .corpus import (
    Corpus,
    Dialogue,
    atomic_write_text,
    derive_outcome,
    ingest,
    with_labels,
    write_corpus,
)
from .errors import (
    CoitkError,
    CombinatorialBlowup,
    DegenerateDistribution,
    EmptyInput,
    EmptyReferenceCorpus,
    IOFailure,
    KTooLarge,
    MissingLabel,
    MissingTemplate,
    ModelScoreOutOfRange,
    NoQuestions,
    OutOfRangeScore,
    RemoteUnavailable,
    SchemaViolation,
    SupportMismatch,
    UnlabeledCorpus,
    UnpairedScenario,
    UnparseableLabel,
    ZeroVector,
)
from .metrics_global import GlobalReport, js_divergence, kl_divergence, q_diversity
from .metrics_instance import (
    InstanceScores,
    result_f1,
    route_consistency,
    style_similarity,
)
from .rewards import DEFAULT_BANNED_PATTERNS, combined_reward, load_patterns
from .selection import curate
from .synthgen import default_spec, generate_corpus, load_spec
from .transitions import (
    accumulate,
    build_graph,
    extract_chain,
    extract_chains,
    incoming_flat_distribution,
    incoming_matrix,
    joint_distribution,
    export_matrix,
    counts_to_json,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_CLIENT = 3
EXIT_PRECONDITION = 4
EXIT_SELECTION = 5


def _emit(obj) -> None:
    print(json.dumps(obj, ensure_ascii=False))


def _write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, ensure_ascii=False, indent=2) + "\n")


def _write_jsonl(path: Path, rows) -> None:
    payload = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
    atomic_write_text(path, payload)


def _require_labeled(c: Corpus, name: str) -> None:
    if not c.label_complete:
        raise UnlabeledCorpus(f"{name} corpus has unlabeled candidate turns")


def _load_patterns(cfg: RunConfig):
    if cfg.banned_patterns:
        return load_patterns(cfg.banned_patterns)
    return DEFAULT_BANNED_PATTERNS


def _instance_table(
    syn: Corpus, real: Corpus, judge, graph
) -> dict[str, InstanceScores]:
    """Per-dialogue scores for every synthetic dialogue, in corpus order.

    result_match stays None when the scenario does not map to exactly one
    real dialogue; the strict pairing check belongs to result_f1.
    """
    real_by_scenario: dict[str, list[Dialogue]] = {}
    for d in real.dialogues:
        if d.scenario_id:
            real_by_scenario.setdefault(d.scenario_id, []).append(d)
    table: dict[str, InstanceScores] = {}
    for d in syn.dialogues:
        chain = extract_chain(d)
        style, ref_id = style_similarity(d, real, judge)
        matches = real_by_scenario.get(d.scenario_id or "", [])
        result = None
        if len(matches) == 1:
            result = derive_outcome(d) == derive_outcome(matches[0])
        table[d.id] = InstanceScores(
            dialogue_id=d.id,
            style_sim=style,
            route_consistent=route_consistency(chain, graph),
            result_match=result,
            reference_id=ref_id,
        )
    return table


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(args, cfg: RunConfig, echo: dict) -> int:
    corpus = ingest(args.path)
    report = {
        "status": "ok",
        "dialogues": len(corpus),
        "label_complete": corpus.label_complete,
        "source": corpus.source,
    }
    if args.out:
        _write_json(Path(args.out), {**report, "config": echo})
    _emit(report)
    return EXIT_OK


def cmd_label(args, cfg: RunConfig, echo: dict) -> int:
    corpus = ingest(args.path)
    classifier, _, _ = make_clients(classifier_cfg=cfg.client_config(cfg.classifier_url))
    labeled = []
    filled = 0
    for d in corpus.dialogues:
        missing = {
            t.index: None
            for t in d.candidate_turns()
            if t.intent is None
        }
        if missing:
            labels = {idx: classifier.classify(d.turns[idx].text) for idx in missing}
            filled += len(labels)
            d = with_labels(d, labels)
        labeled.append(d)
    write_corpus(Corpus(dialogues=tuple(labeled), source=corpus.source), args.out)
    _emit({"status": "ok", "labeled_turns": filled, "out": str(args.out)})
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig, echo: dict) -> int:
    real = ingest(args.real)
    syn = ingest(args.syn)
    _require_labeled(real, "real")
    _require_labeled(syn, "synthetic")
    _, judge, embedder = make_clients(
        judge_cfg=cfg.client_config(cfg.judge_url),
        embedder_cfg=cfg.client_config(cfg.embedder_url),
    )

    tc_real = accumulate(extract_chains(real))
    tc_syn = accumulate(extract_chains(syn))
    if cfg.flatten == "incoming":
        p = incoming_flat_distribution(tc_real, alpha=cfg.alpha)
        q = incoming_flat_distribution(tc_syn, alpha=cfg.alpha)
    else:
        p = joint_distribution(tc_real, alpha=cfg.alpha)
        q = joint_distribution(tc_syn, alpha=cfg.alpha)
    kl = kl_divergence(p, q)
    js = js_divergence(p, q)

    try:
        qdiv, per_cat = q_diversity(syn, embedder, tau=cfg.tau)
    except NoQuestions:
        qdiv, per_cat = None, {}
    global_report = GlobalReport(
        kl_div=kl,
        js_div=js,
        q_diversity=qdiv,
        per_category_entropy=per_cat,
        alpha=cfg.alpha,
        tau=cfg.tau,
    )

    graph = build_graph(tc_real, theta=cfg.theta)
    instances = _instance_table(syn, real, judge, graph)
    f1 = result_f1(syn, real)
    style_mean = sum(s.style_sim for s in instances.values()) / len(instances)
    route_rate = sum(s.route_consistent for s in instances.values()) / len(instances)

    patterns = _load_patterns(cfg)
    breakdowns = {
        d.id: combined_reward(d, w=cfg.reward_weights(), banned_patterns=patterns)
        for d in syn.dialogues
    }

    gdict = global_report.to_dict()
    report = {
        "kl_div": gdict["kl_div"],
        "js_div": gdict["js_div"],
        "q_diversity": gdict["q_diversity"],
        "style_sim": style_mean,
        "result_f1": f1.f1,
        "route_cons": route_rate,
        "result_f1_degenerate": f1.degenerate,
        "confusion": {"tp": f1.counts.tp, "fp": f1.counts.fp,
                      "fn": f1.counts.fn, "tn": f1.counts.tn},
        "per_category_entropy": gdict["per_category_entropy"],
        "config": echo,
    }
    out = Path(args.out)
    _write_json(out / "report.json", report)
    _write_jsonl(out / "instances.jsonl", [instances[d.id].to_dict() for d in syn.dialogues])
    _write_jsonl(
        out / "rewards.jsonl",
        [{"dialogue_id": d.id, **breakdowns[d.id].to_dict()} for d in syn.dialogues],
    )
    _emit({key: report[key] for key in
           ("kl_div", "js_div", "q_diversity", "style_sim", "result_f1", "route_cons")})
    return EXIT_OK


def cmd_select(args, cfg: RunConfig, echo: dict) -> int:
    if cfg.k is None:
        raise SchemaViolation([(0, "select requires k (flag --k or config)")])
    pool = ingest(args.pool)
    reference = ingest(args.reference)
    _require_labeled(pool, "pool")
    _require_labeled(reference, "reference")
    _, judge, _ = make_clients(judge_cfg=cfg.client_config(cfg.judge_url))

    graph = build_graph(accumulate(extract_chains(reference)), theta=cfg.theta)
    instances = _instance_table(pool, reference, judge, graph)
    patterns = _load_patterns(cfg)
    breakdowns = {
        d.id: combined_reward(d, w=cfg.reward_weights(), banned_patterns=patterns)
        for d in pool.dialogues
    }
    result = curate(
        pool,
        reference,
        cfg.selection_config(len(pool)),
        weights=cfg.composite_weights(),
        instance_scores=instances,
        breakdowns=breakdowns,
    )

    out = Path(args.out)
    manifest = {**result.to_dict(), "pool_size": len(pool), "config": echo}
    _write_json(out / "manifest.json", manifest)
    selected = Corpus(
        dialogues=tuple(pool.by_id[i] for i in result.selected_ids),
        source=pool.source,
    )
    write_corpus(selected, out / "selected.jsonl")
    _emit(
        {
            "status": "ok",
            "selected": len(result.selected_ids),
            "achieved_gap": result.achieved_gap,
            "strategy": result.strategy,
        }
    )
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig, echo: dict) -> int:
    if args.n < 1:
        raise SchemaViolation([(0, "n must be >= 1")])
    spec = default_spec() if args.spec == "default" else load_spec(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=cfg.seed)
    corpus = generate_corpus(spec, args.n)
    write_corpus(corpus, args.out)
    _emit({"status": "ok", "dialogues": len(corpus), "seed": spec.seed, "out": str(args.out)})
    return EXIT_OK


def cmd_coi(args, cfg: RunConfig, echo: dict) -> int:
    corpus = ingest(args.input)
    tc = accumulate(extract_chains(corpus))
    matrix = incoming_matrix(tc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "counts.json", counts_to_json(tc) + "\n")
    export_matrix(matrix, out / "matrix.json", out / "matrix.csv")
    _write_json(
        out / "summary.json",
        {
            "dialogues": len(corpus),
            "total_transitions": tc.total_transitions,
            "zero_columns": list(matrix.zero_columns),
            "config": echo,
        },
    )
    _emit({"status": "ok", "total_transitions": tc.total_transitions, "out": str(out)})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------

_FLAG_FIELDS = (
    "seed", "alpha", "tau", "theta", "k", "strategy", "gap_metric",
    "mc_iterations", "greedy_batch", "stage1_k", "flatten", "stub",
    "classifier_url", "judge_url", "embedder_url", "timeout_ms",
    "max_retries", "banned_patterns",
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--stub", action="store_const", const=True,
                   help="force deterministic local stub clients")
    p.add_argument("--alpha", type=float, help="smoothing for divergence inputs")
    p.add_argument("--tau", type=float, help="cosine threshold for question clustering")
    p.add_argument("--theta", type=int, help="edge count threshold for the intent graph")
    p.add_argument("--k", type=int, help="target subset size")
    p.add_argument("--strategy", choices=["rank", "monte_carlo", "greedy", "exhaustive"])
    p.add_argument("--gap-metric", dest="gap_metric", choices=["kl", "js"])
    p.add_argument("--mc-iters", dest="mc_iterations", type=int)
    p.add_argument("--greedy-batch", dest="greedy_batch", type=int)
    p.add_argument("--stage1-k", dest="stage1_k", type=int)
    p.add_argument("--flatten", choices=["joint", "incoming"])
    p.add_argument("--banned-patterns", dest="banned_patterns")
    p.add_argument("--classifier-url", dest="classifier_url")
    p.add_argument("--judge-url", dest="judge_url")
    p.add_argument("--embedder-url", dest="embedder_url")
    p.add_argument("--timeout-ms", dest="timeout_ms", type=int)
    p.add_argument("--max-retries", dest="max_retries", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coitk",
        description="Evaluate and curate dialogue corpora via intent-transition statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a corpus file")
    p.add_argument("path")
    p.add_argument("--out", help="optional report path")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("label", help="fill missing intent labels")
    p.add_argument("path")
    p.add_argument("--out", required=True, help="labeled corpus output path")
    _add_common(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("eval", help="evaluate a synthetic corpus against a real one")
    p.add_argument("--real", required=True)
    p.add_argument("--syn", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("select", help="curate a subset of a synthetic pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("synth", help="generate a synthetic corpus from a generator spec")
    p.add_argument("--spec", required=True, help="generator spec JSON, or 'default'")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True, help="corpus output path")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("coi", help="export transition counts and incoming matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_coi)

    return parser


def _exit_code(exc: CoitkError) -> int:
    if isinstance(exc, IOFailure):
        return EXIT_IO
    if isinstance(exc, (SchemaViolation, MissingTemplate)):
        return EXIT_VALIDATION
    if isinstance(exc, (RemoteUnavailable, UnparseableLabel, OutOfRangeScore, ZeroVector)):
        return EXIT_CLIENT
    if isinstance(
        exc,
        (
            UnlabeledCorpus,
            MissingLabel,
            UnpairedScenario,
            EmptyInput,
            EmptyReferenceCorpus,
            DegenerateDistribution,
            SupportMismatch,
            ModelScoreOutOfRange,
            NoQuestions,
        ),
    ):
        return EXIT_PRECONDITION
    if isinstance(exc, (KTooLarge, CombinatorialBlowup)):
        return EXIT_SELECTION
    return EXIT_IO


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {name: getattr(args, name, None) for name in _FLAG_FIELDS}
    try:
        cfg, echo = resolve_config(flags, getattr(args, "config", None))
        return args.func(args, cfg, echo)
    except CoitkError as exc:
        payload = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, SchemaViolation):
            payload["problems"] = [
                {"line": line, "message": msg} for line, msg in exc.problems
            ]
        if isinstance(exc, UnpairedScenario):
            payload["ids"] = exc.ids
        _emit(payload)
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
