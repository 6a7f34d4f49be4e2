"""Command-line interface.

Subcommands mirror the pipeline stages: gen (documents/suite), mix, train,
eval, run (full experiment), ablate, report, plot. Configuration comes from
a JSON file (--config); a few common knobs have flag overrides. Secrets
(the chat endpoint key) are read only from the PF_API_KEY environment
variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import mixer
from . import synthgen as sg
from . import tokenizer as tk
from .evaluator import (
    CheckpointScorer,
    RemoteScorer,
    build_desk_suite,
    evaluate,
    load_suite,
    save_suite,
)
from .lmcore import Checkpoint, train
from .paradigms import load_all_paradigms
from .rng import derive_seed
from .runner import (
    ExperimentConfig,
    ablate,
    build_offline_baseline,
    build_synthetic_pool,
    compare,
    run_experiment,
    write_comparison_outputs,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--offline", action="store_true",
                        help="force offline mode (no LLM endpoint)")
    parser.add_argument("--out", type=Path, help="override the output directory")
    parser.add_argument("--llm-url", dest="llm_url", help="chat-completions base URL")
    parser.add_argument("--scorer-url", dest="scorer_url", help="remote log-prob scorer base URL")


def _load_config(args) -> ExperimentConfig:
    overrides = {
        "seed": args.seed,
        "out_dir": str(args.out) if args.out else None,
        "llm_base_url": args.llm_url,
        "scorer_url": args.scorer_url,
    }
    if args.offline:
        overrides["mode"] = "offline"
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    if not args.out:
        raise SystemExit("either --config or --out is required")
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    if args.offline:
        kwargs["mode"] = "offline"
    kwargs["out_dir"] = Path(kwargs.pop("out_dir"))
    return ExperimentConfig(**kwargs)


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    specs = load_all_paradigms()
    if args.what in ("baseline", "all"):
        docs = build_offline_baseline(cfg.baseline_token_target,
                                      derive_seed(cfg.seed, "baseline"),
                                      cfg.lemmas_per_doc)
        sg.write_documents(out / "baseline.jsonl", docs)
        print(f"wrote {len(docs)} baseline documents to {out/'baseline.jsonl'}")
    if args.what in ("targeted", "all"):
        for paradigm in cfg.target_paradigms:
            docs = build_synthetic_pool(cfg, paradigm, specs[paradigm],
                                        derive_seed(cfg.seed, "targeted", paradigm))
            for i, doc in enumerate(docs):
                doc.id = f"synthetic-targeted-{paradigm}-{i:06d}"
            path = out / f"targeted-{paradigm}.jsonl"
            sg.write_documents(path, docs)
            print(f"wrote {len(docs)} targeted documents to {path}")
    if args.what in ("random", "all"):
        docs = build_synthetic_pool(cfg, None, None, derive_seed(cfg.seed, "random"))
        for i, doc in enumerate(docs):
            doc.id = f"synthetic-random-{i:06d}"
        sg.write_documents(out / "random.jsonl", docs)
        print(f"wrote {len(docs)} random-control documents to {out/'random.jsonl'}")
    if args.what in ("suite", "all"):
        suite = build_desk_suite(specs, cfg.pairs_per_paradigm, derive_seed(cfg.seed, "suite"))
        save_suite(suite, out / "suite")
        print(f"wrote {suite.n_pairs} pairs to {out/'suite'}")
    return 0


def cmd_mix(args) -> int:
    cfg = _load_config(args)
    vocab = tk.BpeVocab.load(args.vocab)
    baseline_docs = sg.read_documents(args.baseline)
    synthetic_docs = sg.read_documents(args.synthetic) if args.synthetic else []
    baseline_manifest = mixer.build_manifest(baseline_docs, vocab)
    synthetic_manifest = mixer.build_manifest(synthetic_docs, vocab)
    fractions = tuple((args.tag, f) for f in [args.fraction] if f > 0)
    spec = mixer.MixSpec(
        total_token_budget=cfg.total_token_budget,
        fractions=fractions,
        seed=derive_seed(cfg.seed, "mix", json.dumps(sorted(fractions))),
        context_length=cfg.model.context_length,
    )
    plan = mixer.plan_mix(spec, baseline_manifest, synthetic_manifest)
    documents = {d.id: d for d in baseline_docs + synthetic_docs}
    dataset = mixer.materialize(plan, vocab, documents)
    out = args.out or (cfg.out_dir / "dataset.pfpk")
    dataset.save(out)
    audit = mixer.audit(
        dataset, vocab,
        sources={"baseline": baseline_manifest, "synthetic": synthetic_manifest},
        paradigm_specs=load_all_paradigms(),
    )
    print(json.dumps(audit.to_json(), indent=2, sort_keys=True))
    print(f"wrote {dataset.n_sequences} sequences to {out}")
    return 0 if audit.passed else 1


def cmd_train(args) -> int:
    cfg = _load_config(args)
    dataset = mixer.PackedDataset.load(args.data)
    out = args.out or cfg.out_dir
    ckpt_dir = Path(out) / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)

    def hook(ckpt):
        ckpt.save(ckpt_dir / f"step_{ckpt.step:06d}.ckpt")

    checkpoints = train(cfg.model, cfg.train, dataset, hooks=hook, log=print)
    print(f"wrote {len(checkpoints)} checkpoints to {ckpt_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    suite = load_suite(args.suite)
    if args.scorer_url or cfg.scorer_url:
        scorer = RemoteScorer(args.scorer_url or cfg.scorer_url)
        step = 0
    else:
        if not args.ckpt:
            raise SystemExit("--ckpt or --scorer-url is required")
        ckpt = Checkpoint.load(args.ckpt)
        vocab = tk.BpeVocab.load(args.vocab)
        if vocab.content_hash() != ckpt.vocab_hash:
            raise SystemExit("vocab hash does not match the checkpoint")
        scorer = CheckpointScorer(ckpt.params, ckpt.model_cfg, vocab,
                                  name=Path(args.ckpt).stem)
        step = ckpt.step
    report = evaluate(scorer, suite, checkpoint_step=step)
    out = args.out or cfg.out_dir
    Path(out).mkdir(parents=True, exist_ok=True)
    report.save(Path(out) / "report.json")
    (Path(out) / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    print(report.to_csv())
    print(f"aggregate: {report.aggregate:.2f}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    results = run_experiment(cfg)
    failed = [name for name, r in results.items() if r.error]
    targeted = [
        name for name in results
        if name.startswith("targeted-") and results[name].final_report
    ]
    baseline = results.get("baseline")
    if baseline and baseline.final_report and targeted:
        table = compare(
            baseline.final_report,
            results["random"].final_report
            if "random" in results and results["random"].final_report else None,
            results[targeted[-1]].final_report,
        )
        paths = write_comparison_outputs(table, cfg.out_dir / "reports")
        print(f"comparison written to {paths['markdown']}")
    if failed:
        print(f"failed arms: {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    if args.fractions:
        cfg.fractions = tuple(float(f) for f in args.fractions.split(","))
    table = ablate(cfg)
    out = cfg.out_dir / "reports"
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.md").write_text(table.to_markdown(), encoding="utf-8")
    (out / "ablation.csv").write_text(table.to_csv(), encoding="utf-8")
    print(table.to_markdown())
    return 0


def cmd_report(args) -> int:
    from .evaluator import EvalReport

    baseline = EvalReport.load(args.baseline)
    random_report = EvalReport.load(args.random) if args.random else None
    targeted = EvalReport.load(args.targeted)
    table = compare(baseline, random_report, targeted,
                    paradigms=args.paradigms.split(",") if args.paradigms else None)
    out = args.out or Path(".")
    paths = write_comparison_outputs(table, out)
    print(table.to_markdown())
    print(f"wrote {paths['markdown']}, {paths['csv']}, {paths['figure']}")
    return 0


def cmd_plot(args) -> int:
    from .plotting import plot_curves

    written = plot_curves(args.series, args.out, group_by_phenomenon=not args.flat)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paradigmforge",
        description="Targeted pre-training data interventions at desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate documents and/or an eval suite")
    _add_common(p)
    p.add_argument("--what", choices=["baseline", "targeted", "random", "suite", "all"],
                   default="all")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("mix", help="plan, materialize, and audit one mix")
    _add_common(p)
    p.add_argument("--vocab", required=True, type=Path)
    p.add_argument("--baseline", required=True, type=Path)
    p.add_argument("--synthetic", type=Path)
    p.add_argument("--fraction", type=float, default=0.01)
    p.add_argument("--tag", default="synthetic-targeted",
                   choices=["synthetic-targeted", "synthetic-random"])
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("train", help="train on a packed dataset")
    _add_common(p)
    p.add_argument("--data", required=True, type=Path)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or remote scorer on a suite")
    _add_common(p)
    p.add_argument("--suite", required=True, type=Path)
    p.add_argument("--ckpt", type=Path)
    p.add_argument("--vocab", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="run a full experiment (all arms)")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="fraction ablation for one paradigm")
    _add_common(p)
    p.add_argument("--fractions", help="comma-separated fractions, e.g. 1e-4,1e-3,1e-2")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="comparison table from stored eval reports")
    p.add_argument("--baseline", required=True, type=Path)
    p.add_argument("--random", type=Path)
    p.add_argument("--targeted", required=True, type=Path)
    p.add_argument("--paradigms", help="comma-separated row order")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="render learning-curve SVGs from series CSVs")
    p.add_argument("series", nargs="+", type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--flat", action="store_true", help="single group instead of phenomena")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
