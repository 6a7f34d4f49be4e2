"""Experiment orchestration: baseline / random / targeted arms end to end.

Every arm shares the tokenizer, model config, training config, and model
init seed; arms differ only in their mix (which documents replace which
fraction of baseline tokens). Each arm writes its own manifest, audit,
checkpoints, and evaluation reports; failed arms are recorded and do not
abort the rest of the experiment.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from . import lexicon as lx
from . import mixer
from . import synthgen as sg
from . import tokenizer as tk
from .evaluator import (
    CheckpointScorer,
    EvalReport,
    EvalSuite,
    build_desk_suite,
    evaluate,
    learning_curve,
    load_suite,
    save_suite,
)
from .lmcore import Checkpoint, ModelConfig, TrainConfig, train
from .paradigms import TARGET_PARADIGMS, ParadigmSpec, load_all_paradigms
from .rng import Rng, derive_seed


class RunnerError(RuntimeError):
    pass


def _config_schema() -> dict:
    path = resources.files("paradigmforge").joinpath("data", "config.schema.json")
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class ExperimentConfig:
    """Validated experiment description; see data/config.schema.json."""

    out_dir: Path
    mode: str = "offline"  # offline | online-llm
    seed: int = 1234
    target_paradigms: tuple[str, ...] = ("only_npi_scope",)
    fractions: tuple[float, ...] = (0.01,)
    include_random_arm: bool = False
    baseline_corpus: Path | None = None
    baseline_token_target: int = 2_200_000
    suite_path: Path | None = None
    pairs_per_paradigm: int = 500
    documents_per_paradigm: int = 400
    lemmas_per_doc: int = 6
    temperature: float = 0.7
    vocab_size: int = 1024
    total_token_budget: int = 2_000_000
    model: ModelConfig = field(default_factory=lambda: ModelConfig(
        n_layers=4, n_heads=4, d_model=64, d_ff=256, vocab_size=1024,
        context_length=256, dropout=0.0))
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        effective_batch_size=64, micro_batch_size=16, epochs=2,
        checkpoint_every=0))
    llm_base_url: str | None = None
    llm_model: str = "gpt-oss-120b"
    llm_reasoning_effort: str | None = "medium"
    scorer_url: str | None = None

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.mode not in ("offline", "online-llm"):
            raise RunnerError(f"unknown mode {self.mode!r}")
        for p in self.target_paradigms:
            if p not in TARGET_PARADIGMS:
                raise RunnerError(f"unknown target paradigm {p!r}")
        for f in self.fractions:
            if not 0.0 <= f <= 1.0:
                raise RunnerError(f"fraction {f} outside [0, 1]")
        if self.model.vocab_size != self.vocab_size:
            raise RunnerError("model.vocab_size must match tokenizer vocab_size")
        if self.mode == "online-llm" and not self.llm_base_url:
            raise RunnerError("online-llm mode requires an LLM base url")

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if overrides:
            raw.update({k: v for k, v in overrides.items() if v is not None})
        jsonschema.validate(raw, _config_schema())
        model = ModelConfig.from_json(raw["model"]) if "model" in raw else ModelConfig(
            n_layers=4, n_heads=4, d_model=64, d_ff=256,
            vocab_size=raw.get("vocab_size", 1024), context_length=256, dropout=0.0)
        train_cfg = TrainConfig.from_json(raw["train"]) if "train" in raw else TrainConfig(
            effective_batch_size=64, micro_batch_size=16, epochs=2)
        return cls(
            out_dir=Path(raw["out_dir"]),
            mode=raw.get("mode", "offline"),
            seed=raw.get("seed", 1234),
            target_paradigms=tuple(raw.get("target_paradigms", ["only_npi_scope"])),
            fractions=tuple(raw.get("fractions", [0.01])),
            include_random_arm=raw.get("include_random_arm", False),
            baseline_corpus=Path(raw["baseline_corpus"]) if raw.get("baseline_corpus") else None,
            baseline_token_target=raw.get("baseline_token_target", 2_200_000),
            suite_path=Path(raw["suite_path"]) if raw.get("suite_path") else None,
            pairs_per_paradigm=raw.get("pairs_per_paradigm", 500),
            documents_per_paradigm=raw.get("documents_per_paradigm", 400),
            lemmas_per_doc=raw.get("lemmas_per_doc", 6),
            temperature=raw.get("temperature", 0.7),
            vocab_size=raw.get("vocab_size", 1024),
            total_token_budget=raw.get("total_token_budget", 2_000_000),
            model=model,
            train=train_cfg,
            llm_base_url=raw.get("llm_base_url"),
            llm_model=raw.get("llm_model", "gpt-oss-120b"),
            llm_reasoning_effort=raw.get("llm_reasoning_effort", "medium"),
            scorer_url=raw.get("scorer_url"),
        )


def make_jobs(
    n: int,
    paradigm: str | None,
    seed: int,
    lemmas_per_doc: int,
    taxonomy=None,
    pool=None,
    temperature: float = sg.DEFAULT_TEMPERATURE,
) -> list[sg.GenerationJob]:
    """Seeded generation jobs with sampled style and lemmas."""
    taxonomy = taxonomy or lx.load_taxonomy()
    pool = pool or lx.default_lemma_pool()
    jobs = []
    for i in range(n):
        rng = Rng(derive_seed(seed, "job", str(i)))
        genre, subgenre = lx.sample_style(rng, taxonomy)
        lemmas = tuple(lx.sample_lemmas(rng, pool, lemmas_per_doc))
        jobs.append(
            sg.GenerationJob(
                job_id=i,
                paradigm=paradigm,
                genre=genre,
                subgenre=subgenre,
                lemmas=lemmas,
                temperature=temperature,
                seed=derive_seed(seed, "doc", str(i)),
            )
        )
    return jobs


def build_offline_baseline(
    token_target: int, seed: int, lemmas_per_doc: int = 6, taxonomy=None, pool=None
) -> list[sg.DocumentRecord]:
    """Hermetic base corpus: offline documents with no target construction.

    Document count is sized by a conservative tokens-per-doc guess and then
    topped up; callers should verify the realized total via the manifest.
    """
    taxonomy = taxonomy or lx.load_taxonomy()
    pool = pool or lx.default_lemma_pool()
    docs: list[sg.DocumentRecord] = []
    approx_tokens = 0
    i = 0
    # ~4.5 chars/token is a safe floor for untrained text; refined below.
    while approx_tokens < token_target:
        rng = Rng(derive_seed(seed, "job", str(i)))
        genre, subgenre = lx.sample_style(rng, taxonomy)
        lemmas = tuple(lx.sample_lemmas(rng, pool, lemmas_per_doc))
        job = sg.GenerationJob(
            job_id=i, paradigm=None, genre=genre, subgenre=subgenre,
            lemmas=lemmas, seed=derive_seed(seed, "doc", str(i)),
        )
        doc = sg.generate_offline(job, None, source="baseline")
        doc.id = f"baseline-{i:06d}"
        docs.append(doc)
        approx_tokens += max(1, len(doc.text) // 4)
        i += 1
    return docs


def build_synthetic_pool(cfg: ExperimentConfig, paradigm: str | None,
                         spec: ParadigmSpec | None, seed: int) -> list[sg.DocumentRecord]:
    """Targeted (or random-control) pool, offline or via the LLM endpoint."""
    jobs = make_jobs(
        cfg.documents_per_paradigm, paradigm, seed, cfg.lemmas_per_doc,
        temperature=cfg.temperature,
    )
    if cfg.mode == "offline" or spec is None:
        return [sg.generate_offline(job, spec) for job in jobs]
    endpoint = sg.HttpChatEndpoint(
        cfg.llm_base_url, cfg.llm_model, reasoning_effort=cfg.llm_reasoning_effort
    )
    return sg.generate_documents(jobs, lambda j: sg.generate_document(j, endpoint, spec))


@dataclass
class ArmResult:
    name: str
    path: Path
    audit: mixer.MixAudit | None = None
    reports: list[EvalReport] = field(default_factory=list)
    error: str | None = None

    @property
    def final_report(self) -> EvalReport | None:
        return self.reports[-1] if self.reports else None


def _arm_fractions(arm: str, paradigm: str | None, fraction: float) -> tuple:
    if arm == "baseline" or fraction == 0.0:
        return ()
    tag = "synthetic-random" if arm == "random" else "synthetic-targeted"
    return ((tag, fraction),)


def _arm_config_json(cfg: ExperimentConfig, spec: mixer.MixSpec) -> dict:
    # Arms must differ in the "mix" section only; everything else is shared.
    return {
        "model": cfg.model.to_json(),
        "train": cfg.train.to_json(),
        "mix": {
            "total_token_budget": spec.total_token_budget,
            "context_length": spec.context_length,
            "fractions": list(map(list, spec.fractions)),
            "seed": spec.seed,
        },
    }


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def run_arm(
    cfg: ExperimentConfig,
    arm_name: str,
    fractions: tuple,
    vocab: tk.BpeVocab,
    baseline_manifest: mixer.CorpusManifest,
    synthetic_manifest: mixer.CorpusManifest,
    documents: dict[str, sg.DocumentRecord],
    suite: EvalSuite,
    paradigm_specs: dict[str, ParadigmSpec],
    log,
) -> ArmResult:
    """One arm: plan -> materialize -> audit -> train -> evaluate -> write."""
    arm_dir = cfg.out_dir / "arms" / arm_name
    (arm_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    (arm_dir / "eval").mkdir(parents=True, exist_ok=True)
    result = ArmResult(name=arm_name, path=arm_dir)

    # The mix seed is a pure function of the realized fractions, so an arm
    # with f=0 builds the exact same stream as the baseline arm.
    mix_seed = derive_seed(cfg.seed, "mix", json.dumps(sorted(fractions)))
    spec = mixer.MixSpec(
        total_token_budget=cfg.total_token_budget,
        fractions=fractions,
        seed=mix_seed,
        context_length=cfg.model.context_length,
    )
    _write_json(arm_dir / "config.json", _arm_config_json(cfg, spec))

    log(f"[{arm_name}] planning mix: fractions={fractions}")
    plan = mixer.plan_mix(spec, baseline_manifest, synthetic_manifest)
    dataset = mixer.materialize(plan, vocab, documents)
    dataset.save(arm_dir / "dataset.pfpk")
    _write_json(
        arm_dir / "manifest.json",
        {
            "entries": dataset.manifest.to_json(),
            "totals": dataset.manifest.totals(),
            "contributions": dataset.manifest.contributions(),
            "global_hash": dataset.manifest.global_hash(),
            "n_sequences": dataset.n_sequences,
            "vocab_hash": dataset.vocab_hash,
        },
    )
    audit = mixer.audit(
        dataset,
        vocab,
        sources={"baseline": baseline_manifest, "synthetic": synthetic_manifest},
        paradigm_specs=paradigm_specs,
    )
    result.audit = audit
    _write_json(arm_dir / "audit.json", audit.to_json())
    if not audit.passed:
        result.error = f"mix audit failed: {audit.failures or audit.deviations}"
        log(f"[{arm_name}] ABORT: {result.error}")
        return result
    log(
        f"[{arm_name}] audit ok: realized="
        f"{ {k: round(v, 6) for k, v in audit.realized.items()} } "
        f"constructions={ {k: v for k, v in audit.paradigm_sentence_counts.items() if v} }"
    )

    saved: list[Path] = []

    def hook(ckpt: Checkpoint) -> None:
        path = arm_dir / "checkpoints" / f"step_{ckpt.step:06d}.ckpt"
        ckpt.save(path)
        saved.append(path)

    checkpoints = train(cfg.model, cfg.train, dataset, hooks=hook, log=log)

    scorers = [
        (c.step, CheckpointScorer(c.params, cfg.model, vocab, name=f"{arm_name}@{c.step}"))
        for c in checkpoints
    ]
    for step, scorer in scorers:
        report = evaluate(scorer, suite, checkpoint_step=step)
        report.save(arm_dir / "eval" / f"report_step_{step:06d}.json")
        (arm_dir / "eval" / f"report_step_{step:06d}.csv").write_text(
            report.to_csv(), encoding="utf-8"
        )
        result.reports.append(report)
    (arm_dir / "curve.csv").write_text(
        learning_curve(scorers, suite), encoding="utf-8"
    )
    log(f"[{arm_name}] aggregate={result.final_report.aggregate:.2f}")
    return result


def run_experiment(cfg: ExperimentConfig, log=print) -> dict[str, ArmResult]:
    """All arms of one experiment; shared inputs are built (or loaded) once."""
    out = cfg.out_dir
    inputs = out / "inputs"
    inputs.mkdir(parents=True, exist_ok=True)
    started = time.time()

    paradigm_specs = load_all_paradigms()

    # Baseline corpus: loaded from disk or synthesized hermetically.
    baseline_path = cfg.baseline_corpus or (inputs / "baseline.jsonl")
    if baseline_path.exists():
        baseline_docs = sg.read_documents(baseline_path)
        log(f"baseline corpus: {len(baseline_docs)} documents from {baseline_path}")
    else:
        if cfg.mode != "offline" and cfg.baseline_corpus is not None:
            raise RunnerError(f"baseline corpus {baseline_path} does not exist")
        log(f"building offline baseline (~{cfg.baseline_token_target} tokens)")
        baseline_docs = build_offline_baseline(
            cfg.baseline_token_target, derive_seed(cfg.seed, "baseline"),
            cfg.lemmas_per_doc,
        )
        sg.write_documents(baseline_path, baseline_docs)

    # Synthetic pools: one targeted pool per paradigm, plus the random control.
    synthetic_docs: list[sg.DocumentRecord] = []
    for paradigm in cfg.target_paradigms:
        pool_path = inputs / f"targeted-{paradigm}.jsonl"
        if pool_path.exists():
            docs = sg.read_documents(pool_path)
        else:
            docs = build_synthetic_pool(
                cfg, paradigm, paradigm_specs[paradigm],
                derive_seed(cfg.seed, "targeted", paradigm),
            )
            for i, doc in enumerate(docs):
                doc.id = f"synthetic-targeted-{paradigm}-{i:06d}"
            sg.write_documents(pool_path, docs)
        synthetic_docs.extend(docs)
        log(f"targeted pool {paradigm}: {len(docs)} documents")
    if cfg.include_random_arm:
        random_path = inputs / "random.jsonl"
        if random_path.exists():
            random_docs = sg.read_documents(random_path)
        else:
            random_docs = build_synthetic_pool(
                cfg, None, None, derive_seed(cfg.seed, "random")
            )
            for i, doc in enumerate(random_docs):
                doc.id = f"synthetic-random-{i:06d}"
            sg.write_documents(random_path, random_docs)
        synthetic_docs.extend(random_docs)
        log(f"random pool: {len(random_docs)} documents")

    # Evaluation suite.
    if cfg.suite_path and Path(cfg.suite_path).exists():
        suite = load_suite(cfg.suite_path)
    else:
        suite_dir = cfg.suite_path or (inputs / "suite")
        if Path(suite_dir).exists() and list(Path(suite_dir).glob("*.jsonl")):
            suite = load_suite(suite_dir)
        else:
            suite = build_desk_suite(
                paradigm_specs, cfg.pairs_per_paradigm, derive_seed(cfg.seed, "suite")
            )
            save_suite(suite, suite_dir)
    log(f"suite: {suite.n_pairs} pairs over {len(suite.paradigms)} paradigms")

    # One tokenizer for every arm, trained on baseline + synthetic text.
    vocab_path = inputs / "vocab.json"
    if vocab_path.exists():
        vocab = tk.BpeVocab.load(vocab_path)
    else:
        log(f"training BPE vocab (size {cfg.vocab_size})")
        vocab = tk.train_bpe(baseline_docs + synthetic_docs, cfg.vocab_size)
        vocab.save(vocab_path)

    baseline_manifest = mixer.build_manifest(baseline_docs, vocab)
    synthetic_manifest = mixer.build_manifest(synthetic_docs, vocab)
    documents = {d.id: d for d in baseline_docs + synthetic_docs}
    if len(documents) != len(baseline_docs) + len(synthetic_docs):
        raise RunnerError("duplicate document ids across pools")

    arms: list[tuple[str, tuple]] = [("baseline", ())]
    if cfg.include_random_arm:
        arms.append(("random", _arm_fractions("random", None, max(cfg.fractions))))
    for paradigm in cfg.target_paradigms:
        for fraction in cfg.fractions:
            name = f"targeted-{paradigm}-{_format_fraction(fraction)}"
            arms.append((name, _arm_fractions(name, paradigm, fraction)))

    results: dict[str, ArmResult] = {}
    for arm_name, fractions in arms:
        try:
            results[arm_name] = run_arm(
                cfg, arm_name, fractions, vocab, baseline_manifest,
                synthetic_manifest, documents, suite, paradigm_specs, log,
            )
        except Exception as exc:  # arm-level isolation
            results[arm_name] = ArmResult(
                name=arm_name, path=cfg.out_dir / "arms" / arm_name,
                error=f"{type(exc).__name__}: {exc}",
            )
            log(f"[{arm_name}] FAILED: {results[arm_name].error}")

    summary = {
        "arms": {
            name: {
                "error": r.error,
                "aggregate": r.final_report.aggregate if r.final_report else None,
                "n_checkpoints": len(r.reports),
            }
            for name, r in results.items()
        },
        "elapsed_seconds": round(time.time() - started, 1),
        "suite_hash": suite.content_hash(),
    }
    _write_json(out / "experiment.json", summary)
    log(f"experiment finished in {summary['elapsed_seconds']}s")
    return results


def _format_fraction(fraction: float) -> str:
    pct = fraction * 100
    text = f"{pct:.10g}"
    return f"{text}pct"


def fraction_label(fraction: float) -> str:
    return f"{fraction * 100:.10g}%"


@dataclass
class ComparisonTable:
    """Table-style comparison: Baseline / Random / Targeted / delta."""

    rows: list[dict]  # paradigm, baseline, random, targeted, delta
    suite_hash: str

    def to_markdown(self) -> str:
        lines = ["| Paradigm | Baseline | Random | Targeted | Δ |",
                 "|---|---|---|---|---|"]
        for row in self.rows:
            cells = []
            values = {
                "baseline": row["baseline"],
                "random": row["random"],
                "targeted": row["targeted"],
            }
            present = {k: v for k, v in values.items() if v is not None}
            best = max(present.values()) if present else None
            for key in ("baseline", "random", "targeted"):
                v = values[key]
                if v is None:
                    cells.append("—")
                elif best is not None and v == best:
                    cells.append(f"**{v:.1f}**")
                else:
                    cells.append(f"{v:.1f}")
            delta = row["delta"]
            delta_text = "—" if delta is None else f"{delta:+.1f}"
            lines.append(f"| {row['paradigm']} | {cells[0]} | {cells[1]} | {cells[2]} | {delta_text} |")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["paradigm,baseline,random,targeted,delta"]
        for row in self.rows:
            def fmt(v):
                return "" if v is None else f"{v:.10g}"
            lines.append(
                f"{row['paradigm']},{fmt(row['baseline'])},{fmt(row['random'])},"
                f"{fmt(row['targeted'])},{fmt(row['delta'])}"
            )
        return "\n".join(lines) + "\n"


def compare(
    baseline: EvalReport,
    random: EvalReport | None,
    targeted: EvalReport,
    paradigms: list[str] | None = None,
) -> ComparisonTable:
    """Comparison rows with delta = targeted - baseline, recomputed here.

    All reports must come from the same suite (hash check). ``random`` may be
    missing; its column renders as absent.
    """
    reports = [r for r in (baseline, random, targeted) if r is not None]
    hashes = {r.suite_hash for r in reports if r.suite_hash}
    if len(hashes) > 1:
        raise RunnerError(f"reports evaluated on different suites: {sorted(hashes)}")
    if paradigms is None:
        paradigms = sorted(baseline.accuracy_by_paradigm)
    rows = []
    for paradigm in paradigms:
        b = baseline.accuracy_by_paradigm.get(paradigm)
        r = random.accuracy_by_paradigm.get(paradigm) if random else None
        t = targeted.accuracy_by_paradigm.get(paradigm)
        delta = None if (b is None or t is None) else round(t - b, 10)
        rows.append(
            {"paradigm": paradigm, "baseline": b, "random": r, "targeted": t, "delta": delta}
        )
    return ComparisonTable(rows=rows, suite_hash=next(iter(hashes), ""))


@dataclass
class AblationTable:
    """Table-style ablation: Baseline plus one column per fraction."""

    fractions: tuple[float, ...]
    rows: list[dict]  # paradigm, baseline, by_fraction: {fraction: acc}
    suite_hash: str = ""

    def to_markdown(self) -> str:
        headers = ["Paradigm", "Baseline"] + [fraction_label(f) for f in self.fractions]
        lines = ["| " + " | ".join(headers) + " |",
                 "|" + "---|" * len(headers)]
        for row in self.rows:
            values = [row["baseline"]] + [row["by_fraction"].get(f) for f in self.fractions]
            present = [v for v in values if v is not None]
            best = max(present) if present else None
            cells = []
            for v in values:
                if v is None:
                    cells.append("—")
                elif best is not None and v == best:
                    cells.append(f"**{v:.1f}**")
                else:
                    cells.append(f"{v:.1f}")
            lines.append("| " + " | ".join([row["paradigm"]] + cells) + " |")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        header = ["paradigm", "baseline"] + [fraction_label(f) for f in self.fractions]
        lines = [",".join(header)]
        for row in self.rows:
            cells = [row["paradigm"], f"{row['baseline']:.10g}"]
            for f in self.fractions:
                v = row["by_fraction"].get(f)
                cells.append("" if v is None else f"{v:.10g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def ablation_table(
    baseline: EvalReport,
    by_fraction: dict[float, EvalReport],
    fractions: tuple[float, ...],
    paradigms: list[str] | None = None,
) -> AblationTable:
    hashes = {r.suite_hash for r in [baseline, *by_fraction.values()] if r.suite_hash}
    if len(hashes) > 1:
        raise RunnerError(f"reports evaluated on different suites: {sorted(hashes)}")
    if paradigms is None:
        paradigms = sorted(baseline.accuracy_by_paradigm)
    rows = []
    for paradigm in paradigms:
        rows.append(
            {
                "paradigm": paradigm,
                "baseline": baseline.accuracy_by_paradigm.get(paradigm),
                "by_fraction": {
                    f: by_fraction[f].accuracy_by_paradigm.get(paradigm)
                    for f in fractions
                    if f in by_fraction
                },
            }
        )
    return AblationTable(fractions=fractions, rows=rows, suite_hash=next(iter(hashes), ""))


def ablate(cfg: ExperimentConfig, log=print) -> AblationTable:
    """Fraction ablation for a single paradigm: shared baseline, one arm each."""
    if len(cfg.target_paradigms) != 1:
        raise RunnerError("ablation runs one targeted paradigm per invocation")
    paradigm = cfg.target_paradigms[0]
    results = run_experiment(cfg, log=log)
    baseline = results["baseline"]
    if baseline.final_report is None:
        raise RunnerError(f"baseline arm failed: {baseline.error}")
    by_fraction: dict[float, EvalReport] = {}
    for fraction in cfg.fractions:
        arm = results.get(f"targeted-{paradigm}-{_format_fraction(fraction)}")
        if arm is not None and arm.final_report is not None:
            by_fraction[fraction] = arm.final_report
    return ablation_table(baseline.final_report, by_fraction, cfg.fractions)


def write_comparison_outputs(
    table: ComparisonTable, out_dir: str | Path, name: str = "comparison"
) -> dict[str, Path]:
    """Markdown + CSV + bar figure for one comparison table."""
    from .plotting import plot_comparison

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    md = out_dir / f"{name}.md"
    csv_path = out_dir / f"{name}.csv"
    md.write_text(table.to_markdown(), encoding="utf-8")
    csv_path.write_text(table.to_csv(), encoding="utf-8")
    accuracies: dict[str, dict[str, float]] = {}
    for column in ("baseline", "random", "targeted"):
        values = {
            row["paradigm"]: row[column] for row in table.rows if row[column] is not None
        }
        if values:
            accuracies[column] = values
    figure = plot_comparison(accuracies, out_dir / f"{name}.svg", title=name)
    return {"markdown": md, "csv": csv_path, "figure": figure}
