"""Minimal-pair evaluation with pluggable sentence scorers.

A scorer maps text to a total log-probability; a pair is scored correct iff
the grammatical sentence gets strictly higher log-probability (ties count as
incorrect). Scorers include a trained checkpoint, a remote log-prob
endpoint, and an add-one-smoothed bigram model used as a cheap reference.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import requests

from .lmcore.model import ModelConfig, batched_sequence_logprobs
from .paradigms import MinimalPair
from .tokenizer import BOS, BpeVocab, encode


class EvaluatorError(RuntimeError):
    pass


@dataclass
class EvalSuite:
    """Minimal pairs grouped by paradigm UID."""

    pairs_by_paradigm: dict[str, list[MinimalPair]]
    provenance: str = "desk-synthetic"  # or "blimp-official"

    @property
    def paradigms(self) -> list[str]:
        return sorted(self.pairs_by_paradigm)

    @property
    def n_pairs(self) -> int:
        return sum(len(v) for v in self.pairs_by_paradigm.values())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for paradigm in self.paradigms:
            for pair in self.pairs_by_paradigm[paradigm]:
                h.update(
                    f"{paradigm}|{pair.uid}|{pair.sentence_good}|{pair.sentence_bad};".encode(
                        "utf-8"
                    )
                )
        return h.hexdigest()


def load_suite(path: str | Path, provenance: str = "desk-synthetic") -> EvalSuite:
    """Load a directory of per-paradigm NDJSON files (or a single file).

    Required fields per line: ``sentence_good``, ``sentence_bad``, ``UID``;
    extra fields are ignored. Errors name the file and line.
    """
    path = Path(path)
    files = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
    if not files:
        raise EvaluatorError(f"no .jsonl suite files under {path}")
    groups: dict[str, list[MinimalPair]] = {}
    seen_uids: set[str] = set()
    for file in files:
        count = 0
        with open(file, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise EvaluatorError(f"{file}:{lineno}: invalid JSON: {exc}") from exc
                for fieldname in ("sentence_good", "sentence_bad", "UID"):
                    if fieldname not in raw:
                        raise EvaluatorError(f"{file}:{lineno}: missing field {fieldname!r}")
                uid = str(raw.get("pair_id", f"{raw['UID']}-{file.stem}-{lineno}"))
                if uid in seen_uids:
                    raise EvaluatorError(f"{file}:{lineno}: duplicate pair id {uid!r}")
                seen_uids.add(uid)
                groups.setdefault(raw["UID"], []).append(
                    MinimalPair(
                        uid=uid,
                        paradigm=raw["UID"],
                        sentence_good=raw["sentence_good"],
                        sentence_bad=raw["sentence_bad"],
                    )
                )
                count += 1
        if count == 0:
            raise EvaluatorError(f"{file}: empty paradigm file")
    return EvalSuite(pairs_by_paradigm=groups, provenance=provenance)


def save_suite(suite: EvalSuite, directory: str | Path) -> None:
    """One NDJSON file per paradigm; round-trips through load_suite."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for paradigm, pairs in suite.pairs_by_paradigm.items():
        with open(directory / f"{paradigm}.jsonl", "w", encoding="utf-8") as handle:
            for pair in pairs:
                handle.write(
                    json.dumps(
                        {
                            "UID": paradigm,
                            "pair_id": pair.uid,
                            "sentence_good": pair.sentence_good,
                            "sentence_bad": pair.sentence_bad,
                        },
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                    + "\n"
                )


class Scorer(Protocol):
    identity: str

    def score(self, text: str) -> float: ...


class CheckpointScorer:
    """Total log-probability under a trained model (natural log, BOS-prefixed)."""

    def __init__(self, params, model_cfg: ModelConfig, vocab: BpeVocab, name: str = "checkpoint"):
        self.params = params
        self.model_cfg = model_cfg
        self.vocab = vocab
        self.identity = name

    def _ids(self, text: str) -> list[int]:
        if not text:
            raise EvaluatorError("cannot score empty text")
        return [BOS] + encode(self.vocab, text)

    def score(self, text: str) -> float:
        return batched_sequence_logprobs(self.params, self.model_cfg, [self._ids(text)])[0]

    def score_many(self, texts: Sequence[str], batch_size: int = 64) -> list[float]:
        out: list[float] = []
        for start in range(0, len(texts), batch_size):
            chunk = [self._ids(t) for t in texts[start : start + batch_size]]
            out.extend(batched_sequence_logprobs(self.params, self.model_cfg, chunk))
        return out


class RemoteScorer:
    """Client for a log-prob endpoint: POST {base_url}/score {"text": ...}.

    The reply's ``token_logprobs`` are summed. Transient failures retry up to
    ``retries`` times before propagating.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        retries: int = 2,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()
        self.identity = f"remote@{self.base_url}"

    def score(self, text: str) -> float:
        last_error: Exception | None = None
        for _ in range(1 + self.retries):
            try:
                response = self.session.post(
                    f"{self.base_url}/score", json={"text": text}, timeout=self.timeout
                )
                if response.status_code != 200:
                    raise EvaluatorError(f"scorer returned HTTP {response.status_code}")
                return float(sum(response.json()["token_logprobs"]))
            except Exception as exc:  # noqa: BLE001 - retried, then re-raised
                last_error = exc
        raise EvaluatorError(f"remote scorer failed after retries: {last_error}")


_WORD_STRIP = ".,!?;:\"'()[]"


class BigramScorer:
    """Word-level add-one-smoothed bigram model over a training corpus.

    Tokens are lowercased whitespace words with edge punctuation stripped,
    wrapped in <s> ... </s>. P(w|prev) = (c(prev,w)+1) / (c(prev)+V) with V =
    vocabulary size including the boundary markers and <unk>; unseen words
    map to <unk>. Total score is the sum of natural-log probabilities.
    """

    START = "<s>"
    END = "</s>"
    UNK = "<unk>"

    def __init__(self, sentences: Iterable[str], name: str = "bigram"):
        self.identity = name
        self.bigram_counts: dict[tuple[str, str], int] = {}
        self.unigram_counts: dict[str, int] = {}
        vocab = {self.START, self.END, self.UNK}
        for sentence in sentences:
            tokens = [self.START] + self._tokens(sentence) + [self.END]
            vocab.update(tokens)
            for prev, word in zip(tokens, tokens[1:]):
                self.bigram_counts[(prev, word)] = self.bigram_counts.get((prev, word), 0) + 1
                self.unigram_counts[prev] = self.unigram_counts.get(prev, 0) + 1
        self.vocab_size = len(vocab)
        self._known = vocab

    @staticmethod
    def _tokens(text: str) -> list[str]:
        out = []
        for raw in text.split():
            token = raw.strip(_WORD_STRIP).lower()
            if token:
                out.append(token)
        return out

    def score(self, text: str) -> float:
        tokens = [self.START] + [
            t if t in self._known else self.UNK for t in self._tokens(text)
        ] + [self.END]
        total = 0.0
        for prev, word in zip(tokens, tokens[1:]):
            num = self.bigram_counts.get((prev, word), 0) + 1
            den = self.unigram_counts.get(prev, 0) + self.vocab_size
            total += math.log(num / den)
        return total


def score_pair(scorer: Scorer, pair: MinimalPair) -> tuple[float, float, bool]:
    """(good_lp, bad_lp, correct); strictly-higher wins, ties are incorrect."""
    try:
        good_lp = scorer.score(pair.sentence_good)
        bad_lp = scorer.score(pair.sentence_bad)
    except Exception as exc:
        raise EvaluatorError(f"scorer failed on pair {pair.uid}: {exc}") from exc
    return good_lp, bad_lp, good_lp > bad_lp


@dataclass
class EvalReport:
    """Per-paradigm accuracies (percent) plus the unweighted-mean aggregate."""

    accuracy_by_paradigm: dict[str, float]
    counts_by_paradigm: dict[str, tuple[int, int]]  # (correct, total)
    aggregate: float
    scorer: str
    checkpoint_step: int = 0
    suite_hash: str = ""
    aggregate_mode: str = "paradigm-mean"
    failures: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "accuracy_by_paradigm": self.accuracy_by_paradigm,
            "counts_by_paradigm": {k: list(v) for k, v in self.counts_by_paradigm.items()},
            "aggregate": self.aggregate,
            "aggregate_mode": self.aggregate_mode,
            "scorer": self.scorer,
            "checkpoint_step": self.checkpoint_step,
            "suite_hash": self.suite_hash,
            "failures": self.failures,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "EvalReport":
        return cls(
            accuracy_by_paradigm=dict(raw["accuracy_by_paradigm"]),
            counts_by_paradigm={k: (v[0], v[1]) for k, v in raw["counts_by_paradigm"].items()},
            aggregate=raw["aggregate"],
            scorer=raw["scorer"],
            checkpoint_step=raw.get("checkpoint_step", 0),
            suite_hash=raw.get("suite_hash", ""),
            aggregate_mode=raw.get("aggregate_mode", "paradigm-mean"),
            failures=list(raw.get("failures", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=2, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["paradigm", "accuracy", "n_pairs", "checkpoint_step", "scorer"])
        for paradigm in sorted(self.accuracy_by_paradigm):
            _, total = self.counts_by_paradigm[paradigm]
            writer.writerow(
                [
                    paradigm,
                    f"{self.accuracy_by_paradigm[paradigm]:.10g}",
                    total,
                    self.checkpoint_step,
                    self.scorer,
                ]
            )
        return buf.getvalue()


def evaluate(
    scorer: Scorer,
    suite: EvalSuite,
    checkpoint_step: int = 0,
    aggregate_mode: str = "paradigm-mean",
) -> EvalReport:
    """Accuracy per paradigm and the aggregate, from order-independent counts.

    Scorer failures are collected per pair; partial results are still
    reported with the failure list filled in. The aggregate is the
    unweighted mean over paradigm accuracies (exact rational arithmetic),
    or the per-example mean under ``aggregate_mode="example-mean"``.
    """
    if suite.n_pairs == 0:
        raise EvaluatorError("cannot evaluate an empty suite")
    if aggregate_mode not in ("paradigm-mean", "example-mean"):
        raise EvaluatorError(f"unknown aggregate mode {aggregate_mode!r}")
    counts: dict[str, tuple[int, int]] = {}
    failures: list[str] = []
    use_batch = hasattr(scorer, "score_many")
    for paradigm in suite.paradigms:
        pairs = suite.pairs_by_paradigm[paradigm]
        correct = 0
        total = 0
        if use_batch:
            texts: list[str] = []
            for pair in pairs:
                texts.append(pair.sentence_good)
                texts.append(pair.sentence_bad)
            try:
                scores = scorer.score_many(texts)
            except Exception as exc:
                failures.append(f"{paradigm}: {exc}")
                scores = None
            if scores is not None:
                for i, _pair in enumerate(pairs):
                    total += 1
                    if scores[2 * i] > scores[2 * i + 1]:
                        correct += 1
        else:
            for pair in pairs:
                try:
                    _, _, ok = score_pair(scorer, pair)
                except EvaluatorError as exc:
                    failures.append(str(exc))
                    continue
                total += 1
                if ok:
                    correct += 1
        counts[paradigm] = (correct, total)

    accuracy = {
        paradigm: (100.0 * c / t if t else 0.0) for paradigm, (c, t) in counts.items()
    }
    scored = {p: ct for p, ct in counts.items() if ct[1] > 0}
    if aggregate_mode == "paradigm-mean":
        fractions = [Fraction(c, t) for c, t in scored.values()]
        aggregate = float(100 * sum(fractions) / len(fractions)) if fractions else 0.0
    else:
        total_correct = sum(c for c, _ in scored.values())
        total_pairs = sum(t for _, t in scored.values())
        aggregate = float(100 * Fraction(total_correct, total_pairs)) if total_pairs else 0.0
    return EvalReport(
        accuracy_by_paradigm=accuracy,
        counts_by_paradigm=counts,
        aggregate=aggregate,
        scorer=scorer.identity,
        checkpoint_step=checkpoint_step,
        suite_hash=suite.content_hash(),
        aggregate_mode=aggregate_mode,
        failures=failures,
    )


def learning_curve(
    scorers_by_step: Sequence[tuple[int, Scorer]],
    suite: EvalSuite,
    paradigms: Sequence[str] | None = None,
) -> str:
    """Long-form CSV of per-paradigm accuracy across checkpoint steps.

    Steps must be strictly increasing. Columns match the report CSV so the
    same plotting path consumes both.
    """
    if not scorers_by_step:
        raise EvaluatorError("need at least one checkpoint to build a curve")
    steps = [step for step, _ in scorers_by_step]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise EvaluatorError(f"checkpoint steps must be strictly increasing, got {steps}")
    wanted = set(paradigms) if paradigms is not None else None
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["paradigm", "accuracy", "n_pairs", "checkpoint_step", "scorer"])
    for step, scorer in scorers_by_step:
        report = evaluate(scorer, suite, checkpoint_step=step)
        for paradigm in sorted(report.accuracy_by_paradigm):
            if wanted is not None and paradigm not in wanted:
                continue
            _, total = report.counts_by_paradigm[paradigm]
            writer.writerow(
                [
                    paradigm,
                    f"{report.accuracy_by_paradigm[paradigm]:.10g}",
                    total,
                    step,
                    scorer.identity,
                ]
            )
    return buf.getvalue()


def build_desk_suite(specs: Mapping, pairs_per_paradigm: int, seed: int) -> EvalSuite:
    """Synthetic suite from the template machinery; seeded and reproducible."""
    from .paradigms import make_minimal_pair
    from .rng import Rng, derive_seed

    groups: dict[str, list[MinimalPair]] = {}
    for paradigm in sorted(specs):
        spec = specs[paradigm]
        rng = Rng(derive_seed(seed, "suite", paradigm))
        pairs = []
        for i in range(pairs_per_paradigm):
            pairs.append(make_minimal_pair(spec, rng, uid=f"{paradigm}-{i:04d}"))
        groups[paradigm] = pairs
    return EvalSuite(pairs_by_paradigm=groups, provenance="desk-synthetic")
