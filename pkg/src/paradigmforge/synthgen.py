"""Synthetic document generation: remote LLM client plus offline fallback.

Each document is a short genre-styled text that embeds exactly one sentence
instantiating the target construction and works a handful of required lemmas
into the prose. The online path drives a chat-completion endpoint and
validates every reply mechanically; the offline path assembles documents
from fixed carrier frames so the whole pipeline runs hermetically.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import requests

from .paradigms import ParadigmSpec, conforms, instantiate, split_sentences
from .rng import Rng, derive_seed

SOURCES = ("baseline", "synthetic-targeted", "synthetic-random")

DEFAULT_TEMPERATURE = 0.7
DEFAULT_RETRIES = 3

BANNED_TERMS = (
    "grammar",
    "grammatical",
    "linguistics",
    "linguistic",
    "paradigm",
    "syntax",
    "syntactic",
    "example sentence",
)

PROMPT_TEMPLATE = """You are an expert linguist tasked with generating high-quality pre-training data for a small language model that specializes in formal linguistic competence (i.e., the knowledge of rules and statistical regularities of language).

You will be given:
- A linguistic paradigm along with its syntactic template.
- A target genre and a sub-genre.
- A set of lemmas that must appear in the text.

Your task is to generate a natural, fluent text that must include a sentence that demonstrates the given paradigm, and reads like a genuine piece of writing in the specified genre/sub-genre.

PARADIGM: {paradigm}
TEMPLATE: {template}

TARGET GENRE: {genre}
TARGET SUB-GENRE: {subgenre}

REQUIRED LEMMAS:
{formatted_lemmas}

INSTRUCTIONS:
- Do **not** mention grammar, linguistics, rules, or examples.
- Do **not** explain or comment on any construction.
- Avoid didactic tone, meta-language, or contrived sentence patterns.
- Preserve coherence, plausibility, and stylistic consistency appropriate to the genre.

Now go, generate the text.

OUTPUT:"""


class SynthgenError(RuntimeError):
    pass


class TransportError(SynthgenError):
    """Endpoint unreachable or non-success status; carries the job id."""

    def __init__(self, job_id: int, message: str):
        super().__init__(f"job {job_id}: {message}")
        self.job_id = job_id


class GenerationFailure(SynthgenError):
    """All attempts produced invalid documents; carries every attempt report."""

    def __init__(self, job_id: int, reports: list["ValidationReport"]):
        super().__init__(
            f"job {job_id}: {len(reports)} attempt(s) failed validation; "
            f"last report: {reports[-1]}"
        )
        self.job_id = job_id
        self.reports = reports

    @property
    def last_report(self) -> "ValidationReport":
        return self.reports[-1]


@dataclass(frozen=True)
class GenerationJob:
    """Everything needed to produce one document, online or offline.

    ``paradigm`` is None for style-matched control documents that must not
    contain any target construction.
    """

    job_id: int
    paradigm: str | None
    genre: str
    subgenre: str
    lemmas: tuple[str, ...]
    temperature: float = DEFAULT_TEMPERATURE
    seed: int = 0

    def __post_init__(self):
        if not self.lemmas:
            raise ValueError(f"job {self.job_id}: lemmas must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"job {self.job_id}: temperature {self.temperature} outside [0, 2]")


@dataclass
class DocumentRecord:
    id: str
    text: str
    source: str
    paradigm: str | None = None
    token_count: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"document {self.id}: text must be non-empty")
        if self.source not in SOURCES:
            raise ValueError(f"document {self.id}: unknown source {self.source!r}")
        if self.source == "synthetic-targeted" and not self.paradigm:
            raise ValueError(f"document {self.id}: targeted documents need a paradigm")
        if self.token_count is not None and self.token_count < 1:
            raise ValueError(f"document {self.id}: token_count must be >= 1 once set")


@dataclass(frozen=True)
class ValidationReport:
    has_conforming_sentence: bool
    missing_lemmas: tuple[str, ...]
    banned_terms_found: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return (
            self.has_conforming_sentence
            and not self.missing_lemmas
            and not self.banned_terms_found
        )


def build_prompt(job: GenerationJob, template_display: str) -> str:
    """The generation prompt; a pure function of the job (byte-stable)."""
    formatted_lemmas = "\n".join(f"- {lemma}" for lemma in job.lemmas)
    return PROMPT_TEMPLATE.format(
        paradigm=job.paradigm or "",
        template=template_display,
        genre=job.genre,
        subgenre=job.subgenre,
        formatted_lemmas=formatted_lemmas,
    )


def validate_document(
    doc: DocumentRecord, spec: ParadigmSpec, lemmas: Sequence[str]
) -> ValidationReport:
    """Mechanical checks on one document against its generation contract."""
    has_conforming = any(
        conforms(sentence, spec.template, spec.lexicon)
        for sentence in split_sentences(doc.text)
    )
    lowered = doc.text.lower()
    missing = tuple(
        lemma
        for lemma in lemmas
        if not re.search(rf"\b{re.escape(lemma.lower())}\b", lowered)
    )
    banned = tuple(term for term in BANNED_TERMS if term in lowered)
    return ValidationReport(
        has_conforming_sentence=has_conforming,
        missing_lemmas=missing,
        banned_terms_found=banned,
    )


class ChatEndpoint(Protocol):
    """Minimal chat-completion surface the generator depends on."""

    identity: str

    def complete(self, prompt: str, temperature: float) -> str: ...


class HttpChatEndpoint:
    """Client for an OpenAI-style chat-completions endpoint.

    POSTs ``{base_url}/v1/chat/completions`` with a single user message and
    reads ``choices[0].message.content``. The bearer token comes from the
    ``PF_API_KEY`` environment variable; ``reasoning_effort`` is forwarded
    when set and is ignored by endpoints that lack it.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        reasoning_effort: str | None = None,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.reasoning_effort = reasoning_effort
        self.timeout = timeout
        self.session = session or requests.Session()
        self.identity = f"chat:{model}@{self.base_url}"

    def complete(self, prompt: str, temperature: float) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        if self.reasoning_effort is not None:
            body["reasoning_effort"] = self.reasoning_effort
        headers = {}
        api_key = os.environ.get("PF_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        response = self.session.post(
            f"{self.base_url}/v1/chat/completions",
            json=body,
            headers=headers,
            timeout=self.timeout,
        )
        if response.status_code != 200:
            raise RuntimeError(f"endpoint returned HTTP {response.status_code}")
        return response.json()["choices"][0]["message"]["content"]


def generate_document(
    job: GenerationJob,
    endpoint: ChatEndpoint,
    spec: ParadigmSpec,
    retries: int = DEFAULT_RETRIES,
) -> DocumentRecord:
    """One validated document from the endpoint, retrying the same prompt.

    Temperature supplies the variation between attempts; after the initial
    call plus ``retries`` retries without a valid reply, the failure carries
    every attempt's ValidationReport.
    """
    prompt = build_prompt(job, spec.template.display)
    reports: list[ValidationReport] = []
    for _ in range(1 + retries):
        try:
            text = endpoint.complete(prompt, job.temperature)
        except Exception as exc:
            raise TransportError(job.job_id, str(exc)) from exc
        doc = DocumentRecord(
            id=f"synthetic-targeted-{job.job_id:06d}",
            text=text.strip() or " ",
            source="synthetic-targeted",
            paradigm=job.paradigm,
            meta={
                "genre": job.genre,
                "subgenre": job.subgenre,
                "lemmas": list(job.lemmas),
                "generator": endpoint.identity,
            },
        )
        report = validate_document(doc, spec, job.lemmas)
        reports.append(report)
        if report.passed:
            return doc
    raise GenerationFailure(job.job_id, reports)


def generate_documents(
    jobs: Sequence[GenerationJob],
    make_one: Callable[[GenerationJob], DocumentRecord],
    max_in_flight: int = 4,
) -> list[DocumentRecord]:
    """Run independent jobs concurrently; results come back in job_id order."""
    if max_in_flight <= 1 or len(jobs) <= 1:
        results = [make_one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(make_one, jobs))
    return [doc for _, doc in sorted(zip((j.job_id for j in jobs), results))]


# Offline generator: fixed carrier frames. Frames must never instantiate any
# target template (no quantifier/auxiliary/wh openers, no "ever"/"there"/
# "It's" in template positions); a test scans generated corpora to confirm.

_OPENING_FRAMES = (
    "Welcome to this short {subgenre} feature from our {genre} collection.",
    "These {subgenre} notes were prepared for a {genre} audience.",
    "Today our {genre} series turns to {subgenre} material.",
    "This brief {subgenre} piece belongs to a larger {genre} archive.",
    "Our {genre} desk presents a compact look at {subgenre} topics.",
    "Readers following {subgenre} themes will find this {genre} entry useful.",
)

_LEMMA_FRAMES = (
    "The {lemmas} was noted in several reports.",
    "Many readers asked about the {lemmas} last season.",
    "Local records mention the {lemmas} more than once.",
    "The team reviewed the {lemmas} before moving on.",
    "Interest in the {lemmas} has grown steadily this year.",
    "One early note described the {lemmas} in careful terms.",
)

_PLAIN_FRAMES = (
    "The update reached our desk shortly before noon.",
    "Several details still deserve a closer look.",
    "Feedback from last month shaped this installment.",
    "A longer follow-up is planned for the coming weeks.",
    "Readers sent in thoughtful questions along the way.",
    "The archive keeps growing at a steady pace.",
)


def _lemma_phrase(lemmas: Sequence[str]) -> str:
    if len(lemmas) == 1:
        return lemmas[0]
    if len(lemmas) == 2:
        return f"{lemmas[0]} and the {lemmas[1]}"
    joined = ", the ".join(lemmas[:-1])
    return f"{joined}, and the {lemmas[-1]}"


def generate_offline(
    job: GenerationJob, spec: ParadigmSpec | None, source: str | None = None
) -> DocumentRecord:
    """Deterministic hermetic document for one job.

    Layout: genre-keyed boilerplate opening, filler sentences that consume
    every required lemma through fixed carrier frames, and (for targeted
    jobs) one instantiated construction at a seeded position. Always passes
    validate_document. ``source`` defaults to synthetic-targeted /
    synthetic-random by whether a template is given; pass "baseline" when
    assembling a hermetic base corpus.
    """
    if spec is None and job.paradigm is not None:
        raise ValueError(f"job {job.job_id}: paradigm {job.paradigm!r} but no template given")
    if spec is not None and job.paradigm != spec.paradigm:
        raise ValueError(f"job {job.job_id}: job/template paradigm mismatch")
    rng = Rng(derive_seed(job.seed, "offline-doc", str(job.job_id)))
    opening = _OPENING_FRAMES[rng.below(len(_OPENING_FRAMES))].format(
        genre=job.genre.lower(), subgenre=job.subgenre
    )

    k = len(job.lemmas)
    n_filler = min(max(4, k + rng.below(3)), 10)
    groups: list[list[str]] = [[] for _ in range(n_filler)]
    for i, lemma in enumerate(job.lemmas):
        groups[i % n_filler].append(lemma)
    fillers = []
    for group in groups:
        if group:
            frame = _LEMMA_FRAMES[rng.below(len(_LEMMA_FRAMES))]
            fillers.append(frame.format(lemmas=_lemma_phrase(group)))
        else:
            fillers.append(_PLAIN_FRAMES[rng.below(len(_PLAIN_FRAMES))])

    sentences = [opening] + fillers
    if spec is not None:
        target = instantiate(spec.template, spec.lexicon, rng)
        position = 1 + rng.below(len(sentences))
        sentences.insert(position, target)

    if source is None:
        source = "synthetic-targeted" if spec is not None else "synthetic-random"
    doc = DocumentRecord(
        id=f"{source}-{job.job_id:06d}",
        text=" ".join(sentences),
        source=source,
        paradigm=job.paradigm,
        meta={
            "genre": job.genre,
            "subgenre": job.subgenre,
            "lemmas": list(job.lemmas),
            "generator": "offline-v1",
        },
    )
    if spec is not None:
        report = validate_document(doc, spec, job.lemmas)
        if not report.passed:
            raise SynthgenError(f"offline generator produced an invalid document: {report}")
    return doc


def write_documents(path: str | Path, docs: Iterable[DocumentRecord]) -> None:
    """Newline-delimited JSON, one record per line."""
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "text": doc.text,
                        "source": doc.source,
                        "paradigm": doc.paradigm,
                        "token_count": doc.token_count,
                        "meta": doc.meta,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_documents(path: str | Path) -> list[DocumentRecord]:
    docs = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SynthgenError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            docs.append(
                DocumentRecord(
                    id=raw["id"],
                    text=raw["text"],
                    source=raw["source"],
                    paradigm=raw.get("paradigm"),
                    token_count=raw.get("token_count"),
                    meta=raw.get("meta", {}),
                )
            )
    return docs
