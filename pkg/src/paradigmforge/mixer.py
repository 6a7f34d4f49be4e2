"""Token-exact corpus composition with auditable manifests.

A mix replaces a fraction of baseline tokens with synthetic tokens at
document granularity, packs everything into fixed-length training sequences,
and leaves behind enough bookkeeping (per-document content hashes, per-tag
totals) for a later audit to recount the realized mix from the packed token
stream itself rather than trusting the plan.

Token accounting: a document's packed contribution is its encoded content
plus one DOC_SEP token. Plans fill an effective stream budget of
``(budget // L) * L`` tokens exactly, so materialized datasets chunk with no
dropped tail and every document span stays hash-verifiable.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .paradigms import ParadigmSpec, conforms, split_sentences
from .rng import stable_order_key
from .synthgen import DocumentRecord
from .tokenizer import DOC_SEP, BpeVocab, decode_bytes, encode_many

PACK_MAGIC = b"PFPK"
PACK_VERSION = 1
BASELINE_TAG = "baseline"


class MixerError(RuntimeError):
    pass


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8", errors="surrogateescape")).hexdigest()


@dataclass(frozen=True)
class ManifestEntry:
    doc_id: str
    source: str
    token_count: int  # encoded content tokens, excluding the DOC_SEP
    content_hash: str
    truncated: bool = False


@dataclass
class CorpusManifest:
    """Inventory of a document collection, order-sensitive and hashable."""

    entries: list[ManifestEntry] = field(default_factory=list)

    def totals(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.source] = out.get(e.source, 0) + e.token_count
        return out

    def contributions(self) -> dict[str, int]:
        """Per-tag packed contribution (content + one separator per doc)."""
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.source] = out.get(e.source, 0) + e.token_count + 1
        return out

    def global_hash(self) -> str:
        h = hashlib.sha256()
        for e in self.entries:
            h.update(
                f"{e.doc_id},{e.source},{e.token_count},{e.content_hash},{int(e.truncated)};".encode()
            )
        return h.hexdigest()

    def by_id(self) -> dict[str, ManifestEntry]:
        return {e.doc_id: e for e in self.entries}

    def to_json(self) -> list[dict]:
        return [
            {
                "doc_id": e.doc_id,
                "source": e.source,
                "token_count": e.token_count,
                "content_hash": e.content_hash,
                "truncated": e.truncated,
            }
            for e in self.entries
        ]

    @classmethod
    def from_json(cls, raw: Iterable[dict]) -> "CorpusManifest":
        return cls(
            entries=[
                ManifestEntry(
                    doc_id=r["doc_id"],
                    source=r["source"],
                    token_count=r["token_count"],
                    content_hash=r["content_hash"],
                    truncated=r.get("truncated", False),
                )
                for r in raw
            ]
        )


def build_manifest(docs: Sequence[DocumentRecord], vocab: BpeVocab) -> CorpusManifest:
    """Encode all documents (one vectorized pass) and inventory them.

    Fills ``token_count`` on the records as a side effect, so later stages
    can reuse the counts without re-encoding.
    """
    encoded = encode_many(vocab, [d.text for d in docs])
    entries = []
    for doc, ids in zip(docs, encoded):
        doc.token_count = max(1, len(ids))
        entries.append(
            ManifestEntry(
                doc_id=doc.id,
                source=doc.source,
                token_count=len(ids),
                content_hash=text_hash(doc.text),
            )
        )
    return CorpusManifest(entries=entries)


@dataclass(frozen=True)
class MixSpec:
    total_token_budget: int
    fractions: tuple[tuple[str, float], ...]  # (source tag, fraction)
    seed: int
    context_length: int

    def __post_init__(self):
        if self.total_token_budget < self.context_length:
            raise MixerError("token budget must be at least one context length")
        total = sum(f for _, f in self.fractions)
        if total > 1.0 + 1e-12:
            raise MixerError(f"fractions sum to {total}, exceeding 1")
        for tag, f in self.fractions:
            if not 0.0 <= f <= 1.0:
                raise MixerError(f"fraction for {tag!r} outside [0, 1]")
            if tag == BASELINE_TAG:
                raise MixerError("baseline is the implicit remainder, not a fraction")

    @property
    def stream_budget(self) -> int:
        """Effective stream length: budget rounded down to whole sequences."""
        L = self.context_length
        return (self.total_token_budget // L) * L


@dataclass(frozen=True)
class PlanEntry:
    doc_id: str
    source: str
    take_tokens: int  # content tokens included (< full count iff truncated)
    full_tokens: int
    content_hash: str

    @property
    def truncated(self) -> bool:
        return self.take_tokens < self.full_tokens

    @property
    def contribution(self) -> int:
        return self.take_tokens + 1


@dataclass(frozen=True)
class MixPlan:
    spec: MixSpec
    entries: tuple[PlanEntry, ...]  # selection order; packing order is seeded
    requested: dict[str, float]
    epsilon: float

    def contributions(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.source] = out.get(e.source, 0) + e.contribution
        return out


def _mean_contribution(entries: Sequence[ManifestEntry]) -> float:
    if not entries:
        return 0.0
    return sum(e.token_count + 1 for e in entries) / len(entries)


def default_epsilon(spec: MixSpec, synthetic: CorpusManifest) -> float:
    """Tolerance on realized fractions: one mean synthetic document, floored."""
    mean_doc = _mean_contribution(synthetic.entries)
    return max(mean_doc / spec.stream_budget, 1e-5) if spec.stream_budget else 1e-5


def _seeded(entries: Iterable[ManifestEntry], seed: int, label: str) -> list[ManifestEntry]:
    return sorted(entries, key=lambda e: stable_order_key(seed, label, e.doc_id))


def plan_mix(spec: MixSpec, baseline: CorpusManifest, synthetic: CorpusManifest) -> MixPlan:
    """Replacement mix: synthetic quotas carved out of a fixed total budget.

    Per requested tag, documents are taken in seeded random order until the
    quota is met; the crossing document is kept only if that lands closer to
    the quota. The remainder is filled with seeded-random baseline documents,
    truncating only the final one so the stream budget is hit exactly. The
    plan depends only on (spec, manifests) and is invariant under permutation
    of manifest entries.
    """
    stream_budget = spec.stream_budget
    entries: list[PlanEntry] = []
    requested = {tag: f for tag, f in spec.fractions}

    for tag, f in spec.fractions:
        pool = [e for e in synthetic.entries if e.source == tag]
        quota = f * stream_budget
        available = sum(e.token_count + 1 for e in pool)
        if available < quota:
            raise MixerError(
                f"synthetic pool for {tag!r} holds {available} tokens, "
                f"short of the {quota:.0f}-token quota"
            )
        cum = 0
        taken: list[ManifestEntry] = []
        for e in _seeded(pool, spec.seed, f"select:{tag}"):
            if cum >= quota:
                break
            c = e.token_count + 1
            if cum + c <= quota or abs(cum + c - quota) <= abs(cum - quota):
                taken.append(e)
                cum += c
            else:
                break
        entries.extend(
            PlanEntry(
                doc_id=e.doc_id,
                source=e.source,
                take_tokens=e.token_count,
                full_tokens=e.token_count,
                content_hash=e.content_hash,
            )
            for e in taken
        )

    remainder = stream_budget - sum(e.contribution for e in entries)
    if remainder < 0:
        raise MixerError("synthetic quotas exceed the stream budget")
    base_available = sum(e.token_count + 1 for e in baseline.entries)
    if base_available < remainder:
        raise MixerError(
            f"baseline pool holds {base_available} tokens, "
            f"short of the {remainder}-token remainder"
        )
    cum = 0
    for e in _seeded(baseline.entries, spec.seed, "select:baseline"):
        if cum >= remainder:
            break
        c = e.token_count + 1
        if cum + c <= remainder:
            entries.append(
                PlanEntry(
                    doc_id=e.doc_id,
                    source=e.source,
                    take_tokens=e.token_count,
                    full_tokens=e.token_count,
                    content_hash=e.content_hash,
                )
            )
            cum += c
        else:
            take = remainder - cum - 1
            entries.append(
                PlanEntry(
                    doc_id=e.doc_id,
                    source=e.source,
                    take_tokens=take,
                    full_tokens=e.token_count,
                    content_hash=e.content_hash,
                )
            )
            cum = remainder
    if cum != remainder:
        raise MixerError("internal accounting error while filling baseline remainder")

    return MixPlan(
        spec=spec,
        entries=tuple(entries),
        requested=requested,
        epsilon=default_epsilon(spec, synthetic),
    )


@dataclass
class PackedDataset:
    """Fixed-length training sequences plus the manifest in packed order."""

    tokens: np.ndarray  # [n_sequences, L] int32
    context_length: int
    vocab_hash: str
    manifest: CorpusManifest
    spec: MixSpec | None = None
    requested: dict[str, float] = field(default_factory=dict)
    epsilon: float = 0.0

    @property
    def n_sequences(self) -> int:
        return int(self.tokens.shape[0])

    def save(self, path: str | Path) -> None:
        path = Path(path)
        vocab_hex = self.vocab_hash.encode("ascii")
        assert len(vocab_hex) == 64
        header = struct.pack(
            "<4sIIQ", PACK_MAGIC, PACK_VERSION, self.context_length, self.n_sequences
        )
        with open(path, "wb") as handle:
            handle.write(header)
            handle.write(vocab_hex)
            handle.write(self.tokens.astype("<i4").tobytes(order="C"))
        sidecar = {
            "entries": self.manifest.to_json(),
            "requested": self.requested,
            "epsilon": self.epsilon,
            "spec": None
            if self.spec is None
            else {
                "total_token_budget": self.spec.total_token_budget,
                "fractions": list(map(list, self.spec.fractions)),
                "seed": self.spec.seed,
                "context_length": self.spec.context_length,
            },
        }
        Path(str(path) + ".manifest.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "PackedDataset":
        path = Path(path)
        with open(path, "rb") as handle:
            magic, version, L, n_seq = struct.unpack("<4sIIQ", handle.read(20))
            if magic != PACK_MAGIC:
                raise MixerError(f"{path}: not a packed dataset")
            if version != PACK_VERSION:
                raise MixerError(f"{path}: unsupported version {version}")
            vocab_hash = handle.read(64).decode("ascii")
            tokens = np.frombuffer(handle.read(), dtype="<i4").reshape(n_seq, L).copy()
        sidecar_path = Path(str(path) + ".manifest.json")
        manifest = CorpusManifest()
        requested: dict[str, float] = {}
        epsilon = 0.0
        spec = None
        if sidecar_path.exists():
            raw = json.loads(sidecar_path.read_text(encoding="utf-8"))
            manifest = CorpusManifest.from_json(raw["entries"])
            requested = raw.get("requested", {})
            epsilon = raw.get("epsilon", 0.0)
            if raw.get("spec"):
                s = raw["spec"]
                spec = MixSpec(
                    total_token_budget=s["total_token_budget"],
                    fractions=tuple((t, f) for t, f in s["fractions"]),
                    seed=s["seed"],
                    context_length=s["context_length"],
                )
        return cls(
            tokens=tokens,
            context_length=L,
            vocab_hash=vocab_hash,
            manifest=manifest,
            spec=spec,
            requested=requested,
            epsilon=epsilon,
        )


def materialize(
    plan: MixPlan,
    vocab: BpeVocab,
    documents: Mapping[str, DocumentRecord],
) -> PackedDataset:
    """Encode, shuffle, join with DOC_SEP, chunk into L-token sequences.

    The truncated budget-boundary document (if any) is pinned to the end of
    the stream so synthetic spans are never clipped by chunking. Any trailing
    partial chunk is dropped; with plan input the stream length is an exact
    multiple of L and nothing is lost.
    """
    for entry in plan.entries:
        if entry.doc_id not in documents:
            raise MixerError(f"plan references missing document {entry.doc_id!r}")
        actual = text_hash(documents[entry.doc_id].text)
        if actual != entry.content_hash:
            raise MixerError(
                f"document {entry.doc_id!r} hash mismatch vs plan "
                f"({actual[:12]} != {entry.content_hash[:12]})"
            )

    truncated = [e for e in plan.entries if e.truncated]
    whole = [e for e in plan.entries if not e.truncated]
    order = sorted(
        whole, key=lambda e: stable_order_key(plan.spec.seed, "pack", e.doc_id)
    ) + truncated

    encoded = encode_many(vocab, [documents[e.doc_id].text for e in order])
    pieces: list[np.ndarray] = []
    packed_entries: list[ManifestEntry] = []
    sep = np.array([DOC_SEP], dtype=np.int32)
    for entry, ids in zip(order, encoded):
        if len(ids) != entry.full_tokens:
            raise MixerError(
                f"document {entry.doc_id!r} encoded to {len(ids)} tokens, "
                f"plan expected {entry.full_tokens}"
            )
        take = ids[: entry.take_tokens]
        pieces.append(take)
        pieces.append(sep)
        included_hash = (
            entry.content_hash
            if not entry.truncated
            else hashlib.sha256(decode_bytes(vocab, take)).hexdigest()
        )
        packed_entries.append(
            ManifestEntry(
                doc_id=entry.doc_id,
                source=entry.source,
                token_count=int(entry.take_tokens),
                content_hash=included_hash,
                truncated=entry.truncated,
            )
        )
    stream = np.concatenate(pieces) if pieces else np.empty(0, dtype=np.int32)
    L = plan.spec.context_length
    n_seq = len(stream) // L
    if n_seq == 0:
        raise MixerError("plan yields no full sequence (budget >= L violated upstream)")
    tokens = stream[: n_seq * L].reshape(n_seq, L).astype(np.int32)
    return PackedDataset(
        tokens=tokens,
        context_length=L,
        vocab_hash=vocab.content_hash(),
        manifest=CorpusManifest(entries=packed_entries),
        spec=plan.spec,
        requested=dict(plan.requested),
        epsilon=plan.epsilon,
    )


@dataclass(frozen=True)
class MixAudit:
    realized: dict[str, float]
    requested: dict[str, float]
    deviations: dict[str, float]
    epsilon: float
    paradigm_sentence_counts: dict[str, int]
    total_tokens: int
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures and all(
            dev <= self.epsilon for dev in self.deviations.values()
        )

    def to_json(self) -> dict:
        return {
            "realized": self.realized,
            "requested": self.requested,
            "deviations": self.deviations,
            "epsilon": self.epsilon,
            "paradigm_sentence_counts": self.paradigm_sentence_counts,
            "total_tokens": self.total_tokens,
            "failures": list(self.failures),
            "passed": self.passed,
        }


def audit(
    dataset: PackedDataset,
    vocab: BpeVocab,
    sources: Mapping[str, CorpusManifest] | None = None,
    paradigm_specs: Mapping[str, ParadigmSpec] | None = None,
) -> MixAudit:
    """Recount the realized mix from the packed tokens themselves.

    Per-tag totals, per-document hashes, and construction counts are all
    recomputed from the token stream; the sidecar manifest supplies only the
    claimed tags, which are cross-checked against the source pools when
    given. Any inconsistency is a named failure.
    """
    if not dataset.manifest.entries:
        raise MixerError("dataset has no manifest; cannot audit")
    flat = dataset.tokens.reshape(-1)
    sep_positions = np.nonzero(flat == DOC_SEP)[0]
    spans: list[np.ndarray] = []
    start = 0
    for pos in sep_positions:
        spans.append(flat[start:pos])
        start = pos + 1
    trailing = flat[start:]

    failures: list[str] = []
    entries = dataset.manifest.entries
    if len(spans) != len(entries):
        failures.append(
            f"manifest lists {len(entries)} documents but the stream holds {len(spans)}"
        )
    if trailing.size:
        failures.append(f"{trailing.size} tokens after the final document separator")

    id_to_tag: dict[str, str] = {}
    if sources:
        for manifest in sources.values():
            for e in manifest.entries:
                id_to_tag[e.doc_id] = e.source

    per_tag: dict[str, int] = {}
    texts: list[str] = []
    for entry, span in zip(entries, spans):
        per_tag[entry.source] = per_tag.get(entry.source, 0) + len(span) + 1
        if len(span) != entry.token_count:
            failures.append(
                f"{entry.doc_id}: stream holds {len(span)} tokens, manifest says "
                f"{entry.token_count}"
            )
        raw = decode_bytes(vocab, span)
        if hashlib.sha256(raw).hexdigest() != entry.content_hash:
            failures.append(f"{entry.doc_id}: content hash mismatch")
        if id_to_tag and not entry.truncated:
            true_tag = id_to_tag.get(entry.doc_id)
            if true_tag is None:
                failures.append(f"{entry.doc_id}: not found in any source pool")
            elif true_tag != entry.source:
                failures.append(
                    f"{entry.doc_id}: tagged {entry.source!r} but source pool says "
                    f"{true_tag!r}"
                )
        texts.append(raw.decode("utf-8", errors="surrogateescape"))

    total = int(flat.size)
    realized = {tag: count / total for tag, count in per_tag.items()}
    requested = dict(dataset.requested)
    requested.setdefault(BASELINE_TAG, 1.0 - sum(dataset.requested.values()))
    deviations = {
        tag: abs(realized.get(tag, 0.0) - requested.get(tag, 0.0))
        for tag in set(realized) | set(requested)
    }

    counts: dict[str, int] = {}
    if paradigm_specs:
        for name, spec in paradigm_specs.items():
            n = 0
            for text in texts:
                for sentence in split_sentences(text):
                    if conforms(sentence, spec.template, spec.lexicon):
                        n += 1
            counts[name] = n

    return MixAudit(
        realized=realized,
        requested=requested,
        deviations=deviations,
        epsilon=dataset.epsilon,
        paradigm_sentence_counts=counts,
        total_tokens=total,
        failures=tuple(failures),
    )
