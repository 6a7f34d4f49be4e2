"""Byte-level BPE tokenizer: the token currency for budgeting and training.

The base alphabet is the 256 raw bytes, so any byte string round-trips with
no unknown-token path. Three specials (BOS, EOS, DOC_SEP) sit right after the
byte block; learned merges follow. Training is greedy highest-frequency pair
merging with a lexicographic tie-break, which makes the merge list a pure
function of the corpus (document order does not matter).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

VOCAB_FORMAT_VERSION = 1

N_BYTES = 256
BOS = 256
EOS = 257
DOC_SEP = 258
SPECIALS = {"BOS": BOS, "EOS": EOS, "DOC_SEP": DOC_SEP}
N_SPECIALS = len(SPECIALS)
FIRST_MERGE_ID = N_BYTES + N_SPECIALS

# How specials render when decoded (control-picture codepoints).
SPECIAL_RENDER = {BOS: "␂", EOS: "␃", DOC_SEP: "␞"}

_SENTINEL = -1  # separates strings in batched arrays; never matches a token id


@dataclass
class BpeVocab:
    """Learned merges plus the fixed byte/special blocks.

    ``merges[i]`` maps token ids ``(left, right)`` to the new token id
    ``FIRST_MERGE_ID + i``; parts always have lower ids than the merged token.
    """

    merges: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self._token_bytes: list[bytes] = [bytes([b]) for b in range(N_BYTES)]
        self._token_bytes += [b""] * N_SPECIALS  # specials carry no bytes
        for left, right in self.merges:
            self._token_bytes.append(self.token_bytes(left) + self.token_bytes(right))

    @property
    def size(self) -> int:
        return FIRST_MERGE_ID + len(self.merges)

    def token_bytes(self, token_id: int) -> bytes:
        if not 0 <= token_id < self.size:
            raise ValueError(f"unknown token id {token_id}")
        return self._token_bytes[token_id]

    def content_hash(self) -> str:
        """Stable hash of the learned merges; identifies the token currency."""
        h = hashlib.sha256()
        for left, right in self.merges:
            h.update(f"{left},{right};".encode("ascii"))
        return h.hexdigest()

    def save(self, path: str | Path) -> None:
        payload = {
            "version": VOCAB_FORMAT_VERSION,
            "specials": SPECIALS,
            # Token byte strings encoded latin-1 so arbitrary bytes survive JSON.
            "merges": [
                [self.token_bytes(l).decode("latin-1"), self.token_bytes(r).decode("latin-1")]
                for l, r in self.merges
            ],
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=True, indent=0), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BpeVocab":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("version") != VOCAB_FORMAT_VERSION:
            raise ValueError(f"unsupported vocab version {payload.get('version')!r}")
        by_bytes: dict[bytes, int] = {bytes([b]): b for b in range(N_BYTES)}
        merges: list[tuple[int, int]] = []
        for i, (left_s, right_s) in enumerate(payload["merges"]):
            left_b = left_s.encode("latin-1")
            right_b = right_s.encode("latin-1")
            if left_b not in by_bytes or right_b not in by_bytes:
                raise ValueError(f"merge {i} references unknown parts")
            merges.append((by_bytes[left_b], by_bytes[right_b]))
            by_bytes[left_b + right_b] = FIRST_MERGE_ID + i
        return cls(merges=merges)


def _iter_texts(corpus: Iterable) -> Iterator[str]:
    """Accept DocumentRecords, plain strings, or anything with a .text."""
    for item in corpus:
        if isinstance(item, str):
            yield item
        else:
            yield item.text


def _concat_byte_ids(texts: Sequence[str]) -> np.ndarray:
    """All texts as one int32 array of byte values, sentinel-separated.

    surrogateescape pairs with decode() so even strings holding smuggled
    non-UTF-8 bytes survive a round trip.
    """
    parts = []
    for text in texts:
        raw = np.frombuffer(
            text.encode("utf-8", errors="surrogateescape"), dtype=np.uint8
        ).astype(np.int32)
        parts.append(raw)
        parts.append(np.array([_SENTINEL], dtype=np.int32))
    if not parts:
        return np.empty(0, dtype=np.int32)
    return np.concatenate(parts)


def _match_positions(ids: np.ndarray, left: int, right: int) -> np.ndarray:
    """Positions of non-overlapping (left, right) occurrences, leftmost-first.

    Within a run of overlapping matches (only possible when left == right)
    every other occurrence is kept, which reproduces a left-to-right scan.
    """
    hits = np.nonzero((ids[:-1] == left) & (ids[1:] == right))[0]
    if hits.size == 0 or left != right:
        # Distinct-part matches can never overlap.
        return hits
    run_boundary = np.empty(hits.size, dtype=bool)
    run_boundary[0] = True
    np.not_equal(np.diff(hits), 1, out=run_boundary[1:])
    run_index = np.cumsum(run_boundary) - 1
    run_starts = hits[run_boundary]
    keep = ((hits - run_starts[run_index]) % 2) == 0
    return hits[keep]


def _apply_merge(ids: np.ndarray, positions: np.ndarray, new_id: int) -> np.ndarray:
    ids[positions] = new_id
    delete = np.zeros(ids.shape[0], dtype=bool)
    delete[positions + 1] = True
    return ids[~delete]


def train_bpe(corpus: Iterable, vocab_size: int) -> BpeVocab:
    """Learn merges by greedy highest-count pair replacement.

    Counting is corpus-global but never crosses document boundaries. Ties on
    count break toward the lexicographically smallest (left_bytes,
    right_bytes) pair so retraining is reproducible everywhere.
    """
    if vocab_size < FIRST_MERGE_ID:
        raise ValueError(
            f"vocab_size must be at least {FIRST_MERGE_ID} "
            f"(256 bytes + {N_SPECIALS} specials), got {vocab_size}"
        )
    texts = list(_iter_texts(corpus))
    ids = _concat_byte_ids(texts)
    vocab = BpeVocab()
    n_merges = vocab_size - FIRST_MERGE_ID
    for _ in range(n_merges):
        if ids.size < 2:
            break
        valid = (ids[:-1] != _SENTINEL) & (ids[1:] != _SENTINEL)
        if not valid.any():
            break
        current = vocab.size
        keys = ids[:-1][valid].astype(np.int64) * current + ids[1:][valid]
        counts = np.bincount(keys, minlength=current * current)
        best_count = counts.max()
        if best_count < 2:
            break
        candidates = np.nonzero(counts == best_count)[0]
        pairs = [(int(k) // current, int(k) % current) for k in candidates]
        left, right = min(
            pairs, key=lambda p: (vocab.token_bytes(p[0]), vocab.token_bytes(p[1]))
        )
        new_id = vocab.size
        vocab.merges.append((left, right))
        vocab._token_bytes.append(vocab.token_bytes(left) + vocab.token_bytes(right))
        positions = _match_positions(ids, left, right)
        ids = _apply_merge(ids, positions, new_id)
    return vocab


def _encode_array(vocab: BpeVocab, ids: np.ndarray) -> np.ndarray:
    """Apply all merges in rank order to a (possibly sentinel-joined) array."""
    for rank, (left, right) in enumerate(vocab.merges):
        positions = _match_positions(ids, left, right)
        if positions.size:
            ids = _apply_merge(ids, positions, FIRST_MERGE_ID + rank)
    return ids


def encode_many(vocab: BpeVocab, texts: Sequence[str]) -> list[np.ndarray]:
    """Encode a batch of texts in one vectorized pass over the merge list."""
    if not texts:
        return []
    ids = _encode_array(vocab, _concat_byte_ids(texts))
    boundaries = np.nonzero(ids == _SENTINEL)[0]
    out: list[np.ndarray] = []
    start = 0
    for b in boundaries:
        out.append(ids[start:b].copy())
        start = b + 1
    return out


def encode(vocab: BpeVocab, text: str) -> list[int]:
    """UTF-8 bytes -> base tokens -> merges in rank order. No implicit specials."""
    if not text:
        return []
    return encode_many(vocab, [text])[0].tolist()


def decode(vocab: BpeVocab, ids: Sequence[int]) -> str:
    """Exact byte inverse of encode; specials render as sentinel glyphs."""
    return decode_bytes(vocab, ids).decode("utf-8", errors="surrogateescape")


def encode_bytes(vocab: BpeVocab, raw: bytes) -> list[int]:
    """Encode raw bytes (round-trip partner of decode_bytes)."""
    if not raw:
        return []
    ids = _encode_array(vocab, np.frombuffer(raw, dtype=np.uint8).astype(np.int32))
    return ids.tolist()


def decode_bytes(vocab: BpeVocab, ids: Sequence[int]) -> bytes:
    """Byte-exact inverse of encode_bytes (specials render as UTF-8 glyphs)."""
    parts: list[bytes] = []
    for token_id in ids:
        token_id = int(token_id)
        if token_id in SPECIAL_RENDER:
            parts.append(SPECIAL_RENDER[token_id].encode("utf-8"))
        else:
            parts.append(vocab.token_bytes(token_id))
    return b"".join(parts)
