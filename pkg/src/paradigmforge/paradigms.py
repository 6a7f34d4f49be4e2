"""Syntactic templates for the nine target constructions.

Each paradigm ships as a data file holding its slot sequence, a curated slot
lexicon (fillers with agreement tags), and a minimal corruption rule that
turns a grammatical instantiation into its ungrammatical counterpart. The
same machinery validates arbitrary text: ``conforms`` checks whether a
sentence is a well-formed instantiation of a template, which is how
generated documents are vetted and how injected constructions are counted
inside a mixed corpus.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .rng import Rng

# BLiMP UID strings for the nine paradigms this package can generate.
TARGET_PARADIGMS = (
    "only_npi_scope",
    "existential_there_quantifiers_2",
    "wh_vs_that_with_gap_long_distance",
    "matrix_question_npi_licensor_present",
    "principle_A_reconstruction",
    "sentential_subject_island",
    "left_branch_island_echo_question",
    "coordinate_structure_constraint_complex_left_branch",
    "principle_A_c_command",
)

# Phenomenon labels for report grouping; suite UIDs outside this map pass
# through under "other".
PHENOMENON_BY_PARADIGM = {
    "only_npi_scope": "npi_licensing",
    "matrix_question_npi_licensor_present": "npi_licensing",
    "existential_there_quantifiers_2": "quantifiers",
    "wh_vs_that_with_gap_long_distance": "filler_gap",
    "principle_A_reconstruction": "binding",
    "principle_A_c_command": "binding",
    "sentential_subject_island": "island_effects",
    "left_branch_island_echo_question": "island_effects",
    "coordinate_structure_constraint_complex_left_branch": "island_effects",
}

_EDGE_PUNCT = ".,!?;:\"'()[]{}‘’“”"
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


class ParadigmError(ValueError):
    pass


class CorruptionError(ParadigmError):
    """Corruption rule failed to produce a distinct ungrammatical string."""


@dataclass(frozen=True)
class Filler:
    """One surface string for a slot, with optional agreement tags."""

    text: str
    tags: dict = field(default_factory=dict)

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self.text.split())


@dataclass(frozen=True)
class TemplateElement:
    """Either a literal token run or a named slot."""

    literal: str | None = None
    slot: str | None = None
    kind: str = "literal"  # literal | open-class | closed-class

    def __post_init__(self):
        if (self.literal is None) == (self.slot is None):
            raise ParadigmError("element must be exactly one of literal/slot")


@dataclass(frozen=True)
class SyntacticTemplate:
    """Slot sequence of one paradigm plus its agreement constraints.

    ``display`` is the canonical one-line rendering of the template used in
    generation prompts.
    """

    paradigm: str
    elements: tuple[TemplateElement, ...]
    display: str
    constraints: tuple[dict, ...] = ()

    @property
    def slot_names(self) -> list[str]:
        return [e.slot for e in self.elements if e.slot is not None]


@dataclass(frozen=True)
class SlotLexicon:
    """Fillers per slot name; every filler yields grammatical output."""

    fillers: dict[str, tuple[Filler, ...]]

    def __getitem__(self, slot: str) -> tuple[Filler, ...]:
        return self.fillers[slot]

    def __contains__(self, slot: str) -> bool:
        return slot in self.fillers


@dataclass(frozen=True)
class MinimalPair:
    uid: str
    paradigm: str
    sentence_good: str
    sentence_bad: str

    def __post_init__(self):
        if self.sentence_good == self.sentence_bad:
            raise ParadigmError(f"{self.uid}: pair sentences are identical")
        delta = abs(len(self.sentence_good.split()) - len(self.sentence_bad.split()))
        if delta > 2:
            raise ParadigmError(f"{self.uid}: token-length delta {delta} exceeds 2")


@dataclass(frozen=True)
class ParadigmSpec:
    """Template + lexicon + corruption rule, as loaded from one data file."""

    template: SyntacticTemplate
    lexicon: SlotLexicon
    corruption: dict

    @property
    def paradigm(self) -> str:
        return self.template.paradigm


def _data_dir() -> Path:
    return Path(str(resources.files("paradigmforge").joinpath("data", "paradigms")))


def load_paradigm(paradigm: str, path: str | Path | None = None) -> ParadigmSpec:
    """Load one paradigm data file (JSON; schema documented in the README)."""
    path = Path(path) if path is not None else _data_dir() / f"{paradigm}.json"
    raw = json.loads(path.read_text(encoding="utf-8"))
    if raw["paradigm"] != paradigm:
        raise ParadigmError(f"{path}: file declares paradigm {raw['paradigm']!r}")
    elements = []
    for item in raw["elements"]:
        if "literal" in item:
            elements.append(TemplateElement(literal=item["literal"]))
        else:
            elements.append(
                TemplateElement(slot=item["slot"], kind=item.get("kind", "open-class"))
            )
    fillers = {
        slot: tuple(Filler(text=f["text"], tags=f.get("tags", {})) for f in items)
        for slot, items in raw["slots"].items()
    }
    template = SyntacticTemplate(
        paradigm=paradigm,
        elements=tuple(elements),
        display=raw["display"],
        constraints=tuple(raw.get("constraints", ())),
    )
    for slot in template.slot_names:
        if slot not in fillers or not fillers[slot]:
            raise ParadigmError(f"{path}: slot {slot!r} has no fillers")
    return ParadigmSpec(
        template=template, lexicon=SlotLexicon(fillers=fillers), corruption=raw["corruption"]
    )


def load_all_paradigms() -> dict[str, ParadigmSpec]:
    return {p: load_paradigm(p) for p in TARGET_PARADIGMS}


def _constraint_ok(constraint: dict, bound: dict[str, Filler], candidate_slot: str,
                   candidate: Filler) -> bool:
    """Check one constraint given already-bound slots and a candidate filler."""
    slot_a, slot_b = constraint["slots"]
    tag = constraint["tag"]
    if candidate_slot == slot_a:
        other = bound.get(slot_b)
    elif candidate_slot == slot_b:
        other = bound.get(slot_a)
    else:
        return True
    if other is None:
        return True
    mine = candidate.tags.get(tag)
    theirs = other.tags.get(tag)
    if mine is None or theirs is None:
        # Untagged fillers are wildcards for "match" but can never satisfy
        # "differ" (a wildcard cannot be shown distinct).
        return constraint["kind"] == "match"
    if constraint["kind"] == "match":
        return mine == theirs
    return mine != theirs


def _eligible(template: SyntacticTemplate, lexicon: SlotLexicon, slot: str,
              bound: dict[str, Filler]) -> list[Filler]:
    return [
        f
        for f in lexicon[slot]
        if all(_constraint_ok(c, bound, slot, f) for c in template.constraints)
    ]


def sample_assignment(template: SyntacticTemplate, lexicon: SlotLexicon,
                      rng: Rng) -> dict[str, Filler]:
    """One uniform filler per slot, honouring agreement constraints.

    Slots are bound in template order; each draw is uniform over the fillers
    that agree with everything bound so far. One rng draw per slot.
    """
    bound: dict[str, Filler] = {}
    for element in template.elements:
        if element.slot is None:
            continue
        options = _eligible(template, lexicon, element.slot, bound)
        if not options:
            raise ParadigmError(
                f"{template.paradigm}: no agreeing filler for slot {element.slot!r} "
                f"given {sorted(bound)} (lexicon authoring bug)"
            )
        bound[element.slot] = options[rng.below(len(options))]
    return bound


def _render(elements: Iterable[TemplateElement], assignment: dict[str, Filler]) -> str:
    words: list[str] = []
    for element in elements:
        if element.literal is not None:
            words.append(element.literal)
        else:
            words.append(assignment[element.slot].text)
    sentence = " ".join(words)
    return sentence[0].upper() + sentence[1:] + "."


def instantiate(template: SyntacticTemplate, lexicon: SlotLexicon, rng: Rng) -> str:
    """A grammatical sentence: slots filled, capitalized, period-terminated."""
    return _render(template.elements, sample_assignment(template, lexicon, rng))


def _corrupt(spec: ParadigmSpec, assignment: dict[str, Filler]) -> str:
    rule = spec.corruption
    elements = list(spec.template.elements)
    op = rule["op"]
    if op == "drop_element":
        del elements[rule["index"]]
        return _render(elements, assignment)
    if op == "reorder":
        return _render([elements[i] for i in rule["order"]], assignment)
    if op == "replace_element":
        elements[rule["index"]] = TemplateElement(literal=rule["literal"])
        return _render(elements, assignment)
    if op == "retag_slot":
        # Re-select the target slot's filler to agree with a different slot:
        # the minimal edit behind binding-theory contrasts.
        slot = rule["slot"]
        source = assignment[rule["copy_tags_from"]]
        tags = rule["tags"]
        replacement = None
        for f in spec.lexicon[slot]:
            if all(f.tags.get(t) == source.tags.get(t) for t in tags):
                replacement = f
                break
        if replacement is None:
            raise CorruptionError(
                f"{spec.paradigm}: no {slot!r} filler agreeing with "
                f"{source.text!r} on {tags}"
            )
        corrupted = dict(assignment)
        corrupted[slot] = replacement
        return _render(elements, corrupted)
    raise ParadigmError(f"{spec.paradigm}: unknown corruption op {op!r}")


def make_minimal_pair(spec: ParadigmSpec, rng: Rng, uid: str | None = None) -> MinimalPair:
    """Grammatical sentence plus its corruption over the same slot assignment."""
    assignment = sample_assignment(spec.template, spec.lexicon, rng)
    good = _render(spec.template.elements, assignment)
    bad = _corrupt(spec, assignment)
    if good == bad:
        raise CorruptionError(f"{spec.paradigm}: corruption left the sentence unchanged")
    if uid is None:
        digest = hashlib.sha256(f"{spec.paradigm}|{good}|{bad}".encode("utf-8")).hexdigest()
        uid = f"{spec.paradigm}-{digest[:12]}"
    return MinimalPair(uid=uid, paradigm=spec.paradigm, sentence_good=good, sentence_bad=bad)


def _clean_tokens(sentence: str) -> list[str]:
    tokens = []
    for raw in sentence.split():
        token = raw.strip(_EDGE_PUNCT)
        if token:
            tokens.append(token)
    return tokens


def _match_filler(tokens: list[str], pos: int, filler: Filler, at_start: bool) -> bool:
    words = filler.words
    if pos + len(words) > len(tokens):
        return False
    for offset, word in enumerate(words):
        token = tokens[pos + offset]
        if at_start and pos + offset == 0:
            if token.lower() != word.lower():
                return False
        elif token != word:
            return False
    return True


def conforms(sentence: str, template: SyntacticTemplate, lexicon: SlotLexicon) -> bool:
    """True iff the sentence is a well-formed instantiation of the template.

    Tokenization is whitespace splitting with edge punctuation stripped.
    Matching is greedy: at each slot the longest matching filler wins and
    there is no backtracking, which is linear-time and unambiguous for the
    curated lexicons. Case is ignored only on the first token. Agreement
    constraints must hold over the matched fillers, so structurally aligned
    but agreement-violating strings do not conform.
    """
    tokens = _clean_tokens(sentence)
    pos = 0
    bound: dict[str, Filler] = {}
    for element in template.elements:
        if element.literal is not None:
            if pos >= len(tokens):
                return False
            token = tokens[pos]
            expected = element.literal
            if pos == 0:
                if token.lower() != expected.lower():
                    return False
            elif token != expected:
                return False
            pos += 1
            continue
        candidates = sorted(lexicon[element.slot], key=lambda f: -len(f.words))
        matched = None
        for filler in candidates:
            if _match_filler(tokens, pos, filler, at_start=True):
                matched = filler
                break
        if matched is None:
            return False
        bound[element.slot] = matched
        pos += len(matched.words)
    if pos != len(tokens):
        return False
    for constraint in template.constraints:
        slot_a, slot_b = constraint["slots"]
        if slot_a in bound and slot_b in bound:
            if not _constraint_ok(constraint, {slot_a: bound[slot_a]}, slot_b, bound[slot_b]):
                return False
    return True


def split_sentences(text: str) -> list[str]:
    """Split on sentence punctuation followed by whitespace. No ML, no state."""
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def count_paradigm_sentences(documents: Iterable, spec: ParadigmSpec) -> int:
    """Number of sentences across all documents conforming to the template."""
    count = 0
    for doc in documents:
        text = doc if isinstance(doc, str) else doc.text
        for sentence in split_sentences(text):
            if conforms(sentence, spec.template, spec.lexicon):
                count += 1
    return count
