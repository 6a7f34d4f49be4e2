"""Genre taxonomy and frequency-ranked lemma pool with deterministic sampling.

The taxonomy drives stylistic diversity (a genre and one of its subgenres per
generated document); the lemma pool drives lexical diversity (a handful of
required lemmas per document). Both are read-only after load, so concurrent
samplers only need their own private Rng.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .rng import Rng

EXPECTED_GENRE_COUNT = 39
DEFAULT_LEMMA_LIMIT = 10_000
DEFAULT_LEMMAS_PER_DOC = 6


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class GenreTaxonomy:
    """Ordered (genre, subgenres) entries; genre names unique."""

    entries: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        names = [genre for genre, _ in self.entries]
        if len(set(names)) != len(names):
            raise LexiconError("duplicate genre names in taxonomy")
        for genre, subs in self.entries:
            if not subs:
                raise LexiconError(f"genre {genre!r} has no subgenres")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def genres(self) -> list[str]:
        return [genre for genre, _ in self.entries]


@dataclass(frozen=True)
class LemmaPool:
    """Frequency-ranked lemmas (rank 1 = most frequent), stopword-free.

    ``requested`` records the limit passed to the loader; when the input had
    fewer eligible lemmas, ``is_short`` flags the shortfall instead of
    raising.
    """

    lemmas: tuple[str, ...]
    requested: int
    source: str = ""

    def __len__(self) -> int:
        return len(self.lemmas)

    @property
    def is_short(self) -> bool:
        return len(self.lemmas) < self.requested

    def rank(self, lemma: str) -> int:
        return self.lemmas.index(lemma) + 1


def _data_path(name: str) -> Path:
    return Path(str(resources.files("paradigmforge").joinpath("data", name)))


def load_taxonomy(path: str | Path | None = None) -> GenreTaxonomy:
    """Parse the taxonomy file: ``genre<TAB>sub1|sub2|...`` per line.

    Lines starting with ``#`` and blank lines are ignored.
    """
    path = Path(path) if path is not None else _data_path("genres.txt")
    entries: list[tuple[str, tuple[str, ...]]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise LexiconError(f"{path}:{lineno}: expected 'genre<TAB>subgenres'")
        genre, _, subs = line.partition("\t")
        subgenres = tuple(s.strip() for s in subs.split("|") if s.strip())
        if not subgenres:
            raise LexiconError(f"{path}:{lineno}: genre {genre!r} lists no subgenres")
        entries.append((genre.strip(), subgenres))
    return GenreTaxonomy(entries=tuple(entries))


def load_stopwords(path: str | Path | None = None) -> set[str]:
    path = Path(path) if path is not None else _data_path("stopwords.txt")
    return {w.strip() for w in path.read_text(encoding="utf-8").split() if w.strip()}


def load_lemma_pool(
    frequency_file: str | Path,
    stopwords: set[str],
    limit: int,
) -> LemmaPool:
    """Top ``limit`` non-stopword alphabetic lemmas by count.

    The file holds ``word<TAB>count`` lines in any order; sorting happens
    here (count descending, then lemma ascending), so the result is invariant
    under permutation of input lines. Duplicate words keep their
    highest-count entry. Fewer than ``limit`` eligible lemmas is not an
    error; the shortfall is visible via ``LemmaPool.is_short``.
    """
    if limit < 0:
        raise LexiconError(f"limit must be non-negative, got {limit}")
    path = Path(frequency_file)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LexiconError(f"cannot read frequency file {path}: {exc}") from exc

    best: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconError(f"{path}:{lineno}: expected 'word<TAB>count'")
        word, count_s = parts
        word = word.strip().lower()
        try:
            count = int(count_s.strip())
        except ValueError:
            raise LexiconError(f"{path}:{lineno}: count {count_s.strip()!r} is not an integer")
        if not word.isalpha() or word in stopwords:
            continue
        if count > best.get(word, -1):
            best[word] = count
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    lemmas = tuple(word for word, _ in ranked[:limit])
    return LemmaPool(lemmas=lemmas, requested=limit, source=str(path))


def default_lemma_pool(limit: int = DEFAULT_LEMMA_LIMIT) -> LemmaPool:
    """Pool from the shipped frequency file and shipped stopword list."""
    return load_lemma_pool(_data_path("lemma_counts.txt"), load_stopwords(), limit)


def sample_style(rng: Rng, taxonomy: GenreTaxonomy) -> tuple[str, str]:
    """Uniform genre, then uniform subgenre within it; exactly two draws."""
    genre, subgenres = taxonomy.entries[rng.below(len(taxonomy.entries))]
    return genre, subgenres[rng.below(len(subgenres))]


def sample_lemmas(rng: Rng, pool: LemmaPool, k: int) -> list[str]:
    """k distinct lemmas, uniform without replacement, in draw order."""
    if k > len(pool):
        raise LexiconError(f"requested {k} lemmas from a pool of {len(pool)}")
    return [pool.lemmas[i] for i in rng.sample_without_replacement(len(pool), k)]
