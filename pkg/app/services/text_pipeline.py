import logging
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from itertools import accumulate
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

from nltk.stem import PorterStemmer
from tqdm import tqdm

from app.core.config import settings
from app.core.errors import ConfigurationError, EmptyQueryError
from app.schemas.text import AnalyzerConfig, Document, Passage, Query, StopStructure
from app.services.formats import iter_lines

logger = logging.getLogger(__name__)

_stemmer = PorterStemmer()

DEFAULT_CONFIG = AnalyzerConfig()


@lru_cache(maxsize=1 << 16)
def _stem(token: str) -> str:
    return _stemmer.stem(token)


def _is_separator(ch: str) -> bool:
    if ch.isspace():
        return True
    cat = unicodedata.category(ch)
    return cat[0] == "P" or cat == "Cc"


def _raw_spans(text: str) -> List[Tuple[int, int]]:
    spans = []
    start = None
    for i, ch in enumerate(text):
        if _is_separator(ch):
            if start is not None:
                spans.append((start, i))
                start = None
        elif start is None:
            start = i
    if start is not None:
        spans.append((start, len(text)))
    return spans


def _normalize(raw: str, config: AnalyzerConfig) -> List[str]:
    piece = unicodedata.normalize("NFKC", raw) if config.unicode_normalization else raw
    if config.lowercase:
        piece = piece.lower()
    # NFKC may expand to separators ("…" -> "...")
    return [piece[s:e] for s, e in _raw_spans(piece)]


def analyze_with_offsets(text: str, lang: str, config: AnalyzerConfig = DEFAULT_CONFIG) -> List[Tuple[str, int, int]]:
    """Tokens with the character span of the source word each one came from."""
    stem = lang.lower() in config.stem_languages
    stopwords = config.stopword_list
    out = []
    for start, end in _raw_spans(text):
        for token in _normalize(text[start:end], config):
            if stopwords is not None and token in stopwords:
                continue
            out.append((_stem(token) if stem else token, start, end))
    return out


def analyze(text: str, lang: str, config: AnalyzerConfig = DEFAULT_CONFIG) -> List[str]:
    return [token for token, _, _ in analyze_with_offsets(text, lang, config)]


def source_text(doc: Document) -> str:
    if doc.title:
        return f"{doc.title}\n{doc.text}"
    return doc.text


def split_passages(
    doc: Document,
    window: int = 180,
    stride: int = 90,
    config: AnalyzerConfig = DEFAULT_CONFIG,
) -> List[Passage]:
    if window <= 0 or stride <= 0:
        raise ConfigurationError(f"window and stride must be positive, got window={window} stride={stride}")
    if stride > window:
        raise ConfigurationError(f"stride {stride} exceeds window {window}; passages would skip tokens")

    text = source_text(doc)
    analyzed = analyze_with_offsets(text, doc.lang, config)
    n = len(analyzed)
    if n == 0:
        return []
    byte_at = list(accumulate((len(ch.encode("utf-8")) for ch in text), initial=0))

    passages = []
    start = 0
    while True:
        end = min(start + window, n)
        chunk = analyzed[start:end]
        passages.append(Passage(
            doc_id=doc.id,
            index=len(passages),
            tokens=tuple(t for t, _, _ in chunk),
            char_span=(byte_at[chunk[0][1]], byte_at[chunk[-1][2]]),
            token_span=(start, end),
        ))
        if end >= n:
            break
        start += stride
    return passages


def split_documents(
    docs: Sequence[Document],
    window: int,
    stride: int,
    config: AnalyzerConfig = DEFAULT_CONFIG,
    threads: int = 1,
) -> List[List[Passage]]:
    def work(doc: Document) -> List[Passage]:
        return split_passages(doc, window, stride, config)

    progress = dict(total=len(docs), desc="Splitting", disable=not settings.PROGRESS)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(tqdm(pool.map(work, docs), **progress))
    return [work(doc) for doc in tqdm(docs, **progress)]


def _match_key(word: str) -> str:
    i, j = 0, len(word)
    while i < j and _is_separator(word[i]):
        i += 1
    while j > i and _is_separator(word[j - 1]):
        j -= 1
    return unicodedata.normalize("NFKC", word[i:j]).lower()


def load_stop_structure(path: Path) -> StopStructure:
    phrases = []
    words = set()
    for _, line in iter_lines(path):
        entry = line.split("#", 1)[0].split()
        if not entry:
            continue
        keys = tuple(_match_key(w) for w in entry)
        if len(keys) > 1:
            phrases.append(keys)
        else:
            words.add(keys[0])
    logger.debug("loaded %d stop phrases and %d stop words from %s", len(phrases), len(words), path)
    return StopStructure(phrases=tuple(phrases), words=frozenset(words))


def _drop_phrases(words: List[str], phrases: Sequence[Tuple[str, ...]]) -> List[str]:
    keys = [_match_key(w) for w in words]
    out = []
    i = 0
    while i < len(words):
        for phrase in phrases:
            if tuple(keys[i:i + len(phrase)]) == phrase:
                i += len(phrase)
                break
        else:
            out.append(words[i])
            i += 1
    return out


def _strip_text(text: str, phrases: Sequence[Tuple[str, ...]], stop_words: frozenset) -> str:
    words = text.split()
    while True:
        before = len(words)
        words = _drop_phrases(words, phrases)
        words = [w for w in words if _match_key(w) and _match_key(w) not in stop_words]
        if len(words) == before:
            return " ".join(words)


def strip_stop_structure(
    query: Query,
    stop_phrases: Iterable[Sequence[str] | str],
    stop_words: Iterable[str],
) -> Query:
    phrases = []
    for phrase in stop_phrases:
        parts = phrase.split() if isinstance(phrase, str) else phrase
        phrases.append(tuple(_match_key(p) for p in parts))
    # longest match first; equal lengths keep the configured order
    phrases.sort(key=len, reverse=True)
    words = frozenset(_match_key(w) for w in stop_words)

    title = _strip_text(query.title, phrases, words)
    if not title:
        raise EmptyQueryError(f"query {query.id} is empty after stop-structure removal")
    description = _strip_text(query.description, phrases, words) if query.description else None
    return query.model_copy(update={"title": title, "description": description or None})


def strip_with(query: Query, stop: StopStructure) -> Query:
    return strip_stop_structure(query, stop.phrases, stop.words)


def analyze_query(query: Query, config: AnalyzerConfig = DEFAULT_CONFIG, fields: str = "title+description") -> List[str]:
    tokens = analyze(query.text(fields), query.lang, config)
    if not tokens:
        raise EmptyQueryError(f"query {query.id} has no terms after analysis")
    return tokens
