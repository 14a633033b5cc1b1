"""Legal citation extraction, normalization and citation recommendation."""

from .citeparse import (
    UNK_KEY,
    AuthorityIndex,
    AuthorityRecord,
    CitationClass,
    CitationVocabulary,
    NormalizedCitation,
    RawCitation,
    build_vocabulary,
    extract_citations,
    normalize,
)
from .corpus import Cite, Document, Metadata, Word, split_corpus, tokenize
from .ranking import RankedList

__version__ = "0.1.0"

__all__ = [
    "UNK_KEY",
    "AuthorityIndex",
    "AuthorityRecord",
    "CitationClass",
    "CitationVocabulary",
    "Cite",
    "Document",
    "Metadata",
    "NormalizedCitation",
    "RankedList",
    "RawCitation",
    "Word",
    "build_vocabulary",
    "extract_citations",
    "normalize",
    "split_corpus",
    "tokenize",
]
