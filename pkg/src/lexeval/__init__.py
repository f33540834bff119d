"""CEFR vocabulary profiling of learner text.

Each content word is matched to its candidate senses in a graded lexicon and a
language model picks the sense that fits the context; the sense's level becomes
the word's level. Baselines, essay features and evaluation helpers live
alongside.
"""

from lexeval.levels import CefrLevel, LEVEL_LABELS, WORD_LABELS
from lexeval.lexicon import LexEntry, Lexicon, parse_lexicon, lookup_candidates

__version__ = "0.1.0"

__all__ = [
    "CefrLevel",
    "LEVEL_LABELS",
    "WORD_LABELS",
    "LexEntry",
    "Lexicon",
    "parse_lexicon",
    "lookup_candidates",
    "__version__",
]
