from __future__ import annotations

from enum import IntEnum


class CefrLevel(IntEnum):
    A1 = 1
    A2 = 2
    B1 = 3
    B2 = 4
    C1 = 5
    C2 = 6

    @property
    def label(self) -> str:
        return self.name

    @property
    def weight(self) -> int:
        return int(self)

    @classmethod
    def parse(cls, label: str) -> "CefrLevel":
        try:
            return cls[label.strip().upper()]
        except (KeyError, AttributeError):
            raise ValueError(f"unknown CEFR level {label!r}") from None


LEVEL_LABELS: tuple[str, ...] = tuple(level.name for level in CefrLevel)
NA = "N/A"
STOPWORD = "S"
PUNCT = "P"
# Full per-token label alphabet, in report order.
WORD_LABELS: tuple[str, ...] = LEVEL_LABELS + (NA, STOPWORD, PUNCT)
# Labels that take part in accuracy/F1 scoring.
SCORED_LABELS: tuple[str, ...] = (NA,) + LEVEL_LABELS


def is_level(label: str) -> bool:
    return label in LEVEL_LABELS
