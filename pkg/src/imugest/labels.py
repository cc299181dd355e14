"""The ten-gesture label set and its stable integer encoding."""

from __future__ import annotations

from enum import IntEnum


class GestureLabel(IntEnum):
    """Gesture classes. The integer values are the model's class indices
    and must never be reordered: CSV files, checkpoints and confusion
    matrices all rely on this encoding."""

    CIRCLE = 0
    SEMICIRCLE = 1
    INFINITY = 2
    TILDE = 3
    TRIANGLE = 4
    SQUARE = 5
    ZIGZAG = 6
    VLINE = 7
    HLINE = 8
    LETTER_S = 9

    @property
    def csv_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "GestureLabel":
        """Case-insensitive lookup; raises KeyError with the valid names."""
        try:
            return cls[name.strip().upper()]
        except KeyError:
            valid = ", ".join(m.csv_name for m in cls)
            raise KeyError(f"unknown gesture label {name!r}; valid: {valid}") from None


LABEL_NAMES = tuple(m.csv_name for m in GestureLabel)
NUM_GESTURES = len(GestureLabel)
