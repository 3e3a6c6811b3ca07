"""American Soundex, used for fuzzy vessel-name matching."""

from __future__ import annotations

_CODES = {
    "b": "1", "f": "1", "p": "1", "v": "1",
    "c": "2", "g": "2", "j": "2", "k": "2", "q": "2", "s": "2", "x": "2", "z": "2",
    "d": "3", "t": "3",
    "l": "4",
    "m": "5", "n": "5",
    "r": "6",
}


def soundex(text: str) -> str:
    """Standard 4-character Soundex code; empty input codes to "0000"."""
    letters = [c for c in text.lower() if c.isalpha()]
    if not letters:
        return "0000"
    head = letters[0].upper()
    out = [head]
    prev = _CODES.get(letters[0], "")
    for ch in letters[1:]:
        code = _CODES.get(ch, "")
        if code and code != prev:
            out.append(code)
            if len(out) == 4:
                break
        # h/w are transparent: they keep the previous code alive
        if ch not in ("h", "w"):
            prev = code
    return "".join(out).ljust(4, "0")


def sounds_like(name: str, probe: str) -> bool:
    """True iff the Soundex codes of the two strings agree.

    Multi-word names compare word by word when both sides have the same
    word count, so "West Coast" matches "West Cost" but not "West".
    """
    a_words = name.split()
    b_words = probe.split()
    if len(a_words) > 1 and len(a_words) == len(b_words):
        return all(soundex(x) == soundex(y) for x, y in zip(a_words, b_words))
    return soundex(name) == soundex(probe)
