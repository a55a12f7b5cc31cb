"""Windowed token/lemma/PoS feature templates for the linear CRF.

For each offset in a +/-`window` range around the target position, four
attributes are emitted (surface, lowercased surface, lemma, PoS), plus one
constant bias feature. Out-of-range offsets use the BOS/EOS sentinels so
the feature count per token is always 4 * (2 * window + 1) + 1.
"""

from __future__ import annotations

from .tokenizer import Sentence

BOS = "BOS"
EOS = "EOS"

DEFAULT_WINDOW = 2


def _fmt_offset(d: int) -> str:
    return f"+{d}" if d > 0 else str(d)


def extract_features(
    sentence: Sentence, index: int, window: int = DEFAULT_WINDOW
) -> list[str]:
    """Feature strings for one token position, e.g. ``w[-1]=the``."""
    n = len(sentence.tokens)
    if not 0 <= index < n:
        raise IndexError(f"token index {index} out of range for {n} tokens")
    features = []
    for d in range(-window, window + 1):
        pos = index + d
        o = _fmt_offset(d)
        if 0 <= pos < n:
            tok = sentence.tokens[pos]
            features.append(f"w[{o}]={tok.surface}")
            features.append(f"wl[{o}]={tok.surface.lower()}")
            features.append(f"lemma[{o}]={tok.lemma}")
            features.append(f"pos[{o}]={tok.pos}")
        else:
            sentinel = BOS if pos < 0 else EOS
            features.append(f"w[{o}]={sentinel}")
            features.append(f"wl[{o}]={sentinel}")
            features.append(f"lemma[{o}]={sentinel}")
            features.append(f"pos[{o}]={sentinel}")
    features.append("bias")
    return features


def sentence_features(
    sentence: Sentence, window: int = DEFAULT_WINDOW
) -> list[list[str]]:
    return [
        extract_features(sentence, i, window) for i in range(len(sentence.tokens))
    ]
