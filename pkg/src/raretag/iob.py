"""IOB2 tag codec: project character-offset entities onto tokens and back.

Tags are plain strings from the closed 9-tag set ("O" plus B-/I- for each
entity type). A token counts as covered by an entity when its character
range intersects any fragment; per entity the first covered token gets
B-, every later covered token gets I-. Discontinuous entities are
flattened this way (only the very first token carries B-), which loses
the gap: decoding such a sequence yields one span per contiguous run.
"""

from __future__ import annotations

from dataclasses import dataclass

from .brat import EntityAnnotation, EntityType
from .tokenizer import Sentence, Token

OUTSIDE = "O"

TAGS: list[str] = [OUTSIDE] + [
    f"{prefix}-{etype.value}" for etype in EntityType for prefix in ("B", "I")
]

TAG_INDEX: dict[str, int] = {tag: i for i, tag in enumerate(TAGS)}


class IobError(ValueError):
    pass


def tag_parts(tag: str) -> tuple[str | None, str | None]:
    """("B"|"I", type name) for entity tags, (None, None) for "O"."""
    if tag == OUTSIDE:
        return None, None
    prefix, _, name = tag.partition("-")
    if prefix not in ("B", "I") or not name:
        raise IobError(f"malformed tag {tag!r}")
    return prefix, name


def is_known_tag(tag: str) -> bool:
    return tag in TAG_INDEX


@dataclass(frozen=True)
class TypedSpan:
    type: str
    token_start: int
    token_end: int  # exclusive

    def __post_init__(self):
        if self.token_start >= self.token_end:
            raise ValueError("empty span")


@dataclass
class TaggedSentence:
    tokens: list[Token]
    tags: list[str]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags"
            )


def _covered_token_indices(
    sentence: Sentence, entity: EntityAnnotation
) -> list[int]:
    covered = []
    for i, tok in enumerate(sentence.tokens):
        if any(tok.start < f.end and f.start < tok.end for f in entity.fragments):
            covered.append(i)
    return covered


def encode(sentence: Sentence, entities: list[EntityAnnotation]) -> TaggedSentence:
    """Tag a sentence's tokens from overlap-resolved entities.

    Fragments outside the sentence's character range are ignored. Two
    entities claiming the same token means overlap resolution was skipped
    and is a hard error.
    """
    tags = [OUTSIDE] * len(sentence.tokens)
    claimed: dict[int, str] = {}
    for ent in entities:
        covered = _covered_token_indices(sentence, ent)
        if not covered:
            continue
        for idx in covered:
            if idx in claimed:
                raise IobError(
                    f"token {idx} claimed by both {claimed[idx]} and {ent.id}; "
                    "entities must be overlap-resolved before encoding"
                )
            claimed[idx] = ent.id
        tags[covered[0]] = f"B-{ent.type.value}"
        for idx in covered[1:]:
            tags[idx] = f"I-{ent.type.value}"
    return TaggedSentence(list(sentence.tokens), tags)


def decode(tags: list[str]) -> list[TypedSpan]:
    """Extract typed spans from any tag sequence, repairing invalid runs.

    An I-X without a same-type B/I predecessor opens a new span (as if it
    were B-X); an I-Y directly after an X run closes X and opens Y. Total
    on arbitrary input.
    """
    spans: list[TypedSpan] = []
    open_type: str | None = None
    open_start = 0
    for i, tag in enumerate(tags):
        prefix, name = tag_parts(tag)
        if prefix is None:
            if open_type is not None:
                spans.append(TypedSpan(open_type, open_start, i))
                open_type = None
        elif prefix == "B" or name != open_type:
            if open_type is not None:
                spans.append(TypedSpan(open_type, open_start, i))
            open_type = name
            open_start = i
    if open_type is not None:
        spans.append(TypedSpan(open_type, open_start, len(tags)))
    return spans


def spans_to_tags(spans: list[TypedSpan], length: int) -> list[str]:
    """Inverse of decode for non-overlapping spans over `length` tokens."""
    tags = [OUTSIDE] * length
    for span in spans:
        tags[span.token_start] = f"B-{span.type}"
        for i in range(span.token_start + 1, span.token_end):
            tags[i] = f"I-{span.type}"
    return tags


def validate(tags: list[str]) -> list[int]:
    """Indices where an I-X tag lacks a same-type B-X/I-X predecessor."""
    violations = []
    for i, tag in enumerate(tags):
        prefix, name = tag_parts(tag)
        if prefix != "I":
            continue
        if i == 0:
            violations.append(i)
            continue
        prev_prefix, prev_name = tag_parts(tags[i - 1])
        if prev_prefix is None or prev_name != name:
            violations.append(i)
    return violations
