"""Documents, events, and corpora: the annotation data model plus section
extraction, per-patient dedup, sampling, splits, and JSONL persistence.

Character offsets are Unicode code-point indices into the document text,
half-open ``[start, end)``. Corpus values are treated as immutable once
constructed; all operations return new corpora.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from datetime import date

from .schema import Schema, validate_event


class CorpusError(ValueError):
    """Invalid corpus data or operation arguments."""


# Generic topical-heading patterns and the social-history subset. Both are
# matched against whole lines (trailing whitespace ignored) and are meant to
# be replaced per institution; these defaults only cover common layouts.
DEFAULT_HEADING_PATTERNS = [
    r"[A-Za-z][A-Za-z0-9 /\-]{0,58}:",
    r"[A-Z][A-Z /\-]{2,58}",
]
DEFAULT_SOCIAL_HISTORY_PATTERNS = [
    r"(?i)social\s+history\s*:?",
    r"(?i)social\s+hx\s*:?",
]


@dataclass(frozen=True)
class TextSpan:
    """A contiguous character span and its surface text."""

    start: int
    end: int
    text: str

    def overlaps(self, other: "TextSpan") -> bool:
        return self.start < other.end and other.start < self.end

    def overlap_len(self, other: "TextSpan") -> int:
        return max(0, min(self.end, other.end) - max(self.start, other.start))


@dataclass
class Event:
    """A trigger span with an event-type label and argument subtype labels.

    Arguments share the trigger's span, so they are stored as a plain
    name-to-subtype mapping with no spans of their own.
    """

    event_type: str
    trigger: TextSpan
    arguments: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Document:
    doc_id: str
    patient_id: str
    text: str
    note_date: str | None = None


@dataclass
class AnnotatedDocument:
    document: Document
    events: list[Event] = field(default_factory=list)
    annotator_id: str | None = None

    @property
    def doc_id(self) -> str:
        return self.document.doc_id


@dataclass
class Corpus:
    docs: list[AnnotatedDocument] = field(default_factory=list)
    split_assignment: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def doc_map(self) -> dict[str, AnnotatedDocument]:
        return {d.doc_id: d for d in self.docs}

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.docs]

    def split(self, name: str) -> "Corpus":
        """Sub-corpus of documents assigned to one split."""
        keep = [d for d in self.docs if self.split_assignment.get(d.doc_id) == name]
        return Corpus(keep, {d.doc_id: name for d in keep})


SPLIT_NAMES = ("train", "validation", "test")


def document_violations(adoc: AnnotatedDocument, schema: Schema | None = None) -> list[str]:
    """Structural invariant check for one annotated document.

    Verifies trigger bounds, surface-text agreement with the document, and
    the one-event-per-(type, span) constraint; optionally also runs schema
    validation on each event.
    """
    out: list[str] = []
    text = adoc.document.text
    if not text:
        out.append("document text is empty")
    seen: set[tuple[str, int, int]] = set()
    for i, ev in enumerate(adoc.events):
        t = ev.trigger
        if not (0 <= t.start < t.end <= len(text)):
            out.append(f"event {i}: trigger span [{t.start},{t.end}) out of bounds")
            continue
        if text[t.start:t.end] != t.text:
            out.append(f"event {i}: trigger text does not match document at [{t.start},{t.end})")
        key = (ev.event_type, t.start, t.end)
        if key in seen:
            out.append(f"event {i}: duplicate ({ev.event_type}, [{t.start},{t.end})) trigger")
        seen.add(key)
        if schema is not None:
            out.extend(f"event {i}: {v}" for v in validate_event(schema, ev))
    return out


@dataclass(frozen=True)
class Section:
    """One topical section: the heading line plus the body that follows it.

    ``start``/``end`` delimit the whole section (heading line included) in the
    parent text; ``body`` is the text after the heading line, so
    ``parent[start:end]`` equals the heading line (with its newline, if any)
    followed by ``body``.
    """

    heading: str
    start: int
    end: int
    body: str


def _iter_lines(text: str):
    pos = 0
    for line in text.splitlines(keepends=True):
        yield pos, line
        pos += len(line)


def extract_sections(text: str, rules: list[str] | None = None) -> list[Section]:
    """Segment a note into sections at heading lines.

    A line is a heading when any rule pattern matches the whole line
    (trailing whitespace stripped). Each section runs from its heading to the
    next heading or the end of text; text before the first heading belongs to
    no section. No headings yields an empty list.
    """
    if rules is None:
        rules = DEFAULT_HEADING_PATTERNS
    if not rules:
        raise CorpusError("heading rule list must be non-empty")
    compiled = [re.compile(p) for p in rules]

    headings: list[tuple[int, int, str]] = []  # (line_start, body_start, heading_text)
    for pos, line in _iter_lines(text):
        stripped = line.rstrip()
        if stripped and any(rx.fullmatch(stripped) for rx in compiled):
            headings.append((pos, pos + len(line), line.rstrip("\r\n")))

    sections = []
    for i, (h_start, body_start, heading) in enumerate(headings):
        end = headings[i + 1][0] if i + 1 < len(headings) else len(text)
        body_start = min(body_start, end)
        sections.append(Section(heading, h_start, end, text[body_start:end]))
    return sections


def select_social_history(
    sections: list[Section], rules: list[str] | None = None
) -> Section | None:
    """First section whose heading matches a social-history pattern, if any."""
    if rules is None:
        rules = DEFAULT_SOCIAL_HISTORY_PATTERNS
    compiled = [re.compile(p) for p in rules]
    for sec in sections:
        heading = sec.heading.rstrip()
        if any(rx.fullmatch(heading) for rx in compiled):
            return sec
    return None


def dedup_per_patient(corpus: Corpus, seed: int) -> Corpus:
    """Keep exactly one document per patient, chosen uniformly per seed."""
    by_patient: dict[str, list[AnnotatedDocument]] = {}
    for d in corpus.docs:
        by_patient.setdefault(d.document.patient_id, []).append(d)
    rng = random.Random(f"dedup:{seed}")
    keep_ids = set()
    for patient_id in sorted(by_patient):
        docs = sorted(by_patient[patient_id], key=lambda d: d.doc_id)
        keep_ids.add(rng.choice(docs).doc_id)
    docs = [d for d in corpus.docs if d.doc_id in keep_ids]
    assignment = {k: v for k, v in corpus.split_assignment.items() if k in keep_ids}
    return Corpus(docs, assignment)


def sample_corpus(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Uniform random subsample of n documents, deterministic per seed."""
    if n > len(corpus.docs):
        raise CorpusError(f"cannot sample {n} documents from a corpus of {len(corpus.docs)}")
    rng = random.Random(f"sample:{seed}")
    chosen = set(rng.sample(sorted(d.doc_id for d in corpus.docs), n))
    docs = [d for d in corpus.docs if d.doc_id in chosen]
    assignment = {k: v for k, v in corpus.split_assignment.items() if k in chosen}
    return Corpus(docs, assignment)


def split_corpus(corpus: Corpus, sizes: tuple[int, int, int], seed: int) -> Corpus:
    """Randomly assign train/validation/test splits of the requested sizes."""
    n_train, n_val, n_test = sizes
    total = n_train + n_val + n_test
    if total > len(corpus.docs):
        raise CorpusError(
            f"requested split sizes sum to {total} but corpus has {len(corpus.docs)} documents"
        )
    ids = sorted(d.doc_id for d in corpus.docs)
    rng = random.Random(f"split:{seed}")
    rng.shuffle(ids)
    assignment: dict[str, str] = {}
    for doc_id in ids[:n_train]:
        assignment[doc_id] = "train"
    for doc_id in ids[n_train : n_train + n_val]:
        assignment[doc_id] = "validation"
    for doc_id in ids[n_train + n_val : total]:
        assignment[doc_id] = "test"
    return Corpus(list(corpus.docs), assignment)


# --- JSONL persistence ----------------------------------------------------

def _doc_to_obj(adoc: AnnotatedDocument, split: str | None) -> dict:
    obj = {
        "doc_id": adoc.document.doc_id,
        "patient_id": adoc.document.patient_id,
        "note_date": adoc.document.note_date,
        "text": adoc.document.text,
        "annotator_id": adoc.annotator_id,
        "events": [
            {
                "type": ev.event_type,
                "trigger": {"start": ev.trigger.start, "end": ev.trigger.end, "text": ev.trigger.text},
                "args": dict(ev.arguments),
            }
            for ev in adoc.events
        ],
    }
    if split is not None:
        obj["split"] = split
    return obj


def corpus_to_jsonl(corpus: Corpus) -> str:
    lines = [
        json.dumps(_doc_to_obj(d, corpus.split_assignment.get(d.doc_id)),
                   ensure_ascii=False, separators=(",", ":"))
        for d in corpus.docs
    ]
    return "".join(line + "\n" for line in lines)


def write_corpus_jsonl(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(corpus_to_jsonl(corpus))


def _parse_doc_obj(obj: dict, lineno: int) -> tuple[AnnotatedDocument, str | None]:
    def fail(msg):
        raise CorpusError(f"line {lineno}: {msg}")

    if not isinstance(obj, dict):
        fail("expected a JSON object")
    for key in ("doc_id", "patient_id", "text"):
        if not isinstance(obj.get(key), str) or not obj.get(key):
            fail(f"missing or empty string field {key!r}")
    note_date = obj.get("note_date")
    if note_date is not None:
        if not isinstance(note_date, str):
            fail("'note_date' must be a string or null")
        try:
            date.fromisoformat(note_date)
        except ValueError:
            fail(f"'note_date' {note_date!r} is not an ISO-8601 date")
    annotator = obj.get("annotator_id")
    if annotator is not None and not isinstance(annotator, str):
        fail("'annotator_id' must be a string or null")

    events = []
    raw_events = obj.get("events", [])
    if not isinstance(raw_events, list):
        fail("'events' must be a list")
    for j, e in enumerate(raw_events):
        if not isinstance(e, dict) or not isinstance(e.get("type"), str):
            fail(f"event {j}: missing string 'type'")
        trig = e.get("trigger")
        if (
            not isinstance(trig, dict)
            or not isinstance(trig.get("start"), int)
            or not isinstance(trig.get("end"), int)
            or not isinstance(trig.get("text"), str)
        ):
            fail(f"event {j}: trigger must have int start/end and string text")
        args = e.get("args", {})
        if not isinstance(args, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in args.items()
        ):
            fail(f"event {j}: args must map strings to strings")
        events.append(
            Event(e["type"], TextSpan(trig["start"], trig["end"], trig["text"]), dict(args))
        )

    split = obj.get("split")
    if split is not None and split not in SPLIT_NAMES:
        fail(f"unknown split {split!r}")

    adoc = AnnotatedDocument(
        Document(obj["doc_id"], obj["patient_id"], obj["text"], note_date), events, annotator
    )
    problems = document_violations(adoc)
    if problems:
        fail("; ".join(problems))
    return adoc, split


def corpus_from_jsonl(text: str) -> Corpus:
    docs: list[AnnotatedDocument] = []
    assignment: dict[str, str] = {}
    seen_ids: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        adoc, split = _parse_doc_obj(obj, lineno)
        if adoc.doc_id in seen_ids:
            raise CorpusError(f"line {lineno}: duplicate doc_id {adoc.doc_id!r}")
        seen_ids.add(adoc.doc_id)
        docs.append(adoc)
        if split is not None:
            assignment[adoc.doc_id] = split
    return Corpus(docs, assignment)


def read_corpus_jsonl(path) -> Corpus:
    with open(path, encoding="utf-8") as f:
        return corpus_from_jsonl(f.read())
