"""Deterministic synthetic social-history corpora for desk-scale testing.

Documents are assembled from sentence templates with trigger phrases drawn
from a per-event-type phrase bank, so gold offsets are known at generation
time. Two extra guarantees beyond the basic invariants make the synthetic
data suitable for closed-loop pipeline tests:

* each event's trigger phrase occurs exactly once in its document, so
  grounding a predicted trigger text back to the note recovers the gold span;
* document texts are salted with a random encounter code, so text content
  identifies a document uniquely within a corpus.
"""

from __future__ import annotations

import random
from datetime import date, timedelta

from .corpus import AnnotatedDocument, Corpus, Document, Event, TextSpan
from .schema import EventTypeDef, Schema

PHRASE_BANK: dict[str, list[str]] = {
    "Alcohol": [
        "drinks beer on weekends",
        "occasional wine",
        "heavy drinking episodes",
        "denies any ethanol intake",
        "sober for two years",
    ],
    "Drug": [
        "marijuana exposure",
        "recreational cannabis",
        "denies illicit substances",
        "prior opioid misuse",
        "vaping THC",
    ],
    "Tobacco": [
        "smokes cigarettes",
        "half a pack daily",
        "quit smoking last year",
        "chews tobacco",
        "nicotine patches",
    ],
    "EducationAccess": [
        "attends third grade",
        "individualized education plan",
        "chronic school absences",
        "home schooled",
        "repeating a grade",
    ],
    "Employment": [
        "works two jobs",
        "recently laid off",
        "seeking employment",
        "on disability benefits",
        "night shift work",
    ],
    "FoodInsecurity": [
        "skips meals",
        "relies on the food bank",
        "receives WIC support",
        "ran out of groceries",
        "free lunch program",
    ],
    "LivingArrangement": [
        "lives with both parents",
        "stays with grandmother",
        "resides in foster care",
        "shares an apartment",
        "lives alone downtown",
    ],
    "MentalHealth": [
        "followed for anxiety",
        "depression screening positive",
        "sees a counselor",
        "ADHD medication",
        "mood concerns",
    ],
    "ProvisionalEventA": [
        "category alpha finding",
        "alpha domain exposure",
        "alpha support needs",
    ],
    "ProvisionalEventB": [
        "category beta finding",
        "beta domain exposure",
        "beta support needs",
    ],
}

_EVENT_TEMPLATES = [
    "Caregiver reports {p}.",
    "Notes mention {p}.",
    "History significant for {p}.",
    "Per mother, {p}.",
    "Chart review shows {p}.",
]

_FILLER_LINES = [
    "Reviewed with the family at today's visit.",
    "No additional psychosocial stressors were identified.",
    "Interpreter services were offered and declined.",
    "The patient was accompanied by a caregiver.",
    "Routine follow up was arranged.",
    "Immunizations are up to date.",
]

_NAMES = ["Alex", "Sam", "Jordan", "Riley", "Casey", "Morgan", "Taylor", "Jamie", "Avery", "Quinn"]

_OPENERS = [
    "Patient {name} seen for well child check.",
    "Clinic visit for {name}.",
    "{name} presents for follow up.",
]


def phrases_for(event_type: EventTypeDef) -> list[str]:
    """Trigger phrase bank for an event type, with a generic fallback for
    event types outside the bundled default schema."""
    bank = PHRASE_BANK.get(event_type.name)
    if bank:
        return bank
    low = "".join((" " + c.lower()) if c.isupper() else c for c in event_type.name).strip()
    return [f"{low} reported", f"{low} concern noted", f"history of {low}"]


def _sample_arguments(et: EventTypeDef, rng: random.Random, include_optional: bool | None = None) -> dict[str, str]:
    args = {}
    for adef in et.arguments:
        if adef.required:
            args[adef.name] = rng.choice(adef.subtypes)
        else:
            include = rng.random() < 0.5 if include_optional is None else include_optional
            if include:
                args[adef.name] = rng.choice(adef.subtypes)
    return args


def _assemble(
    rng: random.Random,
    specs: list[tuple[EventTypeDef, dict[str, str]]],
) -> tuple[str, list[Event]] | None:
    """Build note text embedding one trigger sentence per spec.

    Returns None when a trigger phrase ends up occurring more than once in
    the text (the caller resamples); otherwise every trigger phrase appears
    exactly once, at its recorded gold span.
    """
    name = rng.choice(_NAMES)
    code = "".join(rng.choice("abcdef0123456789") for _ in range(8))
    lines = [rng.choice(_OPENERS).format(name=name), f"Encounter {code}."]

    used_phrases: set[str] = set()
    placements: list[tuple[int, int, str, EventTypeDef, dict[str, str]]] = []
    offset = sum(len(l) + 1 for l in lines)
    for et, args in specs:
        candidates = [p for p in phrases_for(et) if p not in used_phrases]
        if not candidates:
            continue
        phrase = rng.choice(candidates)
        used_phrases.add(phrase)
        if rng.random() < 0.35:
            filler = rng.choice(_FILLER_LINES)
            lines.append(filler)
            offset += len(filler) + 1
        sentence = rng.choice(_EVENT_TEMPLATES).format(p=phrase)
        local = sentence.index(phrase)
        placements.append((offset + local, offset + local + len(phrase), phrase, et, args))
        lines.append(sentence)
        offset += len(sentence) + 1
    if rng.random() < 0.5:
        lines.append(rng.choice(_FILLER_LINES))

    text = "\n".join(lines)
    events = []
    for start, end, phrase, et, args in placements:
        if text.count(phrase) != 1 or text[start:end] != phrase:
            return None
        events.append(Event(et.name, TextSpan(start, end, phrase), args))
    return text, events


def _make_doc(
    rng: random.Random,
    doc_id: str,
    patient_id: str,
    specs: list[tuple[EventTypeDef, dict[str, str]]],
) -> AnnotatedDocument:
    for _ in range(30):
        built = _assemble(rng, specs)
        if built is not None:
            text, events = built
            note_date = (date(2012, 1, 1) + timedelta(days=rng.randrange(3652))).isoformat()
            return AnnotatedDocument(Document(doc_id, patient_id, text, note_date), events)
    # degenerate fallback: drop all events rather than loop forever
    built = _assemble(rng, [])
    assert built is not None
    text, events = built
    return AnnotatedDocument(Document(doc_id, patient_id, text, None), events)


def generate_synthetic(schema: Schema, n_docs: int, seed: int) -> Corpus:
    """Template-generated corpus of n documents with 0 to 5 gold events each.

    Deterministic per (schema, n_docs, seed). All generated annotations pass
    schema validation and the document invariants.
    """
    if n_docs < 0:
        raise ValueError("n_docs must be >= 0")
    docs = []
    patient_pool = max(1, int(n_docs * 0.9))
    for i in range(n_docs):
        rng = random.Random(f"synth:{seed}:{i}")
        n_events = rng.randint(0, 5)
        specs = []
        for _ in range(n_events):
            et = rng.choice(schema.event_types)
            specs.append((et, _sample_arguments(et, rng)))
        patient_id = f"pat-{seed}-{rng.randrange(patient_pool):05d}"
        docs.append(_make_doc(rng, f"syn-{seed}-{i:05d}", patient_id, specs))
    return Corpus(docs)


def generate_fewshot_train(schema: Schema, seed: int) -> Corpus:
    """Engineered train corpus guaranteeing every few-shot sampling class.

    Per event type: one document with exactly one event (all optional
    arguments present), one with two events (first carries all optionals),
    and one whose event omits every optional argument; plus two event-free
    documents that serve as the zero-trigger class for every type.
    """
    docs = []
    counter = 0

    def add(specs):
        nonlocal counter
        rng = random.Random(f"fst:{seed}:{counter}")
        doc_id = f"fst-{seed}-{counter:04d}"
        patient_id = f"fstpat-{seed}-{counter:04d}"
        docs.append(_make_doc(rng, doc_id, patient_id, specs))
        counter += 1

    add([])
    add([])
    for et in schema.event_types:
        rng = random.Random(f"fstargs:{seed}:{et.name}")
        add([(et, _sample_arguments(et, rng, include_optional=True))])
        add([
            (et, _sample_arguments(et, rng, include_optional=True)),
            (et, _sample_arguments(et, rng)),
        ])
        add([(et, _sample_arguments(et, rng, include_optional=False))])
    return Corpus(docs)
