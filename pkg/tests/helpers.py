"""Test-side oracles and generators, independent of the library internals.

The matching oracle enumerates one-to-one matchings exhaustively, so it is
only usable on small documents; the scorer must agree with it on randomly
generated instances.
"""

import random

import numpy as np

from sdohkit.corpus import AnnotatedDocument, Corpus, Document, Event, TextSpan
from sdohkit.schema import Schema
from sdohkit.scoring import Counts, prf, score_corpus


def _enumerate_matchings(edges: list[list[int]], gi: int, used: int, size: int, arg_tp: int,
                         arg_tp_fn, state: dict) -> None:
    if gi == len(edges):
        if size > state["max_size"]:
            state["max_size"] = size
            state["best_arg_tp"] = arg_tp
        elif size == state["max_size"] and arg_tp > state["best_arg_tp"]:
            state["best_arg_tp"] = arg_tp
        return
    # gold gi unmatched
    _enumerate_matchings(edges, gi + 1, used, size, arg_tp, arg_tp_fn, state)
    for pi in edges[gi]:
        if not used & (1 << pi):
            _enumerate_matchings(
                edges, gi + 1, used | (1 << pi), size + 1, arg_tp + arg_tp_fn(gi, pi),
                arg_tp_fn, state,
            )


def _solve(golds: list[Event], preds: list[Event], edge_ok, arg_tp_fn) -> tuple[int, int]:
    """(max matching size, max summed arg TP over maximum matchings)."""
    edges = [[pi for pi, p in enumerate(preds) if edge_ok(g, p)] for g in golds]
    state = {"max_size": 0, "best_arg_tp": 0}
    _enumerate_matchings(edges, 0, 0, 0, 0, arg_tp_fn, state)
    return state["max_size"], state["best_arg_tp"]


def _overlap_ok(g: Event, p: Event) -> bool:
    return g.event_type == p.event_type and g.trigger.overlap_len(p.trigger) >= 1


def oracle_doc_tp(gold: list[Event], pred: list[Event]) -> dict:
    """Exhaustive-matching TP counts per event type at each level.

    trigger: maximum one-to-one matching over equivalent pairs.
    event: maximum matching over pairs that are equivalent and have equal
    argument maps. argument: the largest total of agreeing arguments
    achievable by any maximum-cardinality trigger matching.
    """
    out = {"trigger": {}, "argument": {}, "event": {}}
    types = sorted({e.event_type for e in gold} | {e.event_type for e in pred})
    for t in types:
        g = [e for e in gold if e.event_type == t]
        p = [e for e in pred if e.event_type == t]

        def arg_agree(gi, pi, g=g, p=p):
            return sum(1 for k, v in p[pi].arguments.items() if g[gi].arguments.get(k) == v)

        trig_tp, arg_tp = _solve(g, p, _overlap_ok, arg_agree)
        event_tp, _ = _solve(
            g, p, lambda a, b: _overlap_ok(a, b) and a.arguments == b.arguments, lambda gi, pi: 0
        )
        out["trigger"][t] = trig_tp
        out["argument"][t] = arg_tp
        out["event"][t] = event_tp
    return out


def perturb_events(doc: AnnotatedDocument, schema: Schema, rng: random.Random) -> list[Event]:
    """A plausible prediction for one document: mostly-right events with
    span jitter, label noise, argument noise, drops, and spurious extras."""
    text = doc.document.text
    preds = []
    for ev in doc.events:
        if rng.random() < 0.12:
            continue
        event_type = ev.event_type
        if rng.random() < 0.08:
            event_type = rng.choice(schema.event_type_names)
        start, end = ev.trigger.start, ev.trigger.end
        if rng.random() < 0.35:
            start = max(0, start + rng.randint(-3, 3))
            end = min(len(text), max(start + 1, end + rng.randint(-3, 3)))
        args = dict(ev.arguments)
        if args and rng.random() < 0.25:
            name = rng.choice(sorted(args))
            adef = schema.event_type(ev.event_type).argument(name)
            if adef is not None:
                args[name] = rng.choice(adef.subtypes)
        if args and rng.random() < 0.15:
            args.pop(rng.choice(sorted(args)))
        preds.append(Event(event_type, TextSpan(start, end, text[start:end]), args))
    if rng.random() < 0.3:
        for _ in range(rng.randint(1, 2)):
            et = rng.choice(schema.event_types)
            s = rng.randrange(0, max(1, len(text) - 8))
            e = min(len(text), s + rng.randint(2, 8))
            args = {a.name: rng.choice(a.subtypes) for a in et.required_arguments}
            preds.append(Event(et.name, TextSpan(s, e, text[s:e]), args))
    out, seen = [], set()
    for e in preds:
        key = (e.event_type, e.trigger.start, e.trigger.end)
        if e.trigger.start < e.trigger.end and key not in seen:
            seen.add(key)
            out.append(e)
    return out[:5]


def as_pred_corpus(gold: Corpus, pred_events: dict) -> Corpus:
    return Corpus(
        [AnnotatedDocument(d.document, pred_events.get(d.doc_id, [])) for d in gold.docs]
    )


def bootstrap_reference(gold: Corpus, pred_a: Corpus, pred_b: Corpus,
                        level: str, n_resamples: int, seed: int) -> tuple[float, float]:
    """From-scratch paired bootstrap: every resample rebuilds the drawn corpus
    (fresh doc ids for duplicates) and re-scores it with the full matcher.
    Returns (observed delta, p)."""

    def micro(g: Corpus, p: Corpus) -> Counts:
        return score_corpus(g, p).micro[level].counts

    doc_ids = sorted(gold.doc_ids())
    gold_map, a_map, b_map = gold.doc_map, pred_a.doc_map, pred_b.doc_map
    delta = prf(micro(gold, pred_a))[2] - prf(micro(gold, pred_b))[2]
    if delta <= 0:
        return delta, 1.0

    exceed = 0
    children = np.random.SeedSequence(seed).spawn(n_resamples)
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, len(doc_ids), size=len(doc_ids))

        def resampled(src_map):
            docs = []
            for j, i in enumerate(idx):
                orig = src_map.get(doc_ids[i])
                base = gold_map[doc_ids[i]].document
                doc = Document(f"rs-{j}", base.patient_id, base.text, base.note_date)
                docs.append(AnnotatedDocument(doc, list(orig.events) if orig else []))
            return Corpus(docs)

        g = resampled(gold_map)
        da = prf(micro(g, resampled(a_map)))[2] - prf(micro(g, resampled(b_map)))[2]
        if da > 2 * delta:
            exceed += 1
    return delta, (exceed + 1) / (n_resamples + 1)
