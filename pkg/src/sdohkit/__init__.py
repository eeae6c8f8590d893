"""Schema-driven harness for clinical social-history event extraction:
annotation I/O, scoring, significance testing, and prompt pipelines."""

__version__ = "0.1.0"

from .corpus import AnnotatedDocument, Corpus, Document, Event, TextSpan
from .schema import ArgumentDef, EventTypeDef, Schema, default_schema, load_schema, write_schema

__all__ = [
    "AnnotatedDocument",
    "ArgumentDef",
    "Corpus",
    "Document",
    "Event",
    "EventTypeDef",
    "Schema",
    "TextSpan",
    "default_schema",
    "load_schema",
    "write_schema",
    "__version__",
]
