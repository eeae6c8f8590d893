import pytest

from sdohkit.schema import Schema, EventTypeDef, ArgumentDef, default_schema


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def mini_schema():
    """Two event types with one argument each; small enough to hand-check."""
    return Schema(
        "mini-1",
        (
            EventTypeDef(
                "LivingArrangement",
                (ArgumentDef("Status", True, ("past", "current")),),
            ),
            EventTypeDef(
                "Employment",
                (ArgumentDef("Status", True, ("employed", "unemployed")),),
            ),
        ),
    )
