"""Offline-finding protocol: reference implementation and bounded checker."""

__version__ = "0.1.0"

from .engine import ScenarioBounds, TraceEngine  # noqa: F401
from .lemmas import builtin_lemmas, control_lemmas  # noqa: F401
from .checker import check_lemma, check_lemmas  # noqa: F401
