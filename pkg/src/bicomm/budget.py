"""Kernel-evaluation accounting for the resource cap."""

from __future__ import annotations

import contextlib
import contextvars

__all__ = ["ResourceCapExceeded", "evaluation_budget", "charge", "evaluations"]


class ResourceCapExceeded(RuntimeError):
    """Raised before a batch that would push the evaluation count past the cap."""


_state: contextvars.ContextVar = contextvars.ContextVar("bicomm_budget", default=None)


@contextlib.contextmanager
def evaluation_budget(cap: float | None):
    """Count kernel evaluations inside the block and refuse batches beyond ``cap``."""
    st = {"cap": cap, "count": 0}
    tok = _state.set(st)
    try:
        yield st
    finally:
        _state.reset(tok)


def charge(n: int) -> None:
    st = _state.get()
    if st is None:
        return
    if st["cap"] is not None and st["count"] + n > st["cap"]:
        raise ResourceCapExceeded(
            f"kernel-evaluation cap {st['cap']:.3g} reached at {st['count']:.3g} (next batch {n})")
    st["count"] += n


def evaluations() -> int:
    st = _state.get()
    return 0 if st is None else st["count"]
