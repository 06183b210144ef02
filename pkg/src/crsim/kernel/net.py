"""Net structure: arcs, transition specs, errors and construction checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence


class KernelError(Exception):
    """Base class for Petri net kernel failures."""


class NetConstructionError(KernelError, ValueError):
    pass


class FiringError(KernelError):
    pass


class ParameterError(KernelError, ValueError):
    pass


Effect = Callable[[tuple, int], Iterable[tuple[str, Any, int]]]


@dataclass(frozen=True)
class Arc:
    """Input arc binding exactly one token from ``place``.

    ``match`` filters token values; ``timed=False`` lets the arc bind a token
    regardless of its timestamp (used to withdraw a pending activity early).
    """

    place: str
    match: Callable[[Any], bool] | None = None
    timed: bool = True


@dataclass(frozen=True)
class TransitionSpec:
    """A transition: input arcs, guard over the bound values, and an effect.

    The effect receives the tuple of bound token values and the current clock
    and yields ``(place, value, timestamp)`` triples for the produced tokens.
    Transitions with a lower ``priority`` fire first; ties fall back to
    declaration order.

    ``not_before`` optionally returns an absolute time before which the
    transition cannot fire regardless of its tokens. Set ``writes_state`` when
    the effect mutates state read by other guards, matches or ``not_before``
    hooks so the engine drops its cached enabling times.
    """

    name: str
    inputs: Sequence[Arc]
    effect: Effect
    guard: Callable[[tuple], bool] | None = None
    priority: int = 0
    outputs: Sequence[str] = field(default=())
    not_before: Callable[[], int] | None = None
    writes_state: bool = False


def validate(places: Sequence[str], transitions: Sequence[TransitionSpec]) -> list[TransitionSpec]:
    """Check names and references; return transitions in firing-rank order."""
    seen: set[str] = set()
    for p in places:
        if p in seen:
            raise NetConstructionError(f"duplicate place name {p!r}")
        seen.add(p)
    tnames: set[str] = set()
    for t in transitions:
        if t.name in tnames or t.name in seen:
            raise NetConstructionError(f"duplicate name {t.name!r}")
        tnames.add(t.name)
        if not t.inputs:
            raise NetConstructionError(f"transition {t.name!r} has no input arcs")
        for a in t.inputs:
            if a.place not in seen:
                raise NetConstructionError(f"transition {t.name!r} reads undeclared place {a.place!r}")
        for p in t.outputs:
            if p not in seen:
                raise NetConstructionError(f"transition {t.name!r} writes undeclared place {p!r}")
    order = sorted(range(len(transitions)), key=lambda i: (transitions[i].priority, i))
    return [transitions[i] for i in order]
