"""Timed colored Petri net kernel.

The execution core (binding search, firing, clock advance) ships in two
interchangeable backends: the compiled ``_ckernel`` extension and the
pure-Python ``_pykernel``. The compiled one is used when importable unless
``CRSIM_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from . import _pykernel
from .net import (
    Arc,
    FiringError,
    KernelError,
    NetConstructionError,
    ParameterError,
    TransitionSpec,
    validate,
)
from .stochastic import (
    StochasticSource,
    exponential_from_uniform,
    sample_exponential,
    sample_uniform,
    split_seed,
)

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

_BACKENDS = {"python": _pykernel}
if _ckernel is not None:
    _BACKENDS["compiled"] = _ckernel

if _ckernel is not None and os.environ.get("CRSIM_PURE_PYTHON", "") in ("", "0"):
    _default = _ckernel
else:
    _default = _pykernel

BACKEND: str = _default.BACKEND


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str | None = None):
    if name is None:
        return _default
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}") from None


def _impl(net):
    return _ckernel if _ckernel is not None and isinstance(net, _ckernel.Net) else _pykernel


def build_net(places: Sequence[str], transitions: Sequence[TransitionSpec], backend: str | None = None):
    """Validate and compile a net. Returns ``(net, empty_marking)``."""
    ordered = validate(places, transitions)
    impl = get_backend(backend)
    net = impl.Net(places, ordered)
    return net, impl.Marking(net)


def enabled_bindings(net, marking, clock: int) -> list[tuple[TransitionSpec, tuple]]:
    """All enabled ``(transition, binding)`` pairs in firing order."""
    return _impl(net).enabled_bindings(net, marking, clock)


def fire(net, marking, transition, binding, clock: int):
    """Fire one binding in place and return the marking."""
    _impl(net).fire(net, marking, transition, binding, clock)
    return marking


def advance_clock(net, marking, clock: int) -> int | None:
    """Earliest time >= clock at which something is enabled; None if dead."""
    return _impl(net).next_enabling_time(net, marking, clock)


@dataclass
class Trace:
    records: list[tuple[int, str, tuple]] = field(default_factory=list)
    clock: int = 0
    fired: int = 0
    dead: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def times(self) -> list[int]:
        return [r[0] for r in self.records]


def run(
    net,
    marking,
    horizon: int,
    on_fire: Callable[[int, TransitionSpec, tuple], Any] | None = None,
    on_quiescent: Callable[[int, Any], Any] | None = None,
    start: int = 0,
    keep_trace: bool = True,
    tie_break: StochasticSource | None = None,
) -> Trace:
    """Fire and advance until the next enabling time passes ``horizon``.

    ``on_fire(clock, transition, values)`` runs after every firing;
    ``on_quiescent(clock, marking)`` runs whenever nothing more can fire at
    the current instant, just before time moves on.

    By default the first enabled binding in (priority, declaration, binding)
    order fires. With ``tie_break`` a binding is drawn uniformly from those
    of the best enabled priority instead, for sensitivity checks.
    """
    if horizon <= 0:
        raise ParameterError("horizon must be > 0")
    if tie_break is not None:
        return _run_random(net, marking, start, horizon, on_fire, on_quiescent, keep_trace, tie_break)
    records, clock, fired, dead = _impl(net).run_loop(
        net, marking, start, horizon, on_fire, on_quiescent, keep_trace
    )
    return Trace(records, clock, fired, dead)


def _run_random(net, marking, clock, horizon, on_fire, on_quiescent, keep_trace, source):
    impl = _impl(net)
    trace = Trace(clock=clock)
    while True:
        found = impl.enabled_bindings(net, marking, clock)
        if found:
            best = found[0][0].priority
            pool = [tb for tb in found if tb[0].priority == best]
            t, binding = pool[source.index(len(pool))]
            values = tuple(tok.value for tok in binding)
            impl.fire(net, marking, t, binding, clock)
            trace.fired += 1
            if keep_trace:
                trace.records.append((clock, t.name, values))
            if on_fire is not None:
                on_fire(clock, t, values)
            continue
        if on_quiescent is not None:
            on_quiescent(clock, marking)
        nxt = impl.next_enabling_time(net, marking, clock)
        if nxt is None:
            trace.dead = True
            break
        if nxt > horizon:
            break
        clock = nxt
    trace.clock = clock
    return trace


def reachable_markings(net, marking, clock: int = 0, limit: int = 100_000) -> set:
    """Breadth-first closure of ``marking`` under firing at a frozen clock.

    Meant for small untimed nets; raises once ``limit`` markings are found.
    """
    impl = _impl(net)
    seen = {marking.snapshot()}
    frontier = deque([marking])
    while frontier:
        m = frontier.popleft()
        for t, binding in impl.enabled_bindings(net, m, clock):
            where = []
            for tok, arc in zip(binding, t.inputs):
                toks = m.tokens(arc.place)
                where.append((arc.place, next(i for i, x in enumerate(toks) if x is tok)))
            nxt = m.copy()
            impl.fire(net, nxt, t, tuple(nxt.tokens(p)[i] for p, i in where), clock)
            key = nxt.snapshot()
            if key not in seen:
                if len(seen) >= limit:
                    raise KernelError(f"more than {limit} reachable markings")
                seen.add(key)
                frontier.append(nxt)
    return seen


__all__ = [
    "Arc",
    "BACKEND",
    "FiringError",
    "KernelError",
    "NetConstructionError",
    "ParameterError",
    "StochasticSource",
    "Trace",
    "TransitionSpec",
    "advance_clock",
    "available_backends",
    "build_net",
    "enabled_bindings",
    "exponential_from_uniform",
    "fire",
    "get_backend",
    "reachable_markings",
    "run",
    "sample_exponential",
    "sample_uniform",
    "split_seed",
]
