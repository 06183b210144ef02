"""Pure-Python execution core. Mirrors ``_ckernel.pyx`` line for line."""

from itertools import product

from .net import FiringError, ParameterError

BACKEND = "python"
NEVER = 1 << 62


class TimedToken:
    __slots__ = ("value", "timestamp")

    def __init__(self, value, timestamp=0):
        self.value = value
        self.timestamp = timestamp

    def __repr__(self):
        return f"{self.value!r}@{self.timestamp}"


class Net:
    """Immutable compiled form of a validated net."""

    def __init__(self, places, transitions):
        self.places = tuple(places)
        self.transitions = tuple(transitions)
        self.place_index = {p: i for i, p in enumerate(self.places)}
        self.transition_index = {t.name: i for i, t in enumerate(self.transitions)}
        self._arc_places = []
        self._arc_match = []
        self._arc_timed = []
        self._shared = []
        self._consumers = [[] for _ in self.places]
        for ti, t in enumerate(self.transitions):
            pidx = tuple(self.place_index[a.place] for a in t.inputs)
            self._arc_places.append(pidx)
            self._arc_match.append(tuple(a.match for a in t.inputs))
            self._arc_timed.append(tuple(a.timed for a in t.inputs))
            self._shared.append(len(set(pidx)) != len(pidx))
            for pi in sorted(set(pidx)):
                self._consumers[pi].append(ti)

    def resolve(self, transition):
        if isinstance(transition, int):
            return transition
        name = transition if isinstance(transition, str) else transition.name
        try:
            return self.transition_index[name]
        except KeyError:
            raise FiringError(f"unknown transition {name!r}") from None


class Marking:
    """Token multisets per place, plus cached earliest enabling times."""

    __slots__ = ("net", "_places", "_dirty", "_earliest")

    def __init__(self, net):
        self.net = net
        self._places = [[] for _ in net.places]
        self._dirty = [True] * len(net.transitions)
        self._earliest = [NEVER] * len(net.transitions)

    def add(self, place, value, timestamp=0):
        if timestamp < 0:
            raise ParameterError(f"negative timestamp {timestamp}")
        try:
            pi = self.net.place_index[place]
        except KeyError:
            raise FiringError(f"undeclared place {place!r}") from None
        self._places[pi].append(TimedToken(value, timestamp))
        for ti in self.net._consumers[pi]:
            self._dirty[ti] = True

    def tokens(self, place):
        return list(self._places[self.net.place_index[place]])

    def values(self, place):
        return [tok.value for tok in self._places[self.net.place_index[place]]]

    def invalidate(self):
        for ti in range(len(self._dirty)):
            self._dirty[ti] = True

    def __len__(self):
        return sum(len(pl) for pl in self._places)

    def copy(self):
        m = Marking(self.net)
        for pi, pl in enumerate(self._places):
            m._places[pi] = [TimedToken(t.value, t.timestamp) for t in pl]
        return m

    def snapshot(self):
        """Order-insensitive canonical form: place -> sorted (value, ts) pairs."""
        return tuple(
            (name, tuple(sorted(((t.value, t.timestamp) for t in pl), key=repr)))
            for name, pl in zip(self.net.places, self._places)
        )


def _candidates(net, marking, ti, clock):
    # clock < 0 disables the maturity filter
    out = []
    places = marking._places
    for pi, match, timed in zip(net._arc_places[ti], net._arc_match[ti], net._arc_timed[ti]):
        cands = [
            tok for tok in places[pi]
            if (match is None or match(tok.value)) and (clock < 0 or not timed or tok.timestamp <= clock)
        ]
        if not cands:
            return None
        out.append(cands)
    return out


def _combos(cands, shared):
    if len(cands) == 1:
        for tok in cands[0]:
            yield (tok,)
        return
    for combo in product(*cands):
        if shared and len({id(t) for t in combo}) != len(combo):
            continue
        yield combo


def _earliest(net, marking, ti):
    t = net.transitions[ti]
    nb = t.not_before() if t.not_before is not None else 0
    cands = _candidates(net, marking, ti, -1)
    if cands is None:
        return NEVER
    timed = net._arc_timed[ti]
    guard = t.guard
    if guard is None and not net._shared[ti]:
        e = nb
        for k, cs in enumerate(cands):
            if timed[k]:
                m = min(tok.timestamp for tok in cs)
                if m > e:
                    e = m
        return e
    best = NEVER
    for combo in _combos(cands, net._shared[ti]):
        if guard is not None and not guard(tuple(tok.value for tok in combo)):
            continue
        e = nb
        for k, tok in enumerate(combo):
            if timed[k] and tok.timestamp > e:
                e = tok.timestamp
        if e < best:
            best = e
    return best


def _bindings_at(net, marking, ti, clock, first_only):
    t = net.transitions[ti]
    if t.not_before is not None and t.not_before() > clock:
        return []
    cands = _candidates(net, marking, ti, clock)
    if cands is None:
        return []
    guard = t.guard
    found = []
    for combo in _combos(cands, net._shared[ti]):
        if guard is not None and not guard(tuple(tok.value for tok in combo)):
            continue
        found.append(combo)
        if first_only:
            break
    return found


def _refresh(net, marking):
    dirty = marking._dirty
    earliest = marking._earliest
    for ti in range(len(dirty)):
        if dirty[ti]:
            earliest[ti] = _earliest(net, marking, ti)
            dirty[ti] = False


def enabled_bindings(net, marking, clock):
    out = []
    for ti in range(len(net.transitions)):
        for combo in _bindings_at(net, marking, ti, clock, False):
            out.append((net.transitions[ti], combo))
    return out


def first_enabled(net, marking, clock):
    dirty = marking._dirty
    earliest = marking._earliest
    for ti in range(len(dirty)):
        if dirty[ti]:
            earliest[ti] = _earliest(net, marking, ti)
            dirty[ti] = False
        if earliest[ti] <= clock:
            found = _bindings_at(net, marking, ti, clock, True)
            if found:
                return ti, found[0]
    return None


def next_enabling_time(net, marking, clock):
    _refresh(net, marking)
    best = NEVER
    for e in marking._earliest:
        if e < best:
            best = e
    if best == NEVER:
        return None
    return best if best > clock else clock


def fire(net, marking, transition, binding, clock):
    ti = net.resolve(transition)
    t = net.transitions[ti]
    arc_places = net._arc_places[ti]
    timed = net._arc_timed[ti]
    if len(binding) != len(arc_places):
        raise FiringError(f"{t.name}: binding arity {len(binding)} != {len(arc_places)}")
    places = marking._places
    positions = []
    for k, tok in enumerate(binding):
        if timed[k] and tok.timestamp > clock:
            raise FiringError(f"{t.name}: token {tok!r} not mature at {clock}")
        pl = places[arc_places[k]]
        for j, x in enumerate(pl):
            if x is tok:
                break
        else:
            raise FiringError(f"{t.name}: stale binding, token {tok!r} no longer present")
        positions.append(j)
    if len({id(tok) for tok in binding}) != len(binding):
        raise FiringError(f"{t.name}: binding reuses a token")
    for k, tok in enumerate(binding):
        pl = places[arc_places[k]]
        if net._shared[ti]:
            pl.remove(tok)
        else:
            del pl[positions[k]]
    dirty = marking._dirty
    consumers = net._consumers
    for pi in arc_places:
        for c in consumers[pi]:
            dirty[c] = True
    produced = t.effect(tuple(tok.value for tok in binding), clock)
    n = 0
    if produced is not None:
        for place, value, ts in produced:
            marking.add(place, value, ts)
            n += 1
    if t.writes_state:
        marking.invalidate()
    return n


def run_loop(net, marking, clock, horizon, on_fire, on_quiescent, keep_trace):
    trace = []
    fired = 0
    dead = False
    transitions = net.transitions
    while True:
        found = first_enabled(net, marking, clock)
        if found is not None:
            ti, combo = found
            fire(net, marking, ti, combo, clock)
            fired += 1
            if keep_trace or on_fire is not None:
                values = tuple(tok.value for tok in combo)
                if keep_trace:
                    trace.append((clock, transitions[ti].name, values))
                if on_fire is not None:
                    on_fire(clock, transitions[ti], values)
            continue
        if on_quiescent is not None:
            on_quiescent(clock, marking)
        nxt = next_enabling_time(net, marking, clock)
        if nxt is None:
            dead = True
            break
        if nxt > horizon:
            break
        clock = nxt
    return trace, clock, fired, dead
