# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled execution core. Same API and firing order as ``_pykernel``."""

from libc.stdlib cimport malloc, free

from .net import FiringError, ParameterError

BACKEND = "compiled"

cdef long long C_NEVER = (<long long>1) << 62
NEVER = C_NEVER

cdef enum:
    MAX_ARCS = 32


cdef class TimedToken:
    cdef public object value
    cdef public long long timestamp

    def __init__(self, value, long long timestamp=0):
        self.value = value
        self.timestamp = timestamp

    def __repr__(self):
        return f"{self.value!r}@{self.timestamp}"


cdef class _Trans:
    cdef object spec
    cdef object guard
    cdef object not_before
    cdef object effect
    cdef str name
    cdef int n
    cdef int places[MAX_ARCS]
    cdef bint timed[MAX_ARCS]
    cdef list matches
    cdef bint shared
    cdef bint writes_state


cdef class Net:
    """Immutable compiled form of a validated net."""

    cdef public tuple places
    cdef public tuple transitions
    cdef public dict place_index
    cdef public dict transition_index
    cdef list _t
    cdef list _consumers

    def __init__(self, places, transitions):
        cdef _Trans tr
        cdef int k
        self.places = tuple(places)
        self.transitions = tuple(transitions)
        self.place_index = {p: i for i, p in enumerate(self.places)}
        self.transition_index = {t.name: i for i, t in enumerate(self.transitions)}
        self._t = []
        self._consumers = [[] for _ in self.places]
        for ti, t in enumerate(self.transitions):
            if len(t.inputs) > MAX_ARCS:
                raise ValueError(f"{t.name}: more than {MAX_ARCS} input arcs")
            tr = _Trans()
            tr.spec = t
            tr.name = t.name
            tr.guard = t.guard
            tr.not_before = t.not_before
            tr.effect = t.effect
            tr.writes_state = t.writes_state
            tr.n = len(t.inputs)
            tr.matches = [a.match for a in t.inputs]
            pidx = []
            for k, a in enumerate(t.inputs):
                tr.places[k] = self.place_index[a.place]
                tr.timed[k] = a.timed
                pidx.append(tr.places[k])
            tr.shared = len(set(pidx)) != len(pidx)
            self._t.append(tr)
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


cdef class Marking:
    """Token multisets per place, plus cached earliest enabling times."""

    cdef public Net net
    cdef list _places
    cdef char* _dirty
    cdef long long* _earliest
    cdef int _nt

    def __cinit__(self, Net net):
        cdef int i
        self._nt = len(net.transitions)
        self._dirty = <char*>malloc(max(self._nt, 1) * sizeof(char))
        self._earliest = <long long*>malloc(max(self._nt, 1) * sizeof(long long))
        if self._dirty == NULL or self._earliest == NULL:
            raise MemoryError()
        for i in range(self._nt):
            self._dirty[i] = 1
            self._earliest[i] = C_NEVER

    def __init__(self, Net net):
        self.net = net
        self._places = [[] for _ in net.places]

    def __dealloc__(self):
        free(self._dirty)
        free(self._earliest)

    cdef inline void _touch(self, int pi):
        cdef list cons = <list>self.net._consumers[pi]
        cdef object ti
        for ti in cons:
            self._dirty[<int>ti] = 1

    def add(self, place, value, long long timestamp=0):
        if timestamp < 0:
            raise ParameterError(f"negative timestamp {timestamp}")
        try:
            pi = self.net.place_index[place]
        except KeyError:
            raise FiringError(f"undeclared place {place!r}") from None
        (<list>self._places[pi]).append(TimedToken(value, timestamp))
        self._touch(pi)

    def tokens(self, place):
        return list(self._places[self.net.place_index[place]])

    def values(self, place):
        cdef TimedToken tok
        return [tok.value for tok in self._places[self.net.place_index[place]]]

    def invalidate(self):
        cdef int i
        for i in range(self._nt):
            self._dirty[i] = 1

    def __len__(self):
        return sum(len(pl) for pl in self._places)

    def copy(self):
        cdef TimedToken t
        m = Marking(self.net)
        for pi, pl in enumerate(self._places):
            (<Marking>m)._places[pi] = [TimedToken(t.value, t.timestamp) for t in pl]
        return m

    def snapshot(self):
        """Order-insensitive canonical form: place -> sorted (value, ts) pairs."""
        return tuple(
            (name, tuple(sorted(((t.value, t.timestamp) for t in pl), key=repr)))
            for name, pl in zip(self.net.places, self._places)
        )


cdef list _candidates(Marking m, _Trans t, long long clock, bint use_clock):
    cdef list out = []
    cdef list cands
    cdef TimedToken tok
    cdef int k
    cdef bint timed
    for k in range(t.n):
        match = t.matches[k]
        timed = t.timed[k] and use_clock
        cands = []
        for tok in <list>m._places[t.places[k]]:
            if timed and tok.timestamp > clock:
                continue
            if match is not None and not match(tok.value):
                continue
            cands.append(tok)
        if not cands:
            return None
        out.append(cands)
    return out


cdef bint _distinct(list combo):
    cdef Py_ssize_t i, j, n = len(combo)
    for i in range(n):
        for j in range(i + 1, n):
            if combo[i] is combo[j]:
                return False
    return True


# mode 0: minimum enabling time; 1: first combo; 2: every combo
cdef object _visit(_Trans t, list cands, int mode, long long nb):
    cdef int n = t.n, k
    cdef Py_ssize_t idx[MAX_ARCS]
    cdef Py_ssize_t sizes[MAX_ARCS]
    cdef long long best = C_NEVER, e
    cdef list combo
    cdef list found = []
    cdef TimedToken tok
    guard = t.guard
    for k in range(n):
        idx[k] = 0
        sizes[k] = len(<list>cands[k])
    while True:
        combo = [(<list>cands[k])[idx[k]] for k in range(n)]
        if (not t.shared or _distinct(combo)) and (
            guard is None or guard(tuple([(<TimedToken>tok).value for tok in combo]))
        ):
            if mode == 1:
                return tuple(combo)
            if mode == 2:
                found.append(tuple(combo))
            else:
                e = nb
                for k in range(n):
                    tok = <TimedToken>combo[k]
                    if t.timed[k] and tok.timestamp > e:
                        e = tok.timestamp
                if e < best:
                    best = e
        k = n - 1
        while k >= 0:
            idx[k] += 1
            if idx[k] < sizes[k]:
                break
            idx[k] = 0
            k -= 1
        if k < 0:
            break
    if mode == 0:
        return best
    if mode == 1:
        return None
    return found


cdef long long _earliest(Marking m, _Trans t):
    cdef long long nb = 0, e, lo
    cdef int k
    cdef TimedToken tok
    if t.not_before is not None:
        nb = t.not_before()
    cands = _candidates(m, t, 0, False)
    if cands is None:
        return C_NEVER
    if t.guard is None and not t.shared:
        e = nb
        for k in range(t.n):
            if t.timed[k]:
                lo = C_NEVER
                for tok in <list>cands[k]:
                    if tok.timestamp < lo:
                        lo = tok.timestamp
                if lo > e:
                    e = lo
        return e
    return _visit(t, cands, 0, nb)


cdef object _bindings_at(Marking m, _Trans t, long long clock, int mode):
    if t.not_before is not None and t.not_before() > clock:
        return None if mode == 1 else []
    cands = _candidates(m, t, clock, True)
    if cands is None:
        return None if mode == 1 else []
    return _visit(t, cands, mode, 0)


cdef void _refresh(Net net, Marking m):
    cdef int ti
    for ti in range(m._nt):
        if m._dirty[ti]:
            m._earliest[ti] = _earliest(m, <_Trans>net._t[ti])
            m._dirty[ti] = 0


def enabled_bindings(Net net, Marking marking, long long clock):
    out = []
    cdef int ti
    for ti in range(marking._nt):
        for combo in _bindings_at(marking, <_Trans>net._t[ti], clock, 2):
            out.append((net.transitions[ti], combo))
    return out


cdef object _first_enabled(Net net, Marking m, long long clock):
    cdef int ti
    for ti in range(m._nt):
        if m._dirty[ti]:
            m._earliest[ti] = _earliest(m, <_Trans>net._t[ti])
            m._dirty[ti] = 0
        if m._earliest[ti] <= clock:
            combo = _bindings_at(m, <_Trans>net._t[ti], clock, 1)
            if combo is not None:
                return ti, combo
    return None


def first_enabled(Net net, Marking marking, long long clock):
    return _first_enabled(net, marking, clock)


def next_enabling_time(Net net, Marking marking, long long clock):
    cdef long long best = C_NEVER
    cdef int ti
    _refresh(net, marking)
    for ti in range(marking._nt):
        if marking._earliest[ti] < best:
            best = marking._earliest[ti]
    if best == C_NEVER:
        return None
    return best if best > clock else clock


cdef int _fire(Net net, Marking m, int ti, tuple binding, long long clock) except -1:
    cdef _Trans t = <_Trans>net._t[ti]
    cdef int k, n = t.n
    cdef Py_ssize_t j, pos[MAX_ARCS]
    cdef list pl
    cdef TimedToken tok
    if len(binding) != n:
        raise FiringError(f"{t.name}: binding arity {len(binding)} != {n}")
    for k in range(n):
        tok = <TimedToken?>binding[k]
        if t.timed[k] and tok.timestamp > clock:
            raise FiringError(f"{t.name}: token {tok!r} not mature at {clock}")
        pl = <list>m._places[t.places[k]]
        for j in range(len(pl)):
            if pl[j] is tok:
                break
        else:
            raise FiringError(f"{t.name}: stale binding, token {tok!r} no longer present")
        pos[k] = j
    if t.shared:
        if not _distinct(list(binding)):
            raise FiringError(f"{t.name}: binding reuses a token")
        for k in range(n):
            (<list>m._places[t.places[k]]).remove(binding[k])
    else:
        for k in range(n):
            del (<list>m._places[t.places[k]])[pos[k]]
    for k in range(n):
        m._touch(t.places[k])
    produced = t.effect(tuple([(<TimedToken>tok).value for tok in binding]), clock)
    cdef int count = 0
    if produced is not None:
        for place, value, ts in produced:
            m.add(place, value, ts)
            count += 1
    if t.writes_state:
        for k in range(m._nt):
            m._dirty[k] = 1
    return count


def fire(Net net, Marking marking, transition, binding, long long clock):
    return _fire(net, marking, net.resolve(transition), tuple(binding), clock)


def run_loop(Net net, Marking marking, long long clock, long long horizon, on_fire, on_quiescent, bint keep_trace):
    cdef list trace = []
    cdef long long fired = 0
    cdef bint dead = False
    cdef int ti
    cdef tuple combo
    cdef TimedToken tok
    transitions = net.transitions
    while True:
        found = _first_enabled(net, marking, clock)
        if found is not None:
            ti = found[0]
            combo = found[1]
            _fire(net, marking, ti, combo, clock)
            fired += 1
            if keep_trace or on_fire is not None:
                values = tuple([tok.value for tok in combo])
                if keep_trace:
                    trace.append((clock, (<_Trans>net._t[ti]).name, values))
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
