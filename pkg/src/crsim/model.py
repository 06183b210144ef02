"""IEEE 802.22 secondary network as a timed colored Petri net.

A base station picks a primary and a backup operating channel by
availability. Each materialized channel hosts a primary user alternating
exponential OFF/ON periods. Secondary users take turns transmitting on the
operating channel; when a PU turns on there, the transmission is preempted
and the network retunes to the other channel, losing ``sw_time``
microseconds during which nobody transmits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

from .config import Config
from .events import EventKind, EventLog, EventRecord
from .kernel import Arc, ParameterError, StochasticSource, Trace, TransitionSpec, build_net, run
from .metrics import PeriodLedger, PowerProfile, RoundResult, energy_per_su_per_frame

CONNECTION = "Connection"
NEW_CR = "New CR"
NEW_CHANNEL = "New Channel"
FREE = "Free Channels"
PREPARING_PU = "Preparing PU"
PU_ACTIVITY = "PU Activity"
OCCUPIED = "Channels Occupied by PUs"
CR_NODES = "Cognitive Radio Nodes"
SU_ACTIVITY = "SU Activity"

PLACES = (CONNECTION, NEW_CR, NEW_CHANNEL, FREE, PREPARING_PU, PU_ACTIVITY, OCCUPIED, CR_NODES, SU_ACTIVITY)

TV_BAND_BASE_MHZ = 54.0


class SecondaryUser(NamedTuple):
    su_id: int
    channel_id: int = 0
    qos: int = 0
    battery: int = 0


class ChannelToken(NamedTuple):
    channel_id: int
    pu_present: bool = False
    using_su: int = 0


class PuProcess(NamedTuple):
    channel_id: int
    on_mean: int
    off_mean: int
    busy: bool = False


class SuActivity(NamedTuple):
    su_id: int
    channel_id: int
    start: int
    duration: int


@dataclass
class NetworkState:
    prim: int = 0
    back: int = 0
    used_ch: int = 0
    sw_time: int = 0
    real_sw_per: int = 0
    channels: dict[int, PuProcess] = field(default_factory=dict)


def channel_band(channel_id: int, bandwidth_mhz: float, base_mhz: float = TV_BAND_BASE_MHZ) -> tuple[float, float]:
    lo = base_mhz + (channel_id - 1) * bandwidth_mhz
    return lo, lo + bandwidth_mhz


def availability(on_mean: float, off_mean: float) -> float:
    if on_mean < 0 or off_mean < 0:
        raise ParameterError("mean periods must be >= 0")
    if on_mean == 0 and off_mean == 0:
        raise ParameterError("availability undefined when both periods are zero")
    return off_mean / (on_mean + off_mean)


def _score(pu: PuProcess, metric: str):
    if metric == "off_period":
        return Fraction(pu.off_mean)
    # exact ratio keeps the argmax independent of a common rescaling
    if pu.on_mean == 0 and pu.off_mean == 0:
        raise ParameterError("availability undefined when both periods are zero")
    return Fraction(pu.off_mean) / (Fraction(pu.on_mean) + Fraction(pu.off_mean))


def _argmax(channels: Sequence[PuProcess], metric: str) -> int:
    best = None
    for pu in channels:
        key = (_score(pu, metric), -pu.channel_id)
        if best is None or key > best[0]:
            best = (key, pu.channel_id)
    return best[1]


def sel_primary_channel(channels: Sequence[PuProcess], metric: str = "availability", state: NetworkState | None = None) -> int:
    """Channel with the highest score; ties go to the lowest id.

    When ``state`` is given, the generated periods are kept there for the PU
    processes created later.
    """
    if not channels:
        raise ParameterError("no channels to select from")
    if state is not None:
        state.channels = {pu.channel_id: pu for pu in channels}
    return _argmax(channels, metric)


def switching_time(ch_a: int, ch_b: int, bandwidth_mhz: float, delay_per_mhz_us: float) -> int:
    return round(abs(ch_a - ch_b) * bandwidth_mhz * delay_per_mhz_us)


def sel_backup_channel(
    channels: Sequence[PuProcess],
    state: NetworkState,
    bandwidth_mhz: float = 5.0,
    delay_per_mhz_us: float = 100.0,
    metric: str = "availability",
) -> int:
    """Pick the backup channel once; every later call returns 0."""
    if state.back != 0:
        return 0
    if state.prim == 0:
        raise ParameterError("primary channel not selected yet")
    candidates = [pu for pu in channels if pu.channel_id != state.prim]
    if not candidates:
        raise ParameterError("no backup candidate besides the primary channel")
    state.back = _argmax(candidates, metric)
    state.sw_time = switching_time(state.prim, state.back, bandwidth_mhz, delay_per_mhz_us)
    return state.back


class CognitiveRadioNet:
    """One simulation run: net, marking, globals, ledger and counters."""

    def __init__(
        self,
        config: Config,
        source: StochasticSource,
        events: EventLog | None = None,
        backend: str | None = None,
    ):
        self.config = config
        self.source = source
        self.events = events
        self.state = NetworkState()
        self.ledger = PeriodLedger()
        self.horizon = config.horizon_us
        self.switch_count = 0
        self.pu_on_events = 0
        self.pu_off_events = 0
        self.transmissions = 0
        self.preemptions = 0
        self._present: list[int] = []
        self._switch_until = 0
        self._subframe = config.subframe_us
        self.net, self.marking = build_net(PLACES, self.transitions(), backend)

    # -- net structure ------------------------------------------------------

    def transitions(self) -> list[TransitionSpec]:
        state = self.state

        def same_channel(values):
            return values[0].channel_id == values[1].channel_id

        def leaving_guard(values):
            act, ch = values
            return act.channel_id == ch.channel_id and act.su_id == ch.using_su

        def operating_and_unused(ch):
            return ch.channel_id == state.used_ch and ch.using_su == 0

        return [
            TransitionSpec("Connecting", [Arc(CONNECTION)], self.fire_connecting,
                           outputs=(NEW_CR, NEW_CHANNEL), writes_state=True),
            TransitionSpec("Using new Channel", [Arc(NEW_CHANNEL)], self.fire_using_new_channel,
                           outputs=(FREE, PREPARING_PU)),
            TransitionSpec("Updating PU", [Arc(PREPARING_PU)], self.fire_updating_pu,
                           outputs=(PU_ACTIVITY, NEW_CHANNEL), writes_state=True),
            TransitionSpec("Creating CR", [Arc(NEW_CR)], self.spawn_secondary_users,
                           outputs=(CR_NODES, NEW_CR)),
            TransitionSpec("Channel Updating", [Arc(SU_ACTIVITY, timed=False), Arc(OCCUPIED)],
                           self.fire_channel_updating, guard=same_channel, outputs=(OCCUPIED,)),
            TransitionSpec("PU Activity On/Off", [Arc(PU_ACTIVITY, match=lambda pu: pu.busy), Arc(OCCUPIED)],
                           self.fire_pu_on_off, guard=same_channel, outputs=(FREE, PU_ACTIVITY)),
            TransitionSpec("PU Activity Off/On", [Arc(PU_ACTIVITY, match=lambda pu: not pu.busy), Arc(FREE)],
                           self.fire_pu_off_on, guard=same_channel, outputs=(OCCUPIED, PU_ACTIVITY),
                           writes_state=True),
            TransitionSpec("SU Leaving Channel", [Arc(SU_ACTIVITY), Arc(FREE)], self.fire_su_leaving_channel,
                           guard=leaving_guard, outputs=(FREE,)),
            TransitionSpec("SU Using Channel", [Arc(CR_NODES), Arc(FREE, match=operating_and_unused)],
                           self.fire_su_using_channel, outputs=(CR_NODES, FREE, SU_ACTIVITY),
                           not_before=lambda: state.real_sw_per),
        ]

    def _emit(self, clock: int, kind: EventKind, *args: int) -> None:
        if self.events is not None:
            self.events.emit(EventRecord(clock, kind, args))

    # -- transient part -----------------------------------------------------

    def generate_channels(self) -> list[PuProcess]:
        cfg = self.config
        on_lo, on_hi = cfg.pu_on_mean_range_s
        off_lo, off_hi = cfg.pu_off_mean_range_s
        out = []
        for ch in range(1, cfg.num_channels + 1):
            on = round(self.source.uniform(on_lo, on_hi) * 1_000_000)
            off = round(self.source.uniform(off_lo, off_hi) * 1_000_000)
            out.append(PuProcess(ch, max(on, 1), max(off, 1)))
        return out

    def fire_connecting(self, values, clock):
        channels = self.generate_channels()
        prim = sel_primary_channel(channels, self.config.selection_metric, self.state)
        self.state.prim = prim
        self.state.used_ch = prim
        return [
            (NEW_CR, 1, clock + self.config.transient_offset_us),
            (NEW_CHANNEL, prim, clock),
        ]

    def fire_using_new_channel(self, values, clock):
        (ch,) = values
        pu = self.state.channels[ch]
        return [
            (FREE, ChannelToken(ch, False, 0), clock),
            (PREPARING_PU, pu._replace(busy=False), clock),
        ]

    def fire_updating_pu(self, values, clock):
        (pu,) = values
        out = [(PU_ACTIVITY, pu._replace(busy=False), clock + self.source.exponential(pu.off_mean))]
        cfg = self.config
        back = sel_backup_channel(
            list(self.state.channels.values()), self.state,
            cfg.bandwidth_mhz, cfg.switch_delay_us_per_mhz, cfg.selection_metric,
        )
        if back != 0:
            out.append((NEW_CHANNEL, back, clock))
            if cfg.model_all_pu:
                for ch in sorted(self.state.channels):
                    if ch not in (self.state.prim, back):
                        out.append((NEW_CHANNEL, ch, clock))
        return out

    def spawn_secondary_users(self, values, clock):
        (su_id,) = values
        self.ledger.arrive(su_id, clock)
        self._present.append(su_id)
        if self._switch_until > clock:
            self.ledger.record_interval(su_id, "switching", min(self._switch_until, self.horizon) - clock)
        out = [(CR_NODES, SecondaryUser(su_id), clock)]
        if su_id < self.config.su_count:
            out.append((NEW_CR, su_id + 1, clock + self.config.arrival_gap_us))
        return out

    # -- steady part --------------------------------------------------------

    def fire_pu_off_on(self, values, clock):
        pu, ch = values
        state = self.state
        self.pu_on_events += 1
        self._emit(clock, EventKind.PU_OFF_ON, ch.using_su, ch.channel_id)
        if ch.channel_id == state.used_ch:
            self.switch_count += 1
            self._emit(clock, EventKind.SWITCHING, state.sw_time)
            self._start_switch(clock, clock + state.sw_time)
            state.real_sw_per = state.sw_time + clock
            state.used_ch = state.back if ch.channel_id == state.prim else state.prim
        return [
            (OCCUPIED, ch._replace(pu_present=True), clock),
            (PU_ACTIVITY, pu._replace(busy=True), clock + self.source.exponential(pu.on_mean)),
        ]

    def _start_switch(self, start: int, end: int) -> None:
        lo = max(start, self._switch_until)
        hi = min(end, self.horizon)
        if hi > lo:
            for su_id in self._present:
                self.ledger.record_interval(su_id, "switching", hi - lo)
        self._switch_until = max(self._switch_until, end)

    def fire_pu_on_off(self, values, clock):
        pu, ch = values
        self.pu_off_events += 1
        self._emit(clock, EventKind.PU_ON_OFF, ch.channel_id)
        return [
            (FREE, ChannelToken(ch.channel_id, False, 0), clock),
            (PU_ACTIVITY, pu._replace(busy=False), clock + self.source.exponential(pu.off_mean)),
        ]

    def fire_su_using_channel(self, values, clock):
        su, ch = values
        d = self.source.exponential(self._subframe)
        self.transmissions += 1
        self._emit(clock, EventKind.SU_USING, su.su_id, d)
        return [
            (CR_NODES, SecondaryUser(su.su_id, ch.channel_id, su.qos, su.battery), clock),
            (FREE, ChannelToken(ch.channel_id, ch.pu_present, su.su_id), clock),
            (SU_ACTIVITY, SuActivity(su.su_id, ch.channel_id, clock, d), clock + d),
        ]

    def fire_su_leaving_channel(self, values, clock):
        act, ch = values
        self.ledger.record_interval(act.su_id, "transmit", act.duration)
        return [(FREE, ChannelToken(ch.channel_id, ch.pu_present, 0), clock)]

    def fire_channel_updating(self, values, clock):
        act, ch = values
        self.preemptions += 1
        self.ledger.record_interval(act.su_id, "transmit", clock - act.start)
        self._emit(clock, EventKind.SU_PREEMPTED, act.su_id, act.channel_id)
        return [(OCCUPIED, ch, clock)]

    # -- driving ------------------------------------------------------------

    def start(self, connected: bool | None = None) -> bool:
        """Put the connection token in place unless gating holds it back."""
        if connected is None:
            connected = self.events.ready if self.events is not None else False
        if self.config.gate_on_connection and not connected:
            return False
        self.marking.add(CONNECTION, 1, 0)
        return True

    def run(self, on_quiescent=None, on_fire=None, keep_trace: bool = False) -> Trace:
        tie_break = self.source if self.config.tie_break == "random" else None
        trace = run(self.net, self.marking, self.horizon, on_fire=on_fire,
                    on_quiescent=on_quiescent, keep_trace=keep_trace, tie_break=tie_break)
        self.finish()
        return trace

    def finish(self) -> None:
        for act in self.marking.values(SU_ACTIVITY):
            self.ledger.record_interval(act.su_id, "transmit", min(self.horizon, act.start + act.duration) - act.start)
        self.ledger.close(self.horizon)

    def result(self, round_index: int = 0, seed: int = 0) -> RoundResult:
        cfg = self.config
        powers = PowerProfile(cfg.trans_power_mw, cfg.idle_power_mw, cfg.circuit_power_mw, cfg.switch_power_mw)
        literal = cfg.eq1_mode == "literal"
        per_su = {
            su: energy_per_su_per_frame(self.ledger, su, powers, cfg.frame_s, cfg.sim_time_s, literal)
            for su in self.ledger
        }
        n = len(per_su) or 1
        periods = [self.ledger[su] for su in self.ledger]
        return RoundResult(
            round_index=round_index,
            seed=seed,
            mean_energy_mj=sum(per_su.values()) / n,
            per_su=per_su,
            trans_s=sum(p.trans_s for p in periods) / n,
            idle_s=sum(p.idle_s for p in periods) / n,
            switching_s=sum(p.switching_s for p in periods) / n,
            switch_count=self.switch_count,
            pu_on_events=self.pu_on_events,
        )


def invariant_violations(model: CognitiveRadioNet) -> list[str]:
    """Marking-level invariants that must hold at every quiescent instant."""
    m = model.marking
    problems = []
    free = [c.channel_id for c in m.values(FREE)]
    occupied = [c.channel_id for c in m.values(OCCUPIED)]
    ids = free + occupied
    expected = set(model.state.channels) if model.config.model_all_pu else {model.state.prim, model.state.back}
    expected.discard(0)
    if sorted(ids) != sorted(expected):
        problems.append(f"channel conservation: free={sorted(free)} occupied={sorted(occupied)}")
    acts = m.values(SU_ACTIVITY)
    occ = set(occupied)
    for act in acts:
        if act.channel_id in occ:
            problems.append(f"SU {act.su_id} active on PU-occupied channel {act.channel_id}")
    act_channels = [a.channel_id for a in acts]
    if len(act_channels) != len(set(act_channels)):
        problems.append(f"several SU activities on one channel: {act_channels}")
    return problems


def simulate_round(
    config: Config,
    seed: int,
    round_index: int = 0,
    events: EventLog | None = None,
    backend: str | None = None,
    connected: bool | None = None,
) -> tuple[RoundResult, CognitiveRadioNet]:
    model = CognitiveRadioNet(config, StochasticSource(seed), events, backend)
    model.start(connected)
    model.run()
    return model.result(round_index, seed), model
