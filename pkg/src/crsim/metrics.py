"""Per-SU time accounting, energy per frame, and cross-round statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import fmean, stdev

from scipy import stats

US_PER_S = 1_000_000
KINDS = ("transmit", "idle", "switching")


@dataclass(frozen=True)
class PowerProfile:
    """Radio power draw per state, in mW."""

    trans_power: float = 1980.0
    idle_power: float = 990.0
    circuit_power: float = 210.0
    switch_power: float = 1000.0

    def __post_init__(self):
        for name in ("trans_power", "idle_power", "circuit_power", "switch_power"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class SuPeriods:
    """Accumulated microseconds per activity class for one SU."""

    transmit: int = 0
    idle: int = 0
    switching: int = 0
    presence: int = 0
    arrival: int | None = None

    @property
    def trans_s(self) -> float:
        return self.transmit / US_PER_S

    @property
    def idle_s(self) -> float:
        return self.idle / US_PER_S

    @property
    def switching_s(self) -> float:
        return self.switching / US_PER_S

    @property
    def presence_s(self) -> float:
        return self.presence / US_PER_S

    def accounted(self) -> int:
        return self.transmit + self.idle + self.switching


class PeriodLedger:
    def __init__(self):
        self.periods: dict[int, SuPeriods] = {}

    def arrive(self, su_id: int, time_us: int) -> None:
        self.periods.setdefault(su_id, SuPeriods()).arrival = time_us

    def record_interval(self, su_id: int, kind: str, duration_us: int) -> None:
        if duration_us < 0:
            raise ValueError(f"negative {kind} duration {duration_us} for SU {su_id}")
        if kind not in KINDS:
            raise ValueError(f"unknown interval kind {kind!r}")
        if not duration_us:
            return
        p = self.periods.setdefault(su_id, SuPeriods())
        setattr(p, kind, getattr(p, kind) + duration_us)

    def close(self, horizon_us: int) -> None:
        """Fix presence at the horizon and book the unaccounted remainder as idle."""
        for su_id, p in self.periods.items():
            if p.arrival is None or p.arrival > horizon_us:
                continue
            p.presence = horizon_us - p.arrival
            rest = p.presence - p.accounted()
            if rest < 0:
                raise ValueError(f"SU {su_id}: {p.accounted()} us accounted over {p.presence} us presence")
            self.record_interval(su_id, "idle", rest)

    def __getitem__(self, su_id: int) -> SuPeriods:
        return self.periods[su_id]

    def __iter__(self):
        return iter(sorted(self.periods))

    def __len__(self) -> int:
        return len(self.periods)


def record_interval(ledger: PeriodLedger, su_id: int, kind: str, duration_us: int) -> None:
    ledger.record_interval(su_id, kind, duration_us)


def energy_mj_per_frame(
    trans_s: float,
    idle_s: float,
    switching_s: float,
    powers: PowerProfile,
    frame_s: float,
    sim_time_s: float,
    literal_eq1: bool = False,
) -> float:
    """Energy one SU spends per frame, in mJ.

    Default: circuit power is drawn over the whole simulated time and added
    to the state-dependent terms. ``literal_eq1`` instead multiplies the
    state-dependent sum by the circuit power, kept for comparison only
    (the result then has units of mW*mJ).
    """
    if sim_time_s <= 0:
        raise ValueError("sim_time_s must be > 0")
    states = trans_s * powers.trans_power + idle_s * powers.idle_power + switching_s * powers.switch_power
    if literal_eq1:
        return states * powers.circuit_power * frame_s / sim_time_s
    return (states + sim_time_s * powers.circuit_power) * frame_s / sim_time_s


def energy_per_su_per_frame(
    ledger: PeriodLedger,
    su_id: int,
    powers: PowerProfile,
    frame_s: float,
    sim_time_s: float,
    literal_eq1: bool = False,
) -> float:
    p = ledger[su_id]
    return energy_mj_per_frame(p.trans_s, p.idle_s, p.switching_s, powers, frame_s, sim_time_s, literal_eq1)


def aggregate_rounds(values) -> tuple[float, float]:
    """Sample mean and Student-t 95% confidence half-width."""
    values = list(values)
    n = len(values)
    if n < 2:
        raise ValueError("need at least two rounds for a confidence interval")
    s = stdev(values)
    return fmean(values), float(stats.t.ppf(0.975, n - 1)) * s / math.sqrt(n)


@dataclass
class RoundResult:
    round_index: int
    seed: int
    mean_energy_mj: float
    per_su: dict[int, float] = field(default_factory=dict)
    trans_s: float = 0.0
    idle_s: float = 0.0
    switching_s: float = 0.0
    switch_count: int = 0
    pu_on_events: int = 0
