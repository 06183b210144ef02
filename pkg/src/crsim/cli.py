"""Command line entry point and multi-round experiment driver."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import Config, ConfigError, parse_config
from .events import EventLog, SinkError, attach_and_gate
from .kernel import BACKEND, split_seed
from .metrics import RoundResult, aggregate_rounds
from .model import simulate_round

log = logging.getLogger("crsim")

CSV_HEADER = (
    "round", "seed", "mean_energy_mj_per_frame", "trans_s", "idle_s",
    "switching_s", "switch_count", "pu_on_events",
)


class RoundError(RuntimeError):
    def __init__(self, round_index: int, seed: int, cause: BaseException):
        super().__init__(f"round {round_index} (seed {seed}) failed: {cause!r}")
        self.round_index = round_index
        self.seed = seed


@dataclass
class Summary:
    rounds: int
    mean: float
    ci95: float | None

    @property
    def relative_ci(self) -> float | None:
        if self.ci95 is None or self.mean == 0:
            return None
        return self.ci95 / abs(self.mean)

    def text(self, eq1_mode: str = "additive") -> str:
        lines = [
            f"rounds: {self.rounds}",
            f"mean energy per SU per frame ({eq1_mode}): {self.mean:.4f} mJ",
        ]
        if self.ci95 is None:
            lines.append("95% CI half-width: undefined (fewer than 2 rounds)")
        else:
            lines.append(f"95% CI half-width: {self.ci95:.4f} mJ ({100 * self.relative_ci:.3f}% of mean)")
        return "\n".join(lines) + "\n"


def round_seeds(config: Config) -> list[int]:
    return [split_seed(config.seed, i) for i in range(config.rounds)]


def _one_round(args):
    config, index, seed, backend = args
    try:
        result, _ = simulate_round(config, seed, index, backend=backend)
    except Exception as exc:
        raise RoundError(index, seed, exc) from exc
    return result


def summarize(results: list[RoundResult]) -> Summary:
    values = [r.mean_energy_mj for r in results]
    if len(values) >= 2:
        mean, half = aggregate_rounds(values)
        return Summary(len(values), mean, half)
    return Summary(len(values), values[0] if values else math.nan, None)


def write_csv(results: list[RoundResult], summary: Summary, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow([
            r.round_index, r.seed, f"{r.mean_energy_mj:.6f}", f"{r.trans_s:.6f}",
            f"{r.idle_s:.6f}", f"{r.switching_s:.6f}", r.switch_count, r.pu_on_events,
        ])
    ci = "nan" if summary.ci95 is None else f"{summary.ci95:.6f}"
    rel = "nan" if summary.relative_ci is None else f"{100 * summary.relative_ci:.4f}"
    fh.write(f"# rounds={summary.rounds},mean={summary.mean:.6f},ci95_halfwidth={ci},relative_ci_pct={rel}\n")


def csv_text(results: list[RoundResult], summary: Summary) -> str:
    buf = io.StringIO()
    write_csv(results, summary, buf)
    return buf.getvalue()


def run_experiment(
    config: Config,
    events: EventLog | None = None,
    backend: str | None = None,
    jobs: int = 1,
) -> tuple[list[RoundResult], Summary]:
    """Run ``config.rounds`` independent rounds and aggregate them.

    With an event log attached, rounds run sequentially in this process so
    the stream keeps round order. Otherwise ``jobs > 1`` spreads rounds over
    worker processes; results are always returned in round order.
    """
    seeds = round_seeds(config)
    tasks = [(config, i, s, backend) for i, s in enumerate(seeds)]
    if events is not None:
        results = []
        for config_, index, seed, backend_ in tasks:
            events.reset_clock()
            try:
                result, _ = simulate_round(config_, seed, index, events, backend_, connected=True)
            except Exception as exc:
                raise RoundError(index, seed, exc) from exc
            results.append(result)
    elif jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_round, tasks))
    else:
        results = [_one_round(t) for t in tasks]
    results.sort(key=lambda r: r.round_index)
    return results, summarize(results)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a multi-round energy experiment")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.add_argument("--out", help="CSV output path (default: print to stdout)")
    p.add_argument("--events", help="write the event label stream to this file")
    p.add_argument("--listen", type=int, metavar="PORT", help="stream events to one TCP client on PORT")
    p.add_argument("--gate", action="store_true", help="wait for a TCP client before simulating")
    p.add_argument("--eq1", choices=("additive", "literal"))
    p.add_argument("--sim-time", type=float, dest="sim_time_s", help="simulated seconds per round")
    p.add_argument("--timestamps", action="store_true", help="prefix event lines with <sim_time_us>|")
    p.add_argument("--tie-break", choices=("canonical", "random"), dest="tie_break",
                   help="order of simultaneous firings (random: seeded, for sensitivity checks)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes when no event sink is attached")
    p.add_argument("--backend", choices=("compiled", "python"), help="kernel backend (default: %s)" % BACKEND)
    return parser


def _overrides(args) -> dict:
    o = {
        "rounds": args.rounds,
        "seed": args.seed,
        "eq1_mode": args.eq1,
        "sim_time_s": args.sim_time_s,
        "tcp_port": args.listen,
        "tie_break": args.tie_break,
    }
    if args.gate:
        o["gate_on_connection"] = True
    if args.timestamps:
        o["timestamp_prefix"] = True
    return o


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    events = None
    try:
        config = parse_config(args.config, _overrides(args))
        port = config.tcp_port if (args.listen is not None or config.gate_on_connection) else None
        if args.events or port is not None:
            if port is not None and config.gate_on_connection:
                print(f"waiting for an event client on port {port}", file=sys.stderr)
            events = attach_and_gate(args.events, port, config.gate_on_connection,
                                     timestamp_prefix=config.timestamp_prefix)
            events.poll()
        t0 = time.perf_counter()
        results, summary = run_experiment(config, events, args.backend, args.jobs)
        elapsed = time.perf_counter() - t0
    except (ConfigError, SinkError, RoundError, OSError, ValueError) as exc:
        print(f"crsim: error: {exc}", file=sys.stderr)
        return 2
    finally:
        if events is not None:
            events.close()
    if args.out:
        with open(args.out, "w", newline="", encoding="ascii") as fh:
            write_csv(results, summary, fh)
        sys.stdout.write(summary.text(config.eq1_mode))
    else:
        sys.stdout.write(csv_text(results, summary))
        sys.stderr.write(summary.text(config.eq1_mode))
    log.info("%d rounds in %.1fs", len(results), elapsed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
