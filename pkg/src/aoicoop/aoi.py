"""Event-driven TDMA status-update engine with exact AoI accounting.

Time is a fixed slot grid: sensor ``i`` of round ``j`` generates at
``(j*N + i)*T`` and its packet is decoded at slot end. Forwarded packets and
soft-bit dumps arrive after a backbone delay and count only while they still
carry the newest generation time. Instantaneous age is integrated exactly
from trapezoids between update events; a brute-force time-stepping
integrator is provided as an independent cross-check.

Simultaneous events process in (time, sensor, ap) order, with the primary's
own decode (ap index 0) ahead of any arrival, so repeated runs are
bit-identical.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .backbone import DelayModel, payload_for
from .chain import ChainParams, joint_decode, realize_packet
from .errors import ConfigError, TraceFormatError
from .seeding import TAG_DECODE, TAG_DELAY, TAG_JOINT, substream

MODES = ("single_ap", "co_ap", "soft_co_ap")


# ---------------------------------------------------------------------------
# decode sources


@dataclass(frozen=True)
class BernoulliSource:
    """Independent per-(sensor, AP) decode flags plus joint-decode tables.

    ``p_decode[i, r]`` is sensor i's decode probability at AP r (r = 0 is the
    primary). ``p_joint[m][i, b - 1]`` is the probability that a joint decode
    using b remote branches succeeds, conditioned on the primary and those b
    secondaries all failing. The engine never invents these numbers; they
    come from a Monte Carlo table or from the user. Within one packet the
    joint attempts share a single uniform draw, so a larger table entry can
    only add successes (comonotone coupling).
    """

    p_decode: np.ndarray
    p_joint: Mapping[int, np.ndarray] | None = None

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.p_decode, dtype=np.float64))
        if np.any((p < 0) | (p > 1)):
            raise ValueError("decode probabilities must lie in [0, 1]")
        object.__setattr__(self, "p_decode", p)
        if self.p_joint is not None:
            cleaned = {}
            for m, table in self.p_joint.items():
                table = np.atleast_2d(np.asarray(table, dtype=np.float64))
                if np.any((table < 0) | (table > 1)):
                    raise ValueError("joint probabilities must lie in [0, 1]")
                cleaned[int(m)] = table
            object.__setattr__(self, "p_joint", cleaned)


@dataclass(frozen=True)
class TraceSource:
    """Replay recorded slot outcomes from a file or an in-memory list."""

    path: str | Path | None = None
    outcomes: Sequence["SlotOutcome"] | None = None

    def __post_init__(self):
        if (self.path is None) == (self.outcomes is None):
            raise ValueError("provide exactly one of path or outcomes")


@dataclass(frozen=True)
class MonteCarloSource:
    """Run the full PHY chain per slot; slow but exact, for small runs.

    ``snr_db[i, r]`` is sensor i's SNR at AP r. Joint decoding really
    combines the branches received so far, in arrival order.
    """

    snr_db: np.ndarray
    payload_bytes: int = 96
    profile: str = "flat"
    alpha: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "snr_db",
                           np.atleast_2d(np.asarray(self.snr_db, dtype=np.float64)))


DecodeSource = BernoulliSource | TraceSource | MonteCarloSource


# ---------------------------------------------------------------------------
# configuration and outcome records


@dataclass(frozen=True)
class SlotOutcome:
    """Decode outcomes of one (round, sensor) slot.

    ``joint`` maps m to the joint-decode outcome with every failed-secondary
    branch; slots where the primary succeeded or no secondary failed leave it
    empty. ``gen_time_ms`` is the slot-start generation time in milliseconds,
    exactly as written to trace files.
    """

    round_index: int
    sensor: int
    gen_time_ms: float
    decoded: tuple[bool, ...]
    joint: Mapping[int, bool] = field(default_factory=dict)

    def __post_init__(self):
        if not self.decoded:
            raise ValueError("decoded must name at least one AP")
        if any(self.joint.values()) and all(self.decoded[1:]):
            raise ValueError("joint success recorded without any failed secondary branch")


@dataclass
class SimConfig:
    """One simulation run; see ``run`` for the semantics of each mode."""

    mode: str
    n_sensors: int
    rounds: int
    decode_source: DecodeSource
    delay_model: DelayModel | None = None
    slot_seconds: float = 1.2e-3
    n_aps: int = 2
    m: int | None = None
    warmup_rounds: int = 10
    forward_data_bytes: int = 768
    seed: int = 0

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_sensors < 1:
            raise ConfigError("n_sensors must be at least 1")
        if not 0 <= self.warmup_rounds < self.rounds:
            raise ConfigError("rounds must exceed warmup_rounds (both nonnegative)")
        if self.slot_seconds <= 0:
            raise ConfigError("slot_seconds must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.mode == "single_ap":
            if self.n_aps < 1:
                raise ConfigError("n_aps must be at least 1")
        else:
            if self.n_aps < 2:
                raise ConfigError(f"{self.mode} needs at least one secondary AP")
            if self.delay_model is None:
                raise ConfigError(f"{self.mode} needs a delay model")
            if self.forward_data_bytes <= 0:
                raise ConfigError("forward_data_bytes must be positive")
        if self.mode == "soft_co_ap":
            if self.m is None or not 1 <= self.m <= 8:
                raise ConfigError("soft_co_ap needs m in {1..8}")
        if isinstance(self.decode_source, BernoulliSource):
            p = self.decode_source.p_decode
            if p.shape[0] not in (1, self.n_sensors) or p.shape[1] < self.n_aps:
                raise ConfigError(
                    f"p_decode shape {p.shape} does not cover {self.n_sensors} sensors"
                    f" x {self.n_aps} APs")
            if self.mode == "soft_co_ap":
                pj = self.decode_source.p_joint
                if pj is None or self.m not in pj:
                    raise ConfigError(f"soft_co_ap needs joint probabilities for m={self.m}")
                table = pj[self.m]
                if table.shape[0] not in (1, self.n_sensors) or table.shape[1] < self.n_aps - 1:
                    raise ConfigError(
                        f"p_joint[{self.m}] shape {table.shape} does not cover"
                        f" {self.n_aps - 1} branches")


@dataclass
class SimResult:
    """Outputs of one run: per-sensor and network time-average AoI, the
    update event log, and observed decode/delay statistics."""

    per_sensor_avg_aoi: np.ndarray
    network_avg_aoi: float
    updates: list[list[tuple[float, float]]]
    observed: dict


# ---------------------------------------------------------------------------
# AoI accounting


class _AoiTracker:
    """Exact trapezoidal integral of age over [t0, t_end] for one sensor."""

    __slots__ = ("gen", "t_last", "area", "t0", "t_end", "updates")

    def __init__(self, t0: float, t_end: float):
        self.gen = 0.0
        self.t_last = 0.0
        self.area = 0.0
        self.t0 = t0
        self.t_end = t_end
        self.updates: list[tuple[float, float]] = []

    def _accumulate(self, upto: float):
        lo = self.t_last if self.t_last > self.t0 else self.t0
        hi = upto if upto < self.t_end else self.t_end
        if hi > lo:
            self.area += (hi - lo) * ((lo - self.gen) + (hi - self.gen)) * 0.5

    def update(self, wall: float, gen: float):
        if gen <= self.gen:
            return
        self._accumulate(wall)
        self.gen = gen
        self.t_last = wall
        self.updates.append((wall, gen))

    def finalize(self) -> float:
        self._accumulate(self.t_end)
        self.t_last = self.t_end
        return self.area / (self.t_end - self.t0)


@dataclass
class AoiSeries:
    """Per-sensor age curve reconstructed from its update log.

    Update w drops the age to (wall_w - gen_w); between updates it grows at
    unit rate. ``areas`` and ``gaps`` follow the area-accounting form of the
    time average: the integral between consecutive updates and the time
    between them.
    """

    updates: list[tuple[float, float]]

    def age_at(self, t, gen0: float = 0.0):
        t = np.asarray(t, dtype=np.float64)
        walls = np.array([u[0] for u in self.updates])
        gens = np.array([gen0] + [u[1] for u in self.updates])
        idx = np.searchsorted(walls, t, side="right")
        return t - gens[idx]

    def areas(self) -> np.ndarray:
        out = []
        for (w_prev, g_prev), (w, _) in zip(self.updates, self.updates[1:]):
            z = w - w_prev
            out.append(z * (w_prev - g_prev) + 0.5 * z * z)
        return np.array(out)

    def gaps(self) -> np.ndarray:
        walls = [u[0] for u in self.updates]
        return np.diff(np.array(walls))

    def average(self, t0: float, t1: float, gen0: float = 0.0) -> float:
        """Exact time average of the age curve over [t0, t1]."""
        if t1 <= t0:
            raise ValueError("t1 must exceed t0")
        area = 0.0
        t_last, gen = 0.0, gen0
        for wall, g in self.updates + [(t1, None)]:
            lo, hi = max(t_last, t0), min(wall, t1)
            if hi > lo:
                area += (hi - lo) * ((lo - gen) + (hi - gen)) * 0.5
            if g is None or wall >= t1:
                break
            t_last, gen = wall, g
        return area / (t1 - t0)


# ---------------------------------------------------------------------------
# prepared decode sources (internal)


class _PreparedBernoulli:
    def __init__(self, src: BernoulliSource, cfg: SimConfig):
        N, R = cfg.n_sensors, cfg.n_aps
        p = np.broadcast_to(src.p_decode, (N, src.p_decode.shape[1])) \
            if src.p_decode.shape[0] == 1 else src.p_decode
        self.dec = np.empty((cfg.rounds, N, R), dtype=bool)
        for r in range(R):
            g = substream(cfg.seed, TAG_DECODE, r)
            self.dec[:, :, r] = g.random((cfg.rounds, N)) < p[None, :, r]
        self.u = None
        self.pj = None
        if cfg.mode == "soft_co_ap":
            table = src.p_joint[cfg.m]
            if table.shape[0] == 1:
                table = np.broadcast_to(table, (N, table.shape[1]))
            self.pj = table
            self.u = substream(cfg.seed, TAG_JOINT).random((cfg.rounds, N))

    def decoded(self, j: int, i: int):
        return self.dec[j, i]

    def joint(self, j: int, i: int, branches: tuple[int, ...], n_failed: int) -> bool:
        return bool(self.u[j, i] < self.pj[i, len(branches) - 1])


class _PreparedTrace:
    def __init__(self, src: TraceSource, cfg: SimConfig):
        outcomes = src.outcomes if src.outcomes is not None else ingest_trace(src.path)
        N, R = cfg.n_sensors, cfg.n_aps
        by_slot: dict[tuple[int, int], SlotOutcome] = {}
        for o in outcomes:
            by_slot[(o.round_index, o.sensor)] = o
        ms_per_slot = cfg.slot_seconds * 1e3
        self.dec = np.empty((cfg.rounds, N, R), dtype=bool)
        self.joint_flag = np.zeros((cfg.rounds, N), dtype=bool)
        for j in range(cfg.rounds):
            for i in range(N):
                o = by_slot.get((j, i))
                if o is None:
                    raise ConfigError(
                        f"trace is shorter than the requested horizon: no row for"
                        f" round {j}, sensor {i}")
                if len(o.decoded) < R:
                    raise ConfigError(
                        f"trace row for round {j}, sensor {i} covers {len(o.decoded)}"
                        f" APs but the run needs {R}")
                expected_ms = (j * N + i) * ms_per_slot
                if abs(o.gen_time_ms - expected_ms) > 1e-6 * max(1.0, abs(expected_ms)):
                    raise ConfigError(
                        f"trace row for round {j}, sensor {i} has gen_time"
                        f" {o.gen_time_ms} ms, expected {expected_ms} ms")
                self.dec[j, i] = o.decoded[:R]
                if cfg.mode == "soft_co_ap":
                    self.joint_flag[j, i] = bool(o.joint.get(cfg.m, False))

    def decoded(self, j: int, i: int):
        return self.dec[j, i]

    def joint(self, j: int, i: int, branches: tuple[int, ...], n_failed: int) -> bool:
        # a single recorded flag describes the full branch set only
        return bool(self.joint_flag[j, i]) if len(branches) == n_failed else False


class _PreparedMonteCarlo:
    _CACHE_LIMIT = 4096

    def __init__(self, src: MonteCarloSource, cfg: SimConfig):
        N = cfg.n_sensors
        snr = src.snr_db
        if snr.shape[0] == 1:
            snr = np.broadcast_to(snr, (N, snr.shape[1]))
        if snr.shape[0] != N or snr.shape[1] < cfg.n_aps:
            raise ConfigError(f"snr_db shape {snr.shape} does not cover"
                              f" {N} sensors x {cfg.n_aps} APs")
        self.snr = snr[:, :cfg.n_aps]
        self.params = ChainParams(payload_bytes=src.payload_bytes,
                                  profile=src.profile, alpha=src.alpha)
        self.seed = cfg.seed
        self.n = N
        self._cache: dict[tuple[int, int], object] = {}

    def _real(self, j: int, i: int):
        key = (j, i)
        real = self._cache.get(key)
        if real is None:
            real = realize_packet(self.snr[i], self.params, self.seed,
                                  j * self.n + i)
            if len(self._cache) >= self._CACHE_LIMIT:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = real
        return real

    def decoded(self, j: int, i: int):
        return np.array(self._real(j, i).decoded_ok, dtype=bool)

    def joint(self, j: int, i: int, branches: tuple[int, ...], n_failed: int,
              m: int | None = None) -> bool:
        return joint_decode(self._real(j, i), m, list(branches), self.params)


def _prepare_source(cfg: SimConfig):
    src = cfg.decode_source
    if isinstance(src, BernoulliSource):
        return _PreparedBernoulli(src, cfg)
    if isinstance(src, TraceSource):
        return _PreparedTrace(src, cfg)
    if isinstance(src, MonteCarloSource):
        return _PreparedMonteCarlo(src, cfg)
    raise ConfigError(f"unknown decode source {type(src).__name__}")


# ---------------------------------------------------------------------------
# the engine


def run(config: SimConfig) -> SimResult:
    """Simulate ``rounds * n_sensors`` slots and return average AoI.

    Per slot: the packet generated at slot start is decoded (or not) by every
    AP at slot end. A primary success updates the sensor immediately. In
    co_ap mode each successful secondary forwards the decoded packet, which
    arrives one backbone delay later. soft_co_ap layers on top: each FAILED
    secondary forwards its m-bit soft bytes, and the primary re-attempts a
    joint decode at each soft arrival using every branch received so far.
    Any arrival updates the sensor only while it still carries the newest
    generation time. Averages exclude the warmup rounds.
    """
    cfg = config
    cfg.validate()
    N, R, T = cfg.n_sensors, cfg.n_aps, cfg.slot_seconds
    rounds = cfg.rounds
    t_end = rounds * N * T
    t0 = cfg.warmup_rounds * N * T
    mode = cfg.mode
    src = _prepare_source(cfg)
    mc_joint = isinstance(src, _PreparedMonteCarlo)

    forwarding = mode != "single_ap"
    soft = mode == "soft_co_ap"
    if forwarding:
        model = cfg.delay_model
        pl_dec = payload_for("decoded", cfg.forward_data_bytes)
        pl_soft = payload_for("soft", cfg.forward_data_bytes, cfg.m) if soft else None
        delay_u = [None] + [substream(cfg.seed, TAG_DELAY, r).random((rounds, N))
                            for r in range(1, R)]

    trackers = [_AoiTracker(t0, t_end) for _ in range(N)]
    heap: list = []
    push, pop = heapq.heappush, heapq.heappop
    pending: dict[tuple[int, int], list] = {}
    seq = 0

    n_slots = rounds * N
    prim_ok = 0
    sec_ok = [0] * R
    joint_attempts = 0
    joint_ok = 0
    delay_sum = {"decoded": 0.0, "soft": 0.0}
    delay_n = {"decoded": 0, "soft": 0}

    def arrival(ev):
        nonlocal joint_attempts, joint_ok
        time_, i, r, _seq, j, gen, is_soft = ev
        if not is_soft:
            trackers[i].update(time_, gen)
            return
        entry = pending.get((j, i))
        entry[0].append(r)
        if trackers[i].gen < gen:
            joint_attempts += 1
            ok = (src.joint(j, i, tuple(entry[0]), entry[1], m=cfg.m) if mc_joint
                  else src.joint(j, i, tuple(entry[0]), entry[1]))
            if ok:
                joint_ok += 1
                trackers[i].update(time_, gen)
        if len(entry[0]) == entry[1]:
            del pending[(j, i)]

    for j in range(rounds):
        base = j * N
        for i in range(N):
            t = (base + i) * T
            tau = t + T
            while heap and (heap[0][0], heap[0][1], heap[0][2]) < (tau, i, 0):
                arrival(pop(heap))
            dec = src.decoded(j, i)
            if dec[0]:
                prim_ok += 1
                trackers[i].update(tau, t)
            if not forwarding:
                continue
            n_failed_sec = 0
            for r in range(1, R):
                if dec[r]:
                    sec_ok[r] += 1
                    d = model.sample_from_uniform(pl_dec, delay_u[r][j, i])
                    delay_sum["decoded"] += d
                    delay_n["decoded"] += 1
                    seq += 1
                    push(heap, (tau + d, i, r, seq, j, t, False))
                elif soft:
                    n_failed_sec += 1
                    d = model.sample_from_uniform(pl_soft, delay_u[r][j, i])
                    delay_sum["soft"] += d
                    delay_n["soft"] += 1
                    seq += 1
                    push(heap, (tau + d, i, r, seq, j, t, True))
            if n_failed_sec:
                pending[(j, i)] = [[], n_failed_sec]

    while heap and heap[0][0] <= t_end:
        arrival(pop(heap))

    per_sensor = np.array([tr.finalize() for tr in trackers])
    observed = {
        "p_primary": prim_ok / n_slots,
        "p_secondary": [sec_ok[r] / n_slots for r in range(1, R)],
        "joint_attempts": joint_attempts,
        "p_joint": joint_ok / joint_attempts if joint_attempts else float("nan"),
        "delay_decoded_mean_s": delay_sum["decoded"] / delay_n["decoded"]
                                if delay_n["decoded"] else float("nan"),
        "delay_soft_mean_s": delay_sum["soft"] / delay_n["soft"]
                             if delay_n["soft"] else float("nan"),
    }
    return SimResult(per_sensor_avg_aoi=per_sensor,
                     network_avg_aoi=float(per_sensor.mean()),
                     updates=[tr.updates for tr in trackers],
                     observed=observed)


def brute_force_oracle(config: SimConfig, step: float | None = None) -> SimResult:
    """Recompute average AoI by fine time-stepping the same event log.

    Runs the event engine, then numerically integrates each sensor's age
    curve on a midpoint grid no coarser than slot/1000. Restricted to small
    instances; this is a validation cross-check, not a fast path.
    """
    if config.n_sensors > 3:
        raise ValueError("oracle instances are limited to n_sensors <= 3")
    if config.rounds > 100:
        raise ValueError("oracle instances are limited to rounds <= 100")
    max_step = config.slot_seconds / 1000.0
    if step is None:
        step = max_step
    if step > max_step * (1 + 1e-12):
        raise ValueError("step must be at most slot_seconds / 1000")

    res = run(config)
    N, T = config.n_sensors, config.slot_seconds
    t_end = config.rounds * N * T
    t0 = config.warmup_rounds * N * T
    span = t_end - t0
    n_cells = max(int(round(span / step)), 1)
    mids = t0 + (np.arange(n_cells) + 0.5) * (span / n_cells)

    per_sensor = np.empty(N)
    for i in range(N):
        ages = AoiSeries(res.updates[i]).age_at(mids)
        per_sensor[i] = float(ages.mean())
    return SimResult(per_sensor_avg_aoi=per_sensor,
                     network_avg_aoi=float(per_sensor.mean()),
                     updates=res.updates,
                     observed=res.observed)


# ---------------------------------------------------------------------------
# trace files


_N_JOINT_COLS = 8


def emit_trace(outcomes: Sequence[SlotOutcome], path) -> None:
    """Write slot outcomes as one CSV row per slot.

    Columns: round, sensor, gen_time_ms, one decode flag per AP, then
    joint_m1..joint_m8 with blanks where no joint attempt applies.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("refusing to write an empty trace")
    n_aps = len(outcomes[0].decoded)
    with open(path, "w") as fh:
        dec_cols = ",".join(f"dec_ap{r + 1}" for r in range(n_aps))
        joint_cols = ",".join(f"joint_m{m}" for m in range(1, _N_JOINT_COLS + 1))
        fh.write(f"# columns: round,sensor,gen_time_ms,{dec_cols},{joint_cols}\n")
        for o in outcomes:
            if len(o.decoded) != n_aps:
                raise ValueError("all outcomes must cover the same number of APs")
            cells = [str(o.round_index), str(o.sensor), repr(float(o.gen_time_ms))]
            cells += [str(int(d)) for d in o.decoded]
            for m in range(1, _N_JOINT_COLS + 1):
                flag = o.joint.get(m)
                cells.append("" if flag is None else str(int(flag)))
            fh.write(",".join(cells) + "\n")


def ingest_trace(path) -> list[SlotOutcome]:
    """Parse a trace file; malformed rows raise with their line number."""
    path = Path(path)
    outcomes: list[SlotOutcome] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if len(cells) < 3 + 1 + _N_JOINT_COLS:
                raise TraceFormatError(
                    f"{path}:{lineno}: expected at least {4 + _N_JOINT_COLS}"
                    f" columns, got {len(cells)}")
            n_aps = len(cells) - 3 - _N_JOINT_COLS
            try:
                round_index = int(cells[0])
                sensor = int(cells[1])
                gen_ms = float(cells[2])
                decoded = tuple(bool(int(c)) for c in cells[3:3 + n_aps])
                joint: dict[int, bool] = {}
                for m, cell in enumerate(cells[3 + n_aps:], start=1):
                    if cell != "":
                        joint[m] = bool(int(cell))
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            try:
                outcomes.append(SlotOutcome(round_index=round_index, sensor=sensor,
                                            gen_time_ms=gen_ms, decoded=decoded,
                                            joint=joint))
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
    if not outcomes:
        raise TraceFormatError(f"{path}: trace contains no slot rows")
    return outcomes
