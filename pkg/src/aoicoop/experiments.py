"""Experiment configuration, sweep orchestration, and result emission.

Experiments are described by flat INI files (sections of key = value pairs;
see the README for the full key reference). A sweep runs one simulation per
(sweep value, mode, replication) with seeds derived counter-style from the
master seed, writes one CSV row per run, and emits plain columnar plot data
plus a JSON manifest. Decode probabilities are estimated once per distinct
link class by Monte Carlo over the PHY chain and then drive the event engine
as Bernoulli outcomes, mirroring the trace-driven two-stage methodology.
"""

from __future__ import annotations

import configparser
import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aoi import BernoulliSource, SimConfig, SlotOutcome, TraceSource, brute_force_oracle, emit_trace, run
from .backbone import ConstantDelayModel, EmpiricalDelayModel, ParametricDelayModel
from .chain import ChainParams, LinkProbTable, estimate_link_probabilities
from .errors import ConfigError, ConfigValidationError
from .phy import TimingParams, packet_duration
from .seeding import TAG_JOB, TAG_TABLE, spawn_seed

SWEEP_AXES = ("snr_primary", "n_sensors", "m", "n_aps")
WORKERS_ENV = "AOICOOP_WORKERS"

_MODE_DEFAULTS = {
    "snr_primary": ("single_ap", "co_ap", "soft_co_ap"),
    "n_sensors": ("single_ap", "co_ap", "soft_co_ap"),
    "m": ("soft_co_ap",),
    "n_aps": ("co_ap", "soft_co_ap"),
}

# every legal key, per section, with (type, default); None default = required
_SCHEMA = {
    "experiment": {
        "name": (str, "experiment"),
        "sweep": (str, None),
        "values": (str, None),
        "modes": (str, ""),
        "replications": (int, 1),
        "seed": (int, 0),
        "output_dir": (str, ""),
        "workers": (int, 1),
    },
    "sim": {
        "n_sensors": (int, 10),
        "slot_ms": (float, 1.2),
        "rounds": (int, 10000),
        "warmup_rounds": (int, 10),
        "n_aps": (int, 2),
        "m": (int, 4),
        "forward_data_bytes": (int, 768),
    },
    "phy": {
        "payload_bytes": (int, 96),
        "profile": (str, "flat"),
        "snr_primary_db": (float, 5.0),
        "snr_secondary_offset_db": (float, 1.0),
        "alpha": (float, 0.25),
        "packets_per_point": (int, 4000),
        "trace_file": (str, ""),
    },
    "delay": {
        "model": (str, "parametric"),
        "constant_ms": (float, 10.0),
        "base_ms": (float, 1.0),
        "per_fragment_ms": (float, 2.1),
        "jitter": (float, 0.25),
        "samples_dir": (str, ""),
        "round_trip": (str, ""),
    },
}


@dataclass(frozen=True)
class SensorClass:
    """A group of sensors sharing one link geometry.

    ``count`` is an exact sensor count, except under an n_sensors sweep where
    it acts as a proportion weight.
    """

    name: str
    count: int
    snr_primary_db: float
    snr_secondary_offset_db: float


@dataclass
class ExperimentSpec:
    """A validated, fully defaulted experiment description."""

    name: str
    sweep: str
    values: list
    modes: list[str]
    replications: int
    seed: int
    output_dir: Path
    workers: int
    sim: dict
    phy: dict
    delay: dict
    sensor_classes: list[SensorClass] = field(default_factory=list)

    def describe(self) -> str:
        lines = [f"experiment.name = {self.name}",
                 f"experiment.sweep = {self.sweep}",
                 f"experiment.values = {','.join(str(v) for v in self.values)}",
                 f"experiment.modes = {','.join(self.modes)}",
                 f"experiment.replications = {self.replications}",
                 f"experiment.seed = {self.seed}",
                 f"experiment.output_dir = {self.output_dir}",
                 f"experiment.workers = {self.workers}"]
        for section in ("sim", "phy", "delay"):
            for key, value in getattr(self, section).items():
                lines.append(f"{section}.{key} = {value}")
        for c in self.sensor_classes:
            lines.append(f"sensors.{c.name} = count={c.count}"
                         f" snr_primary_db={c.snr_primary_db}"
                         f" snr_secondary_offset_db={c.snr_secondary_offset_db}")
        return "\n".join(lines)


def _parse_values(text: str, sweep: str, errors: list[str]) -> list:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(float(token) if sweep == "snr_primary" else int(token))
        except ValueError:
            errors.append(f"experiment.values: {token!r} is not a number")
            return []
    if not out:
        errors.append("experiment.values: at least one sweep value required")
    elif any(b <= a for a, b in zip(out, out[1:])):
        errors.append("experiment.values: values must be strictly increasing")
    return out


def _parse_sensor_classes(cp: configparser.ConfigParser, errors: list[str]) -> list[SensorClass]:
    classes: list[SensorClass] = []
    if not cp.has_section("sensors"):
        return classes
    for name, value in cp.items("sensors"):
        fields = {}
        for token in value.split():
            if "=" not in token:
                errors.append(f"sensors.{name}: expected key=value tokens, got {token!r}")
                return []
            key, _, raw = token.partition("=")
            fields[key] = raw
        unknown = set(fields) - {"count", "snr_primary_db", "snr_secondary_offset_db"}
        for key in sorted(unknown):
            errors.append(f"sensors.{name}: unknown key {key!r}")
        try:
            classes.append(SensorClass(
                name=name,
                count=int(fields.get("count", "0")),
                snr_primary_db=float(fields.get("snr_primary_db", "nan")),
                snr_secondary_offset_db=float(fields.get("snr_secondary_offset_db", "1.0")),
            ))
        except ValueError as exc:
            errors.append(f"sensors.{name}: {exc}")
    for c in classes:
        if c.count < 1:
            errors.append(f"sensors.{c.name}: count must be at least 1")
        if np.isnan(c.snr_primary_db):
            errors.append(f"sensors.{c.name}: snr_primary_db is required")
    return classes


def validate_config(path, overrides: dict[str, str] | None = None) -> ExperimentSpec:
    """Parse and validate a config file into a normalized ExperimentSpec.

    Every problem found is reported at once in the raised
    ``ConfigValidationError``; unknown sections and keys are rejected rather
    than silently ignored.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigValidationError([f"cannot read config: {exc}"])
    except configparser.Error as exc:
        raise ConfigValidationError([f"config does not parse: {exc}"])

    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)

    errors: list[str] = []
    for section in cp.sections():
        if section not in _SCHEMA and section != "sensors":
            errors.append(f"unknown section [{section}]")
    parsed: dict[str, dict] = {}
    for section, schema in _SCHEMA.items():
        values = {}
        present = dict(cp.items(section)) if cp.has_section(section) else {}
        for key in present:
            if key not in schema:
                errors.append(f"{section}.{key}: unknown key")
        for key, (typ, default) in schema.items():
            if key in present:
                raw = present[key].strip()
                try:
                    values[key] = typ(raw)
                except ValueError:
                    errors.append(f"{section}.{key}: cannot parse {raw!r} as {typ.__name__}")
                    values[key] = default
            else:
                if default is None:
                    errors.append(f"{section}.{key}: required key missing")
                values[key] = default
        parsed[section] = values

    exp = parsed["experiment"]
    sweep = (exp.get("sweep") or "").strip()
    if sweep and sweep not in SWEEP_AXES:
        errors.append(f"experiment.sweep: must be one of {'|'.join(SWEEP_AXES)}, got {sweep!r}")
    values = _parse_values(exp.get("values") or "", sweep, errors) if exp.get("values") else []

    modes_text = (exp.get("modes") or "").strip()
    if modes_text:
        modes = [m.strip() for m in modes_text.split(",") if m.strip()]
    else:
        modes = list(_MODE_DEFAULTS.get(sweep, ("single_ap", "co_ap", "soft_co_ap")))
    for mode in modes:
        if mode not in ("single_ap", "co_ap", "soft_co_ap"):
            errors.append(f"experiment.modes: unknown mode {mode!r}")
    if sweep == "m" and set(modes) - {"soft_co_ap"}:
        errors.append("experiment.modes: an m sweep only makes sense for soft_co_ap")
    if sweep == "n_aps" and "single_ap" in modes:
        errors.append("experiment.modes: an n_aps sweep does not apply to single_ap")

    if exp["replications"] < 1:
        errors.append("experiment.replications: must be at least 1")
    if exp["seed"] < 0:
        errors.append("experiment.seed: must be nonnegative")
    if exp["workers"] < 1:
        errors.append("experiment.workers: must be at least 1")

    sim = parsed["sim"]
    if sim["slot_ms"] <= 0:
        errors.append("sim.slot_ms: must be positive")
    if sim["n_sensors"] < 1:
        errors.append("sim.n_sensors: must be at least 1")
    if sim["rounds"] <= sim["warmup_rounds"] or sim["warmup_rounds"] < 0:
        errors.append("sim.rounds: must exceed sim.warmup_rounds (both nonnegative)")
    if not 1 <= sim["m"] <= 8:
        errors.append(f"sim.m: must be in {{1..8}}, got {sim['m']}")
    if sim["n_aps"] < 1:
        errors.append("sim.n_aps: must be at least 1")
    if sim["forward_data_bytes"] < 1:
        errors.append("sim.forward_data_bytes: must be at least 1")
    if sweep == "m":
        for v in values:
            if not 1 <= v <= 8:
                errors.append(f"experiment.values: m sweep values must be in {{1..8}}, got {v}")
    if sweep == "n_aps":
        for v in values:
            if v < 2:
                errors.append(f"experiment.values: n_aps sweep values must be at least 2, got {v}")
    if sweep == "n_sensors":
        for v in values:
            if v < 1:
                errors.append(f"experiment.values: n_sensors sweep values must be at least 1, got {v}")

    phy = parsed["phy"]
    if phy["payload_bytes"] < 1:
        errors.append("phy.payload_bytes: must be at least 1")
    if phy["profile"] not in ("flat", "rayleigh_per_symbol"):
        errors.append(f"phy.profile: must be flat or rayleigh_per_symbol, got {phy['profile']!r}")
    if not 0.2 <= phy["alpha"] <= 0.5:
        errors.append("phy.alpha: must lie in [0.2, 0.5]")
    if phy["packets_per_point"] < 1:
        errors.append("phy.packets_per_point: must be at least 1")
    if phy["trace_file"]:
        if not Path(phy["trace_file"]).exists():
            errors.append(f"phy.trace_file: {phy['trace_file']!r} does not exist")
    elif sim["slot_ms"] > 0 and phy["payload_bytes"] >= 1:
        try:
            packet_duration(TimingParams(payload_bytes=phy["payload_bytes"],
                                         slot_seconds=sim["slot_ms"] * 1e-3))
        except (ConfigError, ValueError) as exc:
            errors.append(f"phy.payload_bytes: {exc}")

    delay = parsed["delay"]
    if delay["model"] not in ("constant", "parametric", "empirical"):
        errors.append(f"delay.model: must be constant, parametric or empirical,"
                      f" got {delay['model']!r}")
    if delay["model"] == "constant" and delay["constant_ms"] <= 0:
        errors.append("delay.constant_ms: must be positive")
    if delay["model"] == "parametric":
        if delay["base_ms"] < 0 or delay["per_fragment_ms"] < 0 \
                or delay["base_ms"] + delay["per_fragment_ms"] <= 0:
            errors.append("delay.base_ms/per_fragment_ms: must be nonnegative, not both zero")
        if not 0 <= delay["jitter"] < 1:
            errors.append("delay.jitter: must lie in [0, 1)")
    if delay["model"] == "empirical":
        if not delay["samples_dir"]:
            errors.append("delay.samples_dir: required for the empirical model")
        elif not Path(delay["samples_dir"]).is_dir():
            errors.append(f"delay.samples_dir: {delay['samples_dir']!r} is not a directory")
    if delay["round_trip"] and delay["round_trip"].lower() not in ("true", "false"):
        errors.append("delay.round_trip: must be true or false")

    classes = _parse_sensor_classes(cp, errors)
    if classes and sweep != "n_sensors":
        total = sum(c.count for c in classes)
        if total != sim["n_sensors"]:
            errors.append(f"sensors: class counts sum to {total},"
                          f" but sim.n_sensors is {sim['n_sensors']}")

    if errors:
        raise ConfigValidationError(errors)

    out_dir = Path(exp["output_dir"]) if exp["output_dir"] else Path("results") / exp["name"]
    return ExperimentSpec(name=exp["name"], sweep=sweep, values=values, modes=modes,
                          replications=exp["replications"], seed=exp["seed"],
                          output_dir=out_dir, workers=exp["workers"],
                          sim=sim, phy=phy, delay=delay, sensor_classes=classes)


# ---------------------------------------------------------------------------
# delay model and link-class plumbing


def build_delay_model(delay: dict):
    if delay["model"] == "constant":
        return ConstantDelayModel(delay["constant_ms"] * 1e-3)
    if delay["model"] == "parametric":
        return ParametricDelayModel(delay["base_ms"] * 1e-3,
                                    delay["per_fragment_ms"] * 1e-3,
                                    delay["jitter"])
    paths = sorted(Path(delay["samples_dir"]).glob("*.txt"))
    if not paths:
        raise ConfigError(f"delay.samples_dir: no *.txt sample files in {delay['samples_dir']}")
    assume = None
    if delay["round_trip"]:
        # files hold round trips -> they are not one-way measurements
        assume = delay["round_trip"].lower() != "true"
    return EmpiricalDelayModel.from_files(paths, assume_oneway=assume)


def _sensor_classes_for(spec: ExperimentSpec, n_sensors: int) -> list[tuple[SensorClass, int]]:
    """Resolve class counts for a concrete sensor total."""
    classes = spec.sensor_classes
    if not classes:
        base = SensorClass("all", n_sensors, spec.phy["snr_primary_db"],
                           spec.phy["snr_secondary_offset_db"])
        return [(base, n_sensors)]
    total_weight = sum(c.count for c in classes)
    if spec.sweep != "n_sensors":
        return [(c, c.count) for c in classes]
    # proportional split with largest-remainder rounding, deterministic
    raw = [n_sensors * c.count / total_weight for c in classes]
    counts = [int(x) for x in raw]
    remainders = sorted(range(len(classes)), key=lambda k: (-(raw[k] - counts[k]), k))
    for k in remainders[:n_sensors - sum(counts)]:
        counts[k] += 1
    return [(c, n) for c, n in zip(classes, counts)]


def _snr_tuple(cls: SensorClass, primary_db: float, n_aps: int) -> tuple[float, ...]:
    return (primary_db,) + (primary_db + cls.snr_secondary_offset_db,) * (n_aps - 1)


# ---------------------------------------------------------------------------
# Monte Carlo probability tables


def _tables_for(spec: ExperimentSpec) -> dict[tuple, LinkProbTable]:
    """Estimate one probability table per distinct link class of the sweep."""
    params = ChainParams(payload_bytes=spec.phy["payload_bytes"],
                         profile=spec.phy["profile"], alpha=spec.phy["alpha"])
    n_aps_max = max(spec.values) if spec.sweep == "n_aps" else spec.sim["n_aps"]
    m_values = sorted(set(spec.values if spec.sweep == "m" else [spec.sim["m"]]))
    if "soft_co_ap" not in spec.modes:
        m_values = m_values[:1]  # table still carries one column for the CSV

    needed: list[tuple] = []
    primaries = spec.values if spec.sweep == "snr_primary" else [spec.phy["snr_primary_db"]]
    for primary in primaries:
        for cls, _count in _sensor_classes_for(spec, spec.sim["n_sensors"]):
            base = primary if spec.sweep == "snr_primary" else cls.snr_primary_db
            key = _snr_tuple(cls, base, n_aps_max)
            if key not in needed:
                needed.append(key)

    tables: dict[tuple, LinkProbTable] = {}
    for idx, snrs in enumerate(needed):
        seed = spawn_seed(spec.seed, TAG_TABLE, idx)
        table, _ = estimate_link_probabilities(snrs, params, m_values,
                                               spec.phy["packets_per_point"], seed)
        tables[snrs] = table
    return tables


def _bernoulli_from_tables(spec: ExperimentSpec, tables, n_sensors: int,
                           n_aps: int, primary_db: float | None) -> BernoulliSource:
    p_rows = []
    joint_rows: dict[int, list] = {}
    n_aps_max = max(spec.values) if spec.sweep == "n_aps" else spec.sim["n_aps"]
    for cls, count in _sensor_classes_for(spec, n_sensors):
        base = primary_db if primary_db is not None else cls.snr_primary_db
        table = tables[_snr_tuple(cls, base, n_aps_max)]
        for _ in range(count):
            p_rows.append(table.p_ap[:n_aps])
            for m, col in table.p_joint.items():
                joint_rows.setdefault(m, []).append(np.nan_to_num(col[:n_aps - 1]))
    p_joint = {m: np.array(rows) for m, rows in joint_rows.items()} or None
    return BernoulliSource(p_decode=np.array(p_rows), p_joint=p_joint)


# ---------------------------------------------------------------------------
# jobs and rows

_CSV_COLUMNS = [
    "scenario", "mode", "sweep_axis", "sweep_value", "replication", "seed",
    "n_sensors", "n_aps", "m", "slot_ms", "rounds", "warmup_rounds",
    "payload_bytes", "forward_data_bytes", "profile",
    "snr_primary_db", "snr_secondary_offset_db", "alpha", "delay_model",
    "p_primary_cfg", "p_secondary_cfg", "p_joint_cfg",
    "p_primary_obs", "p_secondary_obs", "p_joint_obs",
    "delay_decoded_obs_ms", "delay_soft_obs_ms",
    "network_avg_aoi_ms", "per_sensor_avg_aoi_ms",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if np.isnan(value):
            return ""
        return f"{value:.10g}"
    return str(value)


@dataclass
class _Job:
    spec: ExperimentSpec
    tables: dict
    mode: str
    sweep_value: object
    value_index: int
    replication: int

    def sim_config(self) -> tuple[SimConfig, dict]:
        spec = self.spec
        n_sensors = int(self.sweep_value) if spec.sweep == "n_sensors" else spec.sim["n_sensors"]
        n_aps = int(self.sweep_value) if spec.sweep == "n_aps" else spec.sim["n_aps"]
        if self.mode == "single_ap":
            n_aps = max(n_aps, 1)
        m = int(self.sweep_value) if spec.sweep == "m" else spec.sim["m"]
        primary_db = float(self.sweep_value) if spec.sweep == "snr_primary" else None
        seed = spawn_seed(spec.seed, TAG_JOB, self.value_index,
                          ("single_ap", "co_ap", "soft_co_ap").index(self.mode),
                          self.replication)
        if spec.phy["trace_file"]:
            source = TraceSource(path=spec.phy["trace_file"])
            cfg_probs = {"p_primary_cfg": None, "p_secondary_cfg": None, "p_joint_cfg": None}
        else:
            source = _bernoulli_from_tables(spec, self.tables, n_sensors, n_aps, primary_db)
            pj = source.p_joint.get(m) if source.p_joint else None
            cfg_probs = {
                "p_primary_cfg": float(source.p_decode[:, 0].mean()),
                "p_secondary_cfg": float(source.p_decode[:, 1:n_aps].mean()) if n_aps > 1 else None,
                "p_joint_cfg": float(pj[:, 0].mean()) if pj is not None
                               and self.mode == "soft_co_ap" else None,
            }
        cfg = SimConfig(
            mode=self.mode, n_sensors=n_sensors, rounds=spec.sim["rounds"],
            decode_source=source,
            delay_model=build_delay_model(spec.delay) if self.mode != "single_ap" else None,
            slot_seconds=spec.sim["slot_ms"] * 1e-3,
            n_aps=1 if self.mode == "single_ap" else n_aps,
            m=m if self.mode == "soft_co_ap" else None,
            warmup_rounds=spec.sim["warmup_rounds"],
            forward_data_bytes=spec.sim["forward_data_bytes"],
            seed=seed,
        )
        return cfg, cfg_probs


def _run_job(job: _Job) -> dict:
    spec = job.spec
    cfg, cfg_probs = job.sim_config()
    res = run(cfg)
    obs = res.observed
    row = {
        "scenario": spec.name,
        "mode": job.mode,
        "sweep_axis": spec.sweep,
        "sweep_value": job.sweep_value,
        "replication": job.replication,
        "seed": cfg.seed,
        "n_sensors": cfg.n_sensors,
        "n_aps": cfg.n_aps,
        "m": cfg.m,
        "slot_ms": spec.sim["slot_ms"],
        "rounds": cfg.rounds,
        "warmup_rounds": cfg.warmup_rounds,
        "payload_bytes": spec.phy["payload_bytes"],
        "forward_data_bytes": cfg.forward_data_bytes,
        "profile": spec.phy["profile"],
        "snr_primary_db": float(job.sweep_value) if spec.sweep == "snr_primary"
                          else spec.phy["snr_primary_db"],
        "snr_secondary_offset_db": spec.phy["snr_secondary_offset_db"],
        "alpha": spec.phy["alpha"],
        "delay_model": spec.delay["model"] if job.mode != "single_ap" else None,
        "p_primary_obs": obs["p_primary"],
        "p_secondary_obs": float(np.mean(obs["p_secondary"])) if obs["p_secondary"] else None,
        "p_joint_obs": obs["p_joint"],
        "delay_decoded_obs_ms": obs["delay_decoded_mean_s"] * 1e3,
        "delay_soft_obs_ms": obs["delay_soft_mean_s"] * 1e3,
        "network_avg_aoi_ms": res.network_avg_aoi * 1e3,
        "per_sensor_avg_aoi_ms": ";".join(f"{v * 1e3:.10g}" for v in res.per_sensor_avg_aoi),
    }
    row.update(cfg_probs)
    return row


@dataclass
class ExperimentResult:
    rows: list[dict]
    csv_path: Path
    plot_paths: list[Path]
    manifest_path: Path
    table_path: Path | None


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every (value, mode, replication) job and write all outputs.

    Jobs are independent and may execute on a process pool
    (experiment.workers, overridden by the AOICOOP_WORKERS environment
    variable); results are identical regardless of pool width.
    """
    workers = spec.workers
    env_workers = os.environ.get(WORKERS_ENV, "").strip()
    if env_workers:
        workers = max(int(env_workers), 1)

    tables = {} if spec.phy["trace_file"] else _tables_for(spec)
    jobs = [
        _Job(spec=spec, tables=tables, mode=mode, sweep_value=value,
             value_index=vi, replication=rep)
        for vi, value in enumerate(spec.values)
        for mode in spec.modes
        for rep in range(spec.replications)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_job, jobs))
    else:
        rows = [_run_job(job) for job in jobs]

    spec.output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = spec.output_dir / "results.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in _CSV_COLUMNS])

    plot_dir = spec.output_dir / "plotdata"
    plot_dir.mkdir(exist_ok=True)
    plot_paths = []
    curves = []
    for mode in spec.modes:
        path = plot_dir / f"curve_{mode}.dat"
        with open(path, "w") as fh:
            fh.write(f"# x={spec.sweep}  y=network_avg_aoi_ms (mean, stderr, n over"
                     f" replications)\n")
            for value in spec.values:
                ys = np.array([row["network_avg_aoi_ms"] for row in rows
                               if row["mode"] == mode and row["sweep_value"] == value])
                stderr = float(ys.std(ddof=1) / np.sqrt(ys.size)) if ys.size > 1 else 0.0
                fh.write(f"{_fmt(value)} {ys.mean():.10g} {stderr:.10g} {ys.size}\n")
        plot_paths.append(path)
        label = mode if mode != "soft_co_ap" or spec.sweep == "m" \
            else f"soft_co_ap m={spec.sim['m']}"
        curves.append({"mode": mode, "file": str(path.relative_to(spec.output_dir)),
                       "label": label})

    manifest_path = spec.output_dir / "manifest.json"
    manifest = {"name": spec.name, "x_axis": spec.sweep, "csv": "results.csv",
                "curves": curves}
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    table_path = None
    if tables:
        table_path = spec.output_dir / "probabilities.csv"
        _write_tables(tables, table_path)
    return ExperimentResult(rows=rows, csv_path=csv_path, plot_paths=plot_paths,
                            manifest_path=manifest_path, table_path=table_path)


def _write_tables(tables: dict[tuple, LinkProbTable], path: Path) -> None:
    n_aps = max(len(k) for k in tables)
    m_values = sorted({m for t in tables.values() for m in t.p_joint})
    cols = [f"snr_ap{r + 1}_db" for r in range(n_aps)] + ["n_packets"]
    cols += [f"p_ap{r + 1}" for r in range(n_aps)]
    for m in m_values:
        for b in range(1, n_aps):
            cols.append(f"p_joint_m{m}_b{b}")
    cols += [f"n_cond_b{b}" for b in range(1, n_aps)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for snrs in sorted(tables):
            t = tables[snrs]
            row = [_fmt(float(s)) for s in snrs] + [str(t.n_packets)]
            row += [_fmt(float(p)) for p in t.p_ap]
            for m in m_values:
                col = t.p_joint.get(m)
                for b in range(1, n_aps):
                    v = float(col[b - 1]) if col is not None and b - 1 < col.size else None
                    row.append(_fmt(v))
            row += [str(int(n)) for n in t.n_cond[:n_aps - 1]]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# PHY trace generation


@dataclass
class TraceGenResult:
    trace_paths: list[Path]
    table_path: Path
    tables: list[LinkProbTable]


def generate_phy_traces(snr_pairs, n_packets: int, payload_bytes: int, profile: str,
                        m_values, seed: int, output_dir,
                        slot_seconds: float = 1.2e-3, alpha: float = 0.25
                        ) -> TraceGenResult:
    """Run the full chain per packet for each SNR tuple, writing one slot
    outcome trace per tuple plus a shared probability summary CSV.

    Each trace is a single-sensor stream (sensor 0, one slot per packet), so
    it can directly drive an N = 1 replay at the same slot duration.
    """
    if n_packets < 1:
        raise ValueError("n_packets must be at least 1")
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    params = ChainParams(payload_bytes=payload_bytes, profile=profile, alpha=alpha)
    trace_paths = []
    tables = {}
    for idx, snrs in enumerate(snr_pairs):
        snrs = tuple(float(s) for s in snrs)
        table, raw = estimate_link_probabilities(
            snrs, params, m_values, n_packets,
            spawn_seed(seed, TAG_TABLE, idx), collect_outcomes=True)
        outcomes = [
            SlotOutcome(round_index=p, sensor=0,
                        gen_time_ms=float(p * slot_seconds * 1e3),
                        decoded=decoded, joint=joint)
            for p, (decoded, joint) in enumerate(raw)
        ]
        label = "_".join(f"{s:g}" for s in snrs)
        path = output_dir / f"trace_snr_{label}.csv"
        emit_trace(outcomes, path)
        trace_paths.append(path)
        tables[snrs] = table
    table_path = output_dir / "probabilities.csv"
    _write_tables(tables, table_path)
    return TraceGenResult(trace_paths=trace_paths, table_path=table_path,
                          tables=list(tables.values()))


def trace_from_spec(spec: ExperimentSpec) -> TraceGenResult:
    """CLI helper: derive the SNR tuples a spec implies and generate traces."""
    n_aps = max(spec.values) if spec.sweep == "n_aps" else spec.sim["n_aps"]
    primaries = spec.values if spec.sweep == "snr_primary" else [spec.phy["snr_primary_db"]]
    pairs = []
    for primary in primaries:
        for cls, _ in _sensor_classes_for(spec, spec.sim["n_sensors"]):
            base = primary if spec.sweep == "snr_primary" else cls.snr_primary_db
            tup = _snr_tuple(cls, base, max(n_aps, 2))
            if tup not in pairs:
                pairs.append(tup)
    m_values = sorted(set(spec.values if spec.sweep == "m" else [spec.sim["m"]]))
    return generate_phy_traces(pairs, spec.phy["packets_per_point"],
                               spec.phy["payload_bytes"], spec.phy["profile"],
                               m_values, spec.seed, spec.output_dir / "traces",
                               slot_seconds=spec.sim["slot_ms"] * 1e-3,
                               alpha=spec.phy["alpha"])


# ---------------------------------------------------------------------------
# oracle battery


def oracle_check(spec: ExperimentSpec, instances: int = 9,
                 tolerance: float = 1e-3) -> list[dict]:
    """Cross-check the event engine against the time-stepping integrator.

    Runs a battery of downsized instances (N <= 2, 60 rounds) seeded from
    the experiment's master seed across all modes and both delay shapes;
    returns one report dict per instance with the relative disagreement.
    """
    reports = []
    idx = 0
    for mode in ("single_ap", "co_ap", "soft_co_ap"):
        for delay_model in (ConstantDelayModel(3e-3),
                            ParametricDelayModel(1e-3, 2.1e-3, 0.25)):
            for rep in range(max(instances // 6, 1)):
                seed = spawn_seed(spec.seed, TAG_JOB, 9999, idx)
                rng = np.random.default_rng(seed)
                n = int(rng.integers(1, 3))
                p = rng.uniform(0.3, 0.9, size=(n, 2))
                src = BernoulliSource(p, p_joint={4: rng.uniform(0.2, 0.8, size=(n, 1))})
                cfg = SimConfig(mode=mode, n_sensors=n, rounds=60, warmup_rounds=4,
                                decode_source=src,
                                delay_model=delay_model if mode != "single_ap" else None,
                                n_aps=1 if mode == "single_ap" else 2,
                                m=4 if mode == "soft_co_ap" else None, seed=seed)
                got = run(cfg).network_avg_aoi
                want = brute_force_oracle(cfg).network_avg_aoi
                rel = abs(got - want) / want
                reports.append({"mode": mode, "delay": delay_model.kind, "seed": seed,
                                "n_sensors": n, "engine_ms": got * 1e3,
                                "oracle_ms": want * 1e3, "rel_err": rel,
                                "ok": rel < tolerance})
                idx += 1
    return reports
