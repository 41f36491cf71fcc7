"""Monte Carlo experiment orchestration and result emission.

Every experiment is described by an ExperimentConfig and produces tidy CSV
rows with a fixed header, so downstream tooling never parses anything but
`results.csv` / `diag.csv` plus a `meta.json` config echo.  Outputs are a
pure function of (config, seed): per-packet RNG streams are derived by
counter-based seed spawning, and estimator variants within a run always see
identical packet, channel, and noise realizations.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import open_loop_mse
from .channel import ChannelProfile, draw_channel, snr_to_n0, transmit
from .estimator import make_estimator
from .pipeline import run_packet
from .txchain import CodeConfig, ModulationConfig, PacketLayout, build_packet

VALID_KINDS = ("per-sweep", "exit-chart", "mse-openloop", "corr-probe")
VALID_ESTIMATORS = ("perfect", "initial", "proposed", "song", "emdd")
CSV_HEADER = (
    "experiment",
    "estimator",
    "c",
    "snr_db",
    "series",
    "x",
    "y",
    "n_packets",
    "n_errors",
    "seed",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "per-sweep"
    n_tx: int = 2
    n_rx: int = 2
    mod_order: int = 16
    n_itr: int = 7
    estimators: tuple[str, ...] = ("proposed",)
    c: float | None = None
    snr_db: tuple[float, ...] = (14.0,)
    n_packets: int = 500
    info_bytes: int = 200
    n_sc: int = 52
    t_rms: float = 50e-9
    t_samp: float = 50e-9
    seed: int = 1234
    workers: int = 1
    max_errors: int = 200
    demap: str = "auto"
    open_loop_nd: int = 12
    open_loop_sigma_s2: float = 0.1
    corr_target_packets: int = 50
    min_good_packets: int = 20

    @property
    def c_value(self) -> float:
        if self.c is not None:
            return self.c
        return 2.5 if self.n_tx == 2 else 2.0  # threshold defaults by geometry

    def validate(self) -> None:
        if self.kind not in VALID_KINDS:
            raise ConfigError(f"kind must be one of {VALID_KINDS}, got {self.kind!r}")
        if not (2 <= self.n_tx <= 4 and self.n_tx <= self.n_rx <= 4):
            raise ConfigError("antenna layout must satisfy 2 <= n_tx <= n_rx <= 4")
        if self.mod_order not in (4, 16, 64):
            raise ConfigError("mod_order must be 4, 16 or 64")
        if self.n_itr < 1:
            raise ConfigError("n_itr must be >= 1")
        if self.n_packets < 1:
            raise ConfigError("n_packets must be >= 1")
        unknown = set(self.estimators) - set(VALID_ESTIMATORS)
        if unknown:
            raise ConfigError(f"unknown estimators: {sorted(unknown)}")
        if not self.snr_db:
            raise ConfigError("snr_db must not be empty")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        coerced = dict(raw)
        for key in ("estimators", "snr_db"):
            if key in coerced and not isinstance(coerced[key], tuple):
                value = coerced[key]
                coerced[key] = tuple(value) if isinstance(value, (list, tuple)) else (value,)
        cfg = cls(**coerced)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        import yaml

        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping at top level")
        return cls.from_dict(raw)


@dataclass
class MetricRecord:
    experiment: str
    estimator: str
    c: float
    snr_db: float
    series: str
    x: float
    y: float
    n_packets: int
    n_errors: int
    seed: int

    def row(self) -> tuple:
        return (
            self.experiment,
            self.estimator,
            f"{self.c:.6g}",
            f"{self.snr_db:.6g}",
            self.series,
            f"{self.x:.10g}",
            f"{self.y:.10g}",
            self.n_packets,
            self.n_errors,
            self.seed,
        )


@lru_cache(maxsize=8)
def _context(cfg: ExperimentConfig):
    layout = PacketLayout(
        n_info_bytes=cfg.info_bytes,
        n_tx=cfg.n_tx,
        n_sc=cfg.n_sc,
        modulation=ModulationConfig(order=cfg.mod_order),
        code=CodeConfig(),
    )
    profile = ChannelProfile(
        n_rx=cfg.n_rx, n_tx=cfg.n_tx, n_sc=cfg.n_sc, t_rms=cfg.t_rms, t_samp=cfg.t_samp
    )
    return layout, profile


def _packet_rng(cfg: ExperimentConfig, snr_idx: int, pkt_idx: int):
    return np.random.default_rng(
        np.random.SeedSequence(cfg.seed, spawn_key=(snr_idx, pkt_idx))
    )


def simulate_packet(
    cfg: ExperimentConfig,
    snr_idx: int,
    pkt_idx: int,
    collect_mi: bool = False,
    collect_corr: bool = False,
) -> dict:
    """One packet through every estimator variant on shared realizations."""
    layout, profile = _context(cfg)
    rng = _packet_rng(cfg, snr_idx, pkt_idx)
    n0 = snr_to_n0(cfg.snr_db[snr_idx])

    payload = rng.integers(0, 256, size=cfg.info_bytes, dtype=np.uint8).tobytes()
    packet = build_packet(payload, layout)
    chan = draw_channel(profile, rng)
    train = np.broadcast_to(
        layout.train_matrix[:, None, :], (layout.n_train_sym, cfg.n_sc, cfg.n_tx)
    ).astype(complex)
    tx_grid = np.concatenate([train, packet.grid], axis=0)
    z_all = transmit(tx_grid, chan, n0, rng)

    out = {}
    for kind in cfg.estimators:
        est = make_estimator(
            kind, n0, c=cfg.c_value, es=1.0, h_true=chan.freq if kind == "perfect" else None
        )
        res = run_packet(
            packet,
            z_all,
            est,
            n_itr=cfg.n_itr,
            n0=n0,
            h_true=chan.freq,
            demap_kind=cfg.demap,
            collect_mi=collect_mi,
            collect_corr=collect_corr and kind == "proposed",
        )
        out[kind] = res
    return out


def _chunk(cfg: ExperimentConfig, snr_idx: int, pkt_ids, mi=False, corr=False):
    return [simulate_packet(cfg, snr_idx, p, mi, corr) for p in pkt_ids]


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path) -> list[MetricRecord]:
    """Run the configured experiment; write results.csv, diag.csv, meta.json."""
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    if cfg.kind == "per-sweep":
        records, diag = _run_per_sweep(cfg)
    elif cfg.kind == "exit-chart":
        records, diag = _run_exit_chart(cfg)
    elif cfg.kind == "mse-openloop":
        records, diag = _run_mse_openloop(cfg)
    else:
        records, diag = _run_corr_probe(cfg)

    _write_csv(out / "results.csv", records)
    if diag:
        _write_csv(out / "diag.csv", diag)
    meta = {
        "version": __version__,
        "config": asdict(cfg),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "n_records": len(records),
    }
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return records


def _iter_packets(cfg: ExperimentConfig, snr_idx: int, mi=False, corr=False):
    """Yield per-packet variant results, parallelizing when configured."""
    ids = range(cfg.n_packets)
    if cfg.workers <= 1:
        for p in ids:
            yield simulate_packet(cfg, snr_idx, p, mi, corr)
        return
    step = cfg.workers * 4
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        for base in range(0, cfg.n_packets, step):
            chunk_ids = list(ids[base : base + step])
            bounds = np.array_split(chunk_ids, cfg.workers)
            futures = [
                pool.submit(_chunk, cfg, snr_idx, list(b), mi, corr)
                for b in bounds
                if len(b)
            ]
            for fut in futures:
                yield from fut.result()


def _run_per_sweep(cfg: ExperimentConfig):
    records, diag = [], []
    for si, snr in enumerate(cfg.snr_db):
        errors = {k: 0 for k in cfg.estimators}
        counts = 0
        traces = {k: None for k in cfg.estimators}
        for res in _iter_packets(cfg, si):
            counts += 1
            for kind, r in res.items():
                errors[kind] += int(r.packet_error)
                if traces[kind] is None:
                    traces[kind] = np.zeros_like(r.mse_trace)
                traces[kind] += r.mse_trace
            if all(e >= cfg.max_errors for e in errors.values()):
                break
        for kind in cfg.estimators:
            records.append(
                MetricRecord(
                    cfg.kind, kind, cfg.c_value, snr, "per",
                    snr, errors[kind] / counts, counts, errors[kind], cfg.seed,
                )
            )
            for step, val in enumerate(traces[kind] / counts):
                diag.append(
                    MetricRecord(
                        cfg.kind, kind, cfg.c_value, snr, "mse_step",
                        float(step + 1), float(val), counts, errors[kind], cfg.seed,
                    )
                )
    return records, diag


def _run_exit_chart(cfg: ExperimentConfig):
    records, diag = [], []
    si = 0
    snr = cfg.snr_db[si]
    mi_in_sum = np.zeros(cfg.n_itr)
    mi_out_sum = np.zeros(cfg.n_itr)
    good = total = 0
    for res in _iter_packets(cfg, si, mi=True):
        total += 1
        r = res[cfg.estimators[0]]
        if not r.packet_error:
            good += 1
            mi_in_sum += r.mi_dem_in
            mi_out_sum += r.mi_dem_out
        if good >= cfg.min_good_packets:
            break
    denom = max(good, 1)
    for i in range(cfg.n_itr):
        for series, val in (("mi_in", mi_in_sum[i]), ("mi_out", mi_out_sum[i])):
            records.append(
                MetricRecord(
                    cfg.kind, cfg.estimators[0], cfg.c_value, snr, series,
                    float(i + 1), float(val / denom), total, total - good, cfg.seed,
                )
            )
    return records, diag


def _run_mse_openloop(cfg: ExperimentConfig):
    records, diag = [], []
    snr = cfg.snr_db[0]
    n0 = snr_to_n0(snr)
    rho = np.ones((cfg.n_rx, cfg.n_tx))
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    res = open_loop_mse(
        cfg.open_loop_nd, cfg.open_loop_sigma_s2, n0, rho, rng, n_tones=cfg.n_sc
    )
    for k in range(res.mse_trace.size):
        records.append(
            MetricRecord(
                cfg.kind, "proposed", cfg.c_value, snr, "mse_openloop",
                float(k), float(res.mse_trace[k]), res.n_realizations, 0, cfg.seed,
            )
        )
        records.append(
            MetricRecord(
                cfg.kind, "proposed", cfg.c_value, snr, "mse_openloop_pred",
                float(k), float(res.predicted[k]), res.n_realizations, 0, cfg.seed,
            )
        )
    return records, diag


def _run_corr_probe(cfg: ExperimentConfig):
    """Average lag-2 innovation statistics over seeded erroneous packets."""
    records, diag = [], []
    si = 0
    snr = cfg.snr_db[si]
    acc = {}
    bad = total = errors_without_corr = 0
    for res in _iter_packets(cfg, si, corr=True):
        total += 1
        r = res["proposed"]
        if r.packet_error and r.corr and not r.corr.get("count"):
            errors_without_corr += 1
        if r.packet_error and r.corr and r.corr.get("count"):
            bad += 1
            for key in ("xx", "yy", "pxp", "pxn", "pyp", "pyn"):
                if key not in acc:
                    acc[key] = np.zeros_like(r.corr[key])
                acc[key] += r.corr[key]
            acc["e0"] = acc.get("e0", 0.0) + r.corr["e0"]
        if bad >= cfg.corr_target_packets:
            break
    if not bad:
        if errors_without_corr:
            raise RuntimeError(
                "corr-probe needs a steady-state feedback window, i.e. enough "
                "data symbols per packet for n_sym >= 2 * n_itr; lower n_itr "
                "or enlarge the packet"
            )
        raise RuntimeError(
            "corr-probe found no erroneous packets; lower the SNR or raise n_packets"
        )
    pre = _norm_corr(acc["xx"] / bad, acc["pxp"] / bad, acc["pxn"] / bad)
    post = _norm_corr(acc["yy"] / bad, acc["pyp"] / bad, acc["pyn"] / bad)
    n_f = pre.shape[0]
    for series, mat in (("corr_pre", pre), ("corr_post", post)):
        for i in range(n_f):
            for j in range(n_f):
                records.append(
                    MetricRecord(
                        cfg.kind, "proposed", cfg.c_value, snr, series,
                        float(i * n_f + j), float(mat[i, j]), bad, total - bad, cfg.seed,
                    )
                )
    for series, val in (
        ("corr_mean_pre", float(pre.mean())),
        ("corr_mean_post", float(post.mean())),
    ):
        records.append(
            MetricRecord(
                cfg.kind, "proposed", cfg.c_value, snr, series,
                0.0, val, bad, total - bad, cfg.seed,
            )
        )
    return records, diag


def _norm_corr(xx: np.ndarray, p_prev: np.ndarray, p_now: np.ndarray) -> np.ndarray:
    denom = np.sqrt(np.outer(p_prev, p_now))
    return np.abs(xx) / np.maximum(denom, 1e-30)


def _write_csv(path: Path, records: list[MetricRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow(rec.row())


__all__ = [
    "ExperimentConfig",
    "MetricRecord",
    "ConfigError",
    "run_experiment",
    "simulate_packet",
    "CSV_HEADER",
    "VALID_ESTIMATORS",
    "VALID_KINDS",
]
