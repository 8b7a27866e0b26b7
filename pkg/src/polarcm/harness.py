"""Monte-Carlo BER/FER simulation, configuration parsing and CSV results.

Frame ``f`` at SNR point ``s`` draws its message bits and noise from stream
``(master_seed, STREAM_SIMULATION, s, f)``. Frames are processed in fixed
batches; with several workers the batches run speculatively in parallel but
are merged strictly in frame order, and the stopping rule is applied frame by
frame. The counters of a run therefore do not depend on ``workers``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, channel
from .construction import ESTIMATORS, DesignSpec, construct_scheme
from .modulation import constellation_from_descriptor
from .schemes import INTERLEAVERS, SchemeConfig, decode_batch, encode

log = logging.getLogger(__name__)

SCHEMA_VERSION = "v1"
CSV_COLUMNS = ("snr_db", "snr_ref", "frames", "info_bits", "bit_errors", "frame_errors",
               "ber", "fer", "seconds", "ber_undefined", "esn0_db", "ebn0_db")
DEFAULT_MIN_FRAME_ERRORS = 100
DEFAULT_MAX_FRAMES = 10 ** 7
DEFAULT_BATCH = 64


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(d, key, path, kind, default=...):
    full = f"{path}.{key}" if path else key
    if key not in d:
        if default is ...:
            raise ConfigError(full, "required field missing")
        return default
    val = d[key]
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if not isinstance(val, kinds) or (isinstance(val, bool) and bool not in kinds):
        names = "/".join(k.__name__ for k in kinds)
        raise ConfigError(full, f"expected {names}, got {type(val).__name__}")
    return val


@dataclass(frozen=True)
class SimConfig:
    scheme: dict
    construction: dict
    snr_points: tuple
    snr_reference: str = "esn0"
    min_frame_errors: int = DEFAULT_MIN_FRAME_ERRORS
    max_frames: int = DEFAULT_MAX_FRAMES
    master_seed: int = 0
    workers: int = 1
    output: str | None = None
    checknode: str = "exact"
    demapper: str = "exact"
    batch_size: int = DEFAULT_BATCH

    @classmethod
    def from_dict(cls, doc) -> "SimConfig":
        if not isinstance(doc, dict):
            raise ConfigError("$", "config must be a JSON object")
        version = doc.get("version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError("version", f"unsupported schema version {version!r}")
        scheme = _get(doc, "scheme", "", dict)
        construction = _get(doc, "construction", "", dict)
        snr = _get(doc, "snr", "", dict)
        points = _get(snr, "points", "snr", list)
        if not points or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in points):
            raise ConfigError("snr.points", "need a non-empty list of numbers")
        reference = _get(snr, "reference", "snr", str, "esn0")
        if reference not in ("esn0", "ebn0"):
            raise ConfigError("snr.reference", "must be 'esn0' or 'ebn0'")
        stopping = _get(doc, "stopping", "", dict, {})
        min_fe = _get(stopping, "min_frame_errors", "stopping", int, DEFAULT_MIN_FRAME_ERRORS)
        max_frames = _get(stopping, "max_frames", "stopping", int, DEFAULT_MAX_FRAMES)
        if min_fe < 1:
            raise ConfigError("stopping.min_frame_errors", "must be >= 1")
        if max_frames < 1:
            raise ConfigError("stopping.max_frames", "must be >= 1")
        decoder = _get(doc, "decoder", "", dict, {})
        checknode = _get(decoder, "checknode", "decoder", str, "exact")
        demapper = _get(decoder, "demapper", "decoder", str, "exact")
        if checknode not in ("exact", "minsum"):
            raise ConfigError("decoder.checknode", "must be 'exact' or 'minsum'")
        if demapper not in ("exact", "maxlog"):
            raise ConfigError("decoder.demapper", "must be 'exact' or 'maxlog'")
        workers = _get(doc, "workers", "", int, 1)
        if workers < 1:
            raise ConfigError("workers", "must be >= 1")
        batch = _get(doc, "batch_size", "", int, DEFAULT_BATCH)
        if batch < 1:
            raise ConfigError("batch_size", "must be >= 1")
        output = _get(doc, "output", "", (str, type(None)), None)
        cfg = cls(scheme, construction, tuple(float(p) for p in points), reference, min_fe,
                  max_frames, _get(doc, "master_seed", "", int, 0), workers, output,
                  checknode, demapper, batch)
        cfg.build_template()
        cfg.design_spec()
        return cfg

    @classmethod
    def load(cls, path) -> "SimConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except FileNotFoundError:
            raise ConfigError(str(path), "config file not found") from None
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read config file ({exc.strerror})") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "scheme": self.scheme,
            "construction": self.construction,
            "snr": {"points": list(self.snr_points), "reference": self.snr_reference},
            "stopping": {"min_frame_errors": self.min_frame_errors, "max_frames": self.max_frames},
            "master_seed": self.master_seed,
            "workers": self.workers,
            "output": self.output,
            "decoder": {"checknode": self.checknode, "demapper": self.demapper},
            "batch_size": self.batch_size,
        }

    def digest(self) -> str:
        # workers and output do not change results, so they stay out of the hash
        doc = self.to_dict()
        doc.pop("workers")
        doc.pop("output")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()

    def build_template(self) -> SchemeConfig:
        s = self.scheme
        kind = _get(s, "kind", "scheme", str)
        if kind not in ("mlc", "bicm"):
            raise ConfigError("scheme.kind", "must be 'mlc' or 'bicm'")
        n_sym = _get(s, "n_sym", "scheme", int)
        if n_sym < 1 or n_sym & (n_sym - 1):
            raise ConfigError("scheme.n_sym", "must be a power of two")
        desc = _get(s, "constellation", "scheme", dict)
        desc = dict(desc)
        desc.setdefault("labeling", "natural" if kind == "mlc" else "gray")
        try:
            const = constellation_from_descriptor(desc)
        except ValueError as exc:
            raise ConfigError("scheme.constellation", str(exc)) from None
        inter = s.get("interleaver", "identity")
        seed = 0
        if isinstance(inter, dict):
            seed = _get(inter, "seed", "scheme.interleaver", int, 0)
            inter = _get(inter, "kind", "scheme.interleaver", str)
        if inter not in INTERLEAVERS:
            raise ConfigError("scheme.interleaver", f"must be one of {INTERLEAVERS}")
        try:
            return SchemeConfig(kind, n_sym, const, None, inter, seed)
        except ValueError as exc:
            raise ConfigError("scheme", str(exc)) from None

    def design_spec(self) -> DesignSpec:
        c = self.construction
        estimator = _get(c, "estimator", "construction", str, "ga")
        if estimator not in ESTIMATORS:
            raise ConfigError("construction.estimator", f"must be one of {ESTIMATORS}")
        k = _get(c, "k", "construction", int)
        template = self.build_template()
        if not 0 <= k <= template.bit_channels:
            raise ConfigError("construction.k", f"must lie in [0, {template.bit_channels}]")
        trials = _get(c, "mc_trials", "construction", int, 10_000)
        if trials < 1:
            raise ConfigError("construction.mc_trials", "must be >= 1")
        return DesignSpec(float(_get(c, "design_snr_db", "construction", (int, float))), k,
                          estimator, trials, _get(c, "seed", "construction", int, 0),
                          self.scheme.get("constellation"))

    def replace(self, **changes) -> "SimConfig":
        doc = self.to_dict()
        for key, val in changes.items():
            if val is not None:
                doc[key] = val
        return SimConfig.from_dict(doc)


@dataclass
class PointResult:
    snr_db: float
    snr_ref: str
    esn0_db: float
    ebn0_db: float | None
    frames: int = 0
    info_bits: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    seconds: float = 0.0

    @property
    def ber(self) -> float | None:
        return self.bit_errors / self.info_bits if self.info_bits else None

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    def counters(self) -> tuple:
        return (self.snr_db, self.snr_ref, self.frames, self.info_bits, self.bit_errors, self.frame_errors)


@dataclass
class SimResult:
    points: list = field(default_factory=list)
    config: dict | None = None
    config_digest: str = ""
    version: str = __version__

    def counters(self) -> list:
        return [p.counters() for p in self.points]


def _simulate_batch(scheme, sigma2, master_seed, snr_index, start, stop, demapper, checknode):
    msgs, noise = [], []
    for f in range(start, stop):
        rng = channel.rng_stream(master_seed, channel.STREAM_SIMULATION, snr_index, f)
        msgs.append(channel.random_bits(rng, scheme.info_bits))
        noise.append(channel.complex_normal(rng, scheme.n_sym))
    msgs = np.array(msgs, dtype=np.uint8).reshape(stop - start, scheme.info_bits)
    y = encode(msgs, scheme) + math.sqrt(sigma2) * np.array(noise)
    msg_hat = decode_batch(y, sigma2, scheme, demapper, checknode)
    bit_errs = np.count_nonzero(msg_hat != msgs, axis=1)
    return bit_errs


_WORKER_SCHEME = None


def _init_worker(scheme):
    global _WORKER_SCHEME
    _WORKER_SCHEME = scheme


def _worker_batch(args):
    return _simulate_batch(_WORKER_SCHEME, *args)


def simulate_point(scheme: SchemeConfig, esn0_db: float, snr_index: int, *, master_seed=0,
                   min_frame_errors=DEFAULT_MIN_FRAME_ERRORS, max_frames=DEFAULT_MAX_FRAMES,
                   batch_size=DEFAULT_BATCH, demapper="exact", checknode="exact", pool=None,
                   window=2):
    """Run frames at one SNR until the stopping rule fires; returns counters."""
    sigma2 = channel.snr_to_sigma2(esn0_db, scheme.constellation.complex_dims)
    frames = bit_errors = frame_errors = 0
    starts = range(0, max_frames, batch_size)

    def jobs():
        for start in starts:
            yield (sigma2, master_seed, snr_index, start, min(max_frames, start + batch_size),
                   demapper, checknode)

    if pool is None:
        results = (_simulate_batch(scheme, *job) for job in jobs())
    else:
        results = _ordered(pool, jobs(), window)
    for bit_errs in results:
        for be in bit_errs:
            frames += 1
            bit_errors += int(be)
            frame_errors += int(be > 0)
            if frame_errors >= min_frame_errors:
                break
        if frame_errors >= min_frame_errors or frames >= max_frames:
            break
    if hasattr(results, "close"):
        results.close()
    return frames, bit_errors, frame_errors


def _ordered(pool, jobs, window):
    """Map over ``jobs`` keeping ``window`` futures in flight, yielding in order."""
    pending = []
    try:
        for job in jobs:
            pending.append(pool.submit(_worker_batch, job))
            if len(pending) >= window:
                yield pending.pop(0).result()
        while pending:
            yield pending.pop(0).result()
    finally:
        for fut in pending:
            fut.cancel()


def run_simulation(cfg: SimConfig, write=True) -> SimResult:
    """Construct the scheme, sweep all SNR points and (optionally) write the CSV."""
    template = cfg.build_template()
    spec = cfg.design_spec()
    scheme = construct_scheme(template, spec)
    rate = scheme.rate_per_symbol
    if cfg.snr_reference == "ebn0" and rate == 0:
        raise ConfigError("snr.reference", "Eb/N0 is undefined for a scheme without information bits")
    log.info("scheme %s, K=%s, rate %.4f bit/symbol", scheme.kind, scheme.level_k, rate)
    result = SimResult(config=cfg.to_dict(), config_digest=cfg.digest())
    pool = None
    if cfg.workers > 1:
        pool = ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=(scheme,))
    try:
        for idx, snr in enumerate(cfg.snr_points):
            if cfg.snr_reference == "esn0":
                esn0, ebn0 = snr, (channel.esn0_to_ebn0(snr, rate) if rate > 0 else None)
            else:
                esn0, ebn0 = channel.ebn0_to_esn0(snr, rate), snr
            tic = time.perf_counter()
            frames, bit_errors, frame_errors = simulate_point(
                scheme, esn0, idx, master_seed=cfg.master_seed,
                min_frame_errors=cfg.min_frame_errors, max_frames=cfg.max_frames,
                batch_size=cfg.batch_size, demapper=cfg.demapper, checknode=cfg.checknode,
                pool=pool, window=2 * cfg.workers)
            point = PointResult(snr, cfg.snr_reference, esn0, ebn0, frames,
                                frames * scheme.info_bits, bit_errors, frame_errors,
                                time.perf_counter() - tic)
            log.info("%s=%.2f dB: frames=%d FER=%.3e", cfg.snr_reference, snr, frames, point.fer)
            result.points.append(point)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    if write and cfg.output:
        write_csv(result, cfg.output)
    return result


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_csv(result: SimResult, path) -> None:
    path = Path(path)
    lines = [
        f"# polarcm {result.version}",
        f"# schema {SCHEMA_VERSION}",
        f"# config_sha256 {result.config_digest}",
    ]
    if result.config is not None:
        lines.append("# config " + json.dumps(result.config, sort_keys=True))
    with path.open("w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for p in result.points:
            writer.writerow([_fmt(p.snr_db), p.snr_ref, p.frames, p.info_bits, p.bit_errors,
                             p.frame_errors, _fmt(p.ber), _fmt(p.fer), f"{p.seconds:.6f}",
                             int(p.ber is None), _fmt(p.esn0_db), _fmt(p.ebn0_db)])


def read_csv(path) -> SimResult:
    """Parse a CSV written by :func:`write_csv`."""
    result = SimResult()
    rows = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                if key == "polarcm":
                    result.version = value
                elif key == "config_sha256":
                    result.config_digest = value
                elif key == "config":
                    result.config = json.loads(value)
            else:
                rows.append(line)
    for rec in csv.DictReader(rows):
        result.points.append(PointResult(
            float(rec["snr_db"]), rec["snr_ref"], float(rec["esn0_db"]),
            float(rec["ebn0_db"]) if rec["ebn0_db"] else None,
            int(rec["frames"]), int(rec["info_bits"]), int(rec["bit_errors"]),
            int(rec["frame_errors"]), float(rec["seconds"])))
    return result
