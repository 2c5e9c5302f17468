"""Compression pipeline, parameter sweeps and report emission."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import compress as cmp
from .csc import csc_decode, csc_dot, csc_encode, dense_dot, psi_csc
from .errors import ConfigError, HamShamError
from .ham import (
    INDEX_BITS,
    dot_ham,
    dot_sham,
    ham_decode,
    ham_encode,
    measured_occupancy,
    psi_ham,
    psi_sham,
    sham_decode,
    sham_encode,
)
from .matrix import as_matrix, load_matrix, sparsity

__all__ = [
    "METHODS",
    "STORES",
    "RunConfig",
    "CompressionReport",
    "PipelineError",
    "VerificationError",
    "compress_matrix",
    "run",
    "sweep",
    "SweepTable",
    "emit_report",
]

METHODS = ("none", "pr", "ws", "pq", "pr-ws", "pr-pq")
STORES = ("dense", "csc", "ham", "sham")


class PipelineError(HamShamError):
    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class VerificationError(HamShamError):
    pass


@dataclass
class RunConfig:
    """One pipeline run.

    ``p``, ``k`` and ``b`` may be lists; the chained methods then pick
    values by grid search, pruning level first (``order="a"``) or quantizer
    parameter first (``order="b"``).
    """
    input: str | None = None
    input_format: str | None = None
    shape: tuple | None = None
    method: str = "none"
    p: float | list = 90.0
    k: int | list = 32
    b: int | list = 32
    pq_mode: str = "quantile"
    order: str = "a"
    tune_objective: str = "distortion"
    store: str = "dense"
    word_bits: int = 32
    seed: int = 0
    trials: int = 5
    task: str | None = None
    retrain_epochs: int = 0
    lr: float = 1e-3
    max_distortion: float = 0.0
    name: str = ""
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.store not in STORES:
            raise ConfigError(f"store must be one of {STORES}, got {self.store!r}")
        if self.input is None and self.matrix is None:
            raise ConfigError("no input path or matrix given")
        if self.order not in ("a", "b"):
            raise ConfigError("order must be 'a' or 'b'")
        if self.tune_objective not in ("distortion", "psi"):
            raise ConfigError("tune_objective must be 'distortion' or 'psi'")
        if self.pq_mode not in ("quantile", "uniform"):
            raise ConfigError("pq_mode must be 'quantile' or 'uniform'")
        if self.task not in (None, "regression"):
            raise ConfigError(f"unknown task {self.task!r}")
        for p in _as_list(self.p):
            if not 0 <= p <= 100:
                raise ConfigError(f"percentile {p} outside [0, 100]")
        for v, name in ((self.k, "k"), (self.b, "b")):
            if any(int(x) != x or x < 2 for x in _as_list(v)):
                raise ConfigError(f"{name} values must be integers >= 2")
        if not 1 <= self.word_bits <= 255:
            raise ConfigError("word_bits must be in [1, 255]")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        return self

    def echo(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "matrix"}
        if d["shape"] is not None:
            d["shape"] = list(d["shape"])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class CompressionReport:
    name: str
    method: str
    store: str
    rows: int
    cols: int
    nonzeros: int
    density: float
    distinct_nonzero: int
    psi_formula: float
    psi_measured: float
    psi_measured_model: float
    distortion: float
    delta_perf: float
    delta_perf_kind: str
    time_ratio: float         # compressed dot time / dense dot time
    speedup: float            # dense dot time / compressed dot time
    t_dense: float
    t_compressed: float
    t_dense_iqr: float
    t_compressed_iqr: float
    timings: dict
    params: dict
    config: dict
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


SCALAR_FIELDS = [f.name for f in fields(CompressionReport) if f.name not in ("timings", "params", "config")]


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _quantize(Wp, mask, kind, param, cfg):
    if kind == "ws":
        return cmp.weight_share(Wp, int(param), seed=cfg.seed, mask=mask)
    return cmp.prob_quantize(Wp, int(param), mode=cfg.pq_mode, seed=cfg.seed, mask=mask)


def _score(W0, W, cfg, store):
    d = cmp.distortion(W0, W)
    if cfg.tune_objective == "distortion":
        return (d,)
    ok = d <= cfg.max_distortion
    return (0 if ok else 1, _psi_formula(W, store, cfg.word_bits) if ok else d)


def compress_matrix(W0, cfg: RunConfig):
    """Apply the configured lossy transform; returns ``(W, params)`` where
    ``params`` records the parameter values actually used."""
    method = cfg.method
    if method == "none":
        return W0, {}
    if method == "pr":
        p = _as_list(cfg.p)
        best = min(p, key=lambda v: _score(W0, cmp.prune(W0, v).matrix, cfg, cfg.store))
        return cmp.prune(W0, best).matrix, {"p": best}
    kind = method.split("-")[-1]
    values = _as_list(cfg.k if kind == "ws" else cfg.b)
    param_name = "k" if kind == "ws" else "b"
    if method in ("ws", "pq"):
        build = lambda v: cmp.reconstruct(_quantize(W0, None, kind, v, cfg))
        best = min(values, key=lambda v: _score(W0, build(v), cfg, cfg.store))
        return build(best), {param_name: best}

    def chained(p, v):
        pr = cmp.prune(W0, p)
        return cmp.reconstruct(_quantize(pr.matrix, pr.mask, kind, v, cfg))

    ps = _as_list(cfg.p)
    score = lambda W: _score(W0, W, cfg, cfg.store)
    if cfg.order == "a":
        p = min(ps, key=lambda v: score(cmp.prune(W0, v).matrix))
        v = min(values, key=lambda v: score(chained(p, v)))
    else:
        v = min(values, key=lambda v: score(cmp.reconstruct(_quantize(W0, None, kind, v, cfg))))
        p = min(ps, key=lambda p: score(chained(p, v)))
    return chained(p, v), {"p": p, param_name: v}


def _psi_formula(W, store, B):
    n, m = W.shape
    q, s = sparsity(W)
    if store == "dense":
        return 1.0
    if store == "csc":
        return psi_csc(n, m, q)
    if store == "ham":
        return psi_ham(len(np.unique(W)), n, m, B)
    k_nz = len(np.unique(W[W != 0]))
    return psi_sham(s, max(k_nz, 1), n, m, B)


def _encode(W, store, B):
    if store == "dense":
        return W, (lambda C: C), dense_dot
    if store == "csc":
        return csc_encode(W), csc_decode, csc_dot
    if store == "ham":
        return ham_encode(W, B), ham_decode, dot_ham
    return sham_encode(W, B), sham_decode, dot_sham


def _measured(C, W, store, B):
    n, m = W.shape
    if store == "dense":
        return 1.0, 1.0
    if store == "csc":
        bits = C.nnz * B + INDEX_BITS * (C.nnz + m + 1)
        return bits / (n * m * B), bits / (n * m * B)
    occ = measured_occupancy(C, B)
    return occ.total_ratio, occ.total_ratio_model


def _time(fn, trials):
    samples = []
    for _ in range(trials):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    q = statistics.quantiles(samples, n=4) if len(samples) > 1 else [samples[0]] * 3
    return statistics.median(samples), q[2] - q[0]


def _regression_task(W0, W, cfg):
    from .retrain import Layer, TiedLayer, ToyNetwork, loss, retrain
    n, m = W0.shape
    rng = np.random.default_rng(cfg.seed + 1)
    X = rng.normal(size=(max(4 * n, 64), n))
    Y = X @ W0 + 0.01 * rng.normal(size=(len(X), m))
    base = loss(ToyNetwork([Layer(W0, np.zeros(m))]), X, Y)
    net = ToyNetwork([Layer(W.copy(), np.zeros(m))])
    if cfg.retrain_epochs:
        spec = W != 0 if cfg.method == "pr" else TiedLayer.from_codebook(
            cmp.weight_share(W, max(len(np.unique(W[W != 0])), 2)), W != 0)
        retrain(net, {0: spec}, X, Y, cfg.retrain_epochs, cfg.lr)
    return loss(net, X, Y) - base


def run(cfg: RunConfig) -> CompressionReport:
    """Load, compress, encode, verify the roundtrip, time the dot products."""
    timings = {}

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        except HamShamError as exc:
            if isinstance(exc, PipelineError):
                raise
            raise PipelineError(name, exc) from exc
        except (ValueError, OSError, KeyError) as exc:
            raise PipelineError(name, exc) from exc
        finally:
            timings[name] = time.perf_counter() - t0

    stage("config", cfg.validate)
    W0 = stage("load", lambda: as_matrix(cfg.matrix) if cfg.matrix is not None
               else load_matrix(cfg.input, cfg.input_format, cfg.shape))
    W, params = stage("compress", lambda: compress_matrix(W0, cfg))
    W = as_matrix(W)
    B = cfg.word_bits
    C, decode, dot = stage("encode", lambda: _encode(W, cfg.store, B))

    x = np.random.default_rng(cfg.seed).normal(size=W.shape[0])
    ref = W.T @ x

    def verify():
        back = decode(C)
        if not np.array_equal(np.asarray(back), W):
            raise VerificationError(f"{cfg.store} roundtrip is not lossless")
        got = dot(x, C)
        scale = np.abs(W).T @ np.abs(x)
        if np.any(np.abs(got - ref) > 1e-9 * np.maximum(scale, 1.0)):
            raise VerificationError(f"{cfg.store} dot product disagrees with x^T W")

    stage("verify", verify)
    t_dense, iqr_dense = stage("time-dense", lambda: _time(lambda: dense_dot(x, W), cfg.trials))
    t_comp, iqr_comp = stage("time-compressed", lambda: _time(lambda: dot(x, C), cfg.trials))
    psi_m, psi_model = _measured(C, W, cfg.store, B)
    dist = cmp.distortion(W0, W)
    if cfg.task:
        delta, kind = stage("task", lambda: _regression_task(W0, W, cfg)), "task-mse"
    else:
        delta, kind = dist, "reconstruction-mse"
    q, s = sparsity(W)
    return CompressionReport(
        name=cfg.name,
        method=cfg.method,
        store=cfg.store,
        rows=W.shape[0],
        cols=W.shape[1],
        nonzeros=q,
        density=s,
        distinct_nonzero=int(len(np.unique(W[W != 0]))),
        psi_formula=_psi_formula(W, cfg.store, B),
        psi_measured=psi_m,
        psi_measured_model=psi_model,
        distortion=dist,
        delta_perf=delta,
        delta_perf_kind=kind,
        time_ratio=t_comp / t_dense,
        speedup=t_dense / t_comp,
        t_dense=t_dense,
        t_compressed=t_comp,
        t_dense_iqr=iqr_dense,
        t_compressed_iqr=iqr_comp,
        timings=timings,
        params=params,
        config=cfg.echo(),
    )


def _failed_report(cfg, exc):
    nan = math.nan
    return CompressionReport(
        name=cfg.name, method=cfg.method, store=cfg.store, rows=0, cols=0, nonzeros=0,
        density=nan, distinct_nonzero=0, psi_formula=nan, psi_measured=nan,
        psi_measured_model=nan, distortion=nan, delta_perf=nan, delta_perf_kind="",
        time_ratio=nan, speedup=nan, t_dense=nan, t_compressed=nan,
        t_dense_iqr=nan, t_compressed_iqr=nan, timings={}, params={},
        config=cfg.echo(), error=str(exc),
    )


@dataclass
class SweepTable:
    rows: list
    best: int | None  # index into rows of the smallest psi with no decay

    def to_dicts(self):
        out = []
        for i, r in enumerate(self.rows):
            d = r.to_dict()
            d["best"] = i == self.best
            out.append(d)
        return out


def _no_decay(r, tol):
    if r.error is not None:
        return False
    if r.delta_perf_kind == "task-mse":
        return r.delta_perf <= tol
    return r.distortion <= tol


def sweep(grid, max_distortion: float | None = None) -> SweepTable:
    """Run every config; failed rows are kept with their error message.

    Rows are sorted by measured occupancy. ``best`` marks the smallest
    occupancy whose decay (task delta or distortion) is within
    ``max_distortion`` (default: each config's own ``max_distortion``).
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("empty sweep grid")
    rows = []
    for cfg in grid:
        try:
            rows.append(run(cfg))
        except HamShamError as exc:
            rows.append(_failed_report(cfg, exc))
    rows.sort(key=lambda r: (math.isnan(r.psi_measured), r.psi_measured))
    best = None
    for i, r in enumerate(rows):
        tol = max_distortion if max_distortion is not None else r.config["max_distortion"]
        if _no_decay(r, tol):
            best = i
            break
    return SweepTable(rows, best)


def _records(report):
    if isinstance(report, SweepTable):
        return report.to_dicts()
    if isinstance(report, CompressionReport):
        return [report.to_dict()]
    return [r.to_dict() for r in report]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return str(v)


def render_report(report, format: str = "json") -> str:
    records = _records(report)
    if format == "json":
        return json.dumps(records if len(records) != 1 or isinstance(report, (SweepTable, list))
                          else records[0], indent=2, default=float) + "\n"
    columns = SCALAR_FIELDS + ["params", "best"]
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in records:
            w.writerow([_fmt(r.get(c, False)) for c in columns])
        return buf.getvalue()
    if format == "markdown":
        cols = ["best", "name", "method", "params", "store", "density", "distinct_nonzero",
                "psi_formula", "psi_measured", "distortion", "delta_perf", "time_ratio", "error"]
        lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        for r in records:
            cells = []
            for c in cols:
                v = r.get(c, False)
                if c == "best":
                    cells.append("**best**" if v else "")
                elif isinstance(v, float):
                    cells.append(f"{v:.6g}")
                else:
                    cells.append(_fmt(v).replace("|", "\\|"))
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown report format {format!r}")


def emit_report(report, format: str = "json", path=None) -> str:
    """Render ``report`` (a report, list of reports or sweep table) and
    write it to ``path`` when given; returns the rendered text."""
    text = render_report(report, format)
    if path is not None:
        with open(path, "w", newline="") as f:
            f.write(text)
    return text
