"""Experiment harness: tensor files, generators, runs and reports.

Text formats (``#`` starts a comment, indices are 0-based)::

    coo        n1 n2 n3 [nnz]            then lines  i j k value
    coo4       n1 n2 m1 m2 [nnz]         then lines  i j p q value,
                                         folded to k = p + m1*q
    canonical  canonical n1 n2 n3 R      then U, V, W row by row
    tucker     tucker n1 n2 n3 r1 r2 r3  then U, V, W row by row and the
                                         core in first-index-fastest order
    dense      dense n1 n2 n3            then all entries, first index fastest

The binary variant starts with ``TKV1``, a one-byte kind code and
little-endian int64 sizes followed by little-endian float64 payloads.
"""

import argparse
import csv
import io
import json
import os
import struct
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import TuckerTensor, as_tensor, linearize, mode_multiply, random_orthonormal
from .krylov import mkr, optimized_mkr, range_start
from .oracle import hosvd, random_init, tucker_als
from .report import RunReport, Termination
from .sources import (
    CanonicalTensor,
    CountingSource,
    DenseSource,
    HadamardTuckerSource,
    SparseTensor3,
    TuckerSource,
    describe,
)
from .wedderburn import PivotStrategy, compute_core, tucker_approximate, wlncr_drive

FORMATS = ("coo", "coo4", "canonical", "tucker", "dense", "binary")
ALGORITHMS = ("mkr", "opt-mkr", "wsvd", "wlnc", "wsvdr", "wlncr", "hosvd", "tucker-als")
EXIT_CODES = {"converged": 0, "breakdown": 3, "max_rank": 4}
MAGIC = b"TKV1"
KIND_CODES = {"coo": 0, "canonical": 1, "tucker": 2, "dense": 3}
CSV_COLUMNS = ("step", "mode", "rank", "ranks", "err_estimate", "nrm", "true_error",
               "tenvecs", "ms")


class TensorFormatError(ValueError):
    """Malformed tensor file; the message carries the offending line number."""


# --------------------------------------------------------------------- files

def _tokens(text):
    """Yield ``(line_number, fields)`` for non-empty, non-comment lines."""
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def _ints(fields, no, count=None):
    try:
        vals = [int(f) for f in fields]
    except ValueError:
        raise TensorFormatError(f"line {no}: expected integers, got {' '.join(fields)!r}")
    if count is not None and len(vals) not in count:
        raise TensorFormatError(f"line {no}: expected {' or '.join(map(str, count))} sizes")
    if any(v < 0 for v in vals):
        raise TensorFormatError(f"line {no}: sizes must be non-negative")
    return vals


def _parse_coo(lines, folded):
    no, head = next(lines, (1, None))
    if head is None:
        raise TensorFormatError("line 1: missing header")
    nd = 4 if folded else 3
    sizes = _ints(head, no, (nd, nd + 1))
    dims = sizes[:nd]
    nnz = sizes[nd] if len(sizes) > nd else None
    idx, vals = [], []
    for no, f in lines:
        if len(f) != nd + 1:
            raise TensorFormatError(f"line {no}: expected {nd} indices and a value")
        try:
            ijk = [int(x) for x in f[:nd]]
            val = float(f[nd])
        except ValueError:
            raise TensorFormatError(f"line {no}: cannot parse {' '.join(f)!r}")
        for l, (i, n) in enumerate(zip(ijk, dims)):
            if not 0 <= i < n:
                raise TensorFormatError(f"line {no}: index {l + 1} = {i} outside [0, {n})")
        idx.append(ijk)
        vals.append(val)
    if nnz is not None and nnz != len(vals):
        raise TensorFormatError(f"header announces {nnz} entries, found {len(vals)}")
    idx = np.array(idx, dtype=np.int64).reshape(-1, nd)
    if folded:
        idx = np.column_stack([idx[:, 0], idx[:, 1], idx[:, 2] + dims[2] * idx[:, 3]])
        dims = [dims[0], dims[1], dims[2] * dims[3]]
    return SparseTensor3(dims, idx, vals)


def _read_floats(lines, count, what):
    vals = []
    last = 0
    for no, f in lines:
        last = no
        try:
            vals.extend(float(x) for x in f)
        except ValueError:
            raise TensorFormatError(f"line {no}: non-numeric entry in {what}")
        if len(vals) >= count:
            break
    if len(vals) != count:
        raise TensorFormatError(f"line {last}: {what} needs {count} values, got {len(vals)}")
    return np.array(vals)


def _read_matrix(lines, rows, cols, what):
    out = np.empty((rows, cols))
    for r in range(rows):
        try:
            no, f = next(lines)
        except StopIteration:
            raise TensorFormatError(f"end of file inside {what} (row {r + 1} of {rows})")
        if len(f) != cols:
            raise TensorFormatError(f"line {no}: {what} row needs {cols} values, got {len(f)}")
        try:
            out[r] = [float(x) for x in f]
        except ValueError:
            raise TensorFormatError(f"line {no}: non-numeric entry in {what}")
    return out


def _expect_keyword(lines, word):
    no, head = next(lines, (1, None))
    if head is None or head[0].lower() != word:
        raise TensorFormatError(f"line {no}: header must start with {word!r}")
    return no, head[1:]


def _parse_text(text, fmt):
    lines = _tokens(text)
    if fmt in ("coo", "coo4"):
        return _parse_coo(lines, fmt == "coo4")
    no, head = _expect_keyword(lines, fmt)
    if fmt == "dense":
        dims = _ints(head, no, (3,))
        vals = _read_floats(lines, int(np.prod(dims)), "dense values")
        src = DenseSource(as_tensor(vals, dims))
    elif fmt == "canonical":
        n1, n2, n3, r = _ints(head, no, (4,))
        factors = [_read_matrix(lines, n, r, name) for n, name in ((n1, "U"), (n2, "V"), (n3, "W"))]
        src = CanonicalTensor(factors)
    elif fmt == "tucker":
        n1, n2, n3, r1, r2, r3 = _ints(head, no, (6,))
        factors = [_read_matrix(lines, n, r, name)
                   for n, r, name in ((n1, r1, "U"), (n2, r2, "V"), (n3, r3, "W"))]
        core = _read_floats(lines, r1 * r2 * r3, "core").reshape((r1, r2, r3), order="F")
        src = TuckerSource(TuckerTensor(core, tuple(factors)))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    extra = next(lines, None)
    if extra is not None:
        raise TensorFormatError(f"line {extra[0]}: unexpected trailing data")
    return src


def _parse_binary(data):
    if data[:4] != MAGIC or len(data) < 5:
        raise TensorFormatError("not a TKV1 file")
    kinds = {v: k for k, v in KIND_CODES.items()}
    kind = kinds.get(data[4])
    if kind is None:
        raise TensorFormatError(f"unknown kind code {data[4]}")
    pos = 5

    def ints(n):
        nonlocal pos
        if pos + 8 * n > len(data):
            raise TensorFormatError("truncated TKV1 header")
        vals = struct.unpack_from(f"<{n}q", data, pos)
        pos += 8 * n
        return vals

    def floats(n):
        nonlocal pos
        if pos + 8 * n > len(data):
            raise TensorFormatError("truncated TKV1 payload")
        vals = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(np.float64)
        pos += 8 * n
        return vals

    if kind == "coo":
        n1, n2, n3, nnz = ints(4)
        idx = np.array(ints(3 * nnz), dtype=np.int64).reshape(nnz, 3)
        src = SparseTensor3((n1, n2, n3), idx, floats(nnz))
    elif kind == "dense":
        dims = ints(3)
        src = DenseSource(as_tensor(floats(int(np.prod(dims))), dims))
    elif kind == "canonical":
        n1, n2, n3, r = ints(4)
        src = CanonicalTensor([floats(n * r).reshape((n, r), order="F") for n in (n1, n2, n3)])
    else:
        n1, n2, n3, r1, r2, r3 = ints(6)
        factors = [floats(n * r).reshape((n, r), order="F")
                   for n, r in ((n1, r1), (n2, r2), (n3, r3))]
        core = floats(r1 * r2 * r3).reshape((r1, r2, r3), order="F")
        src = TuckerSource(TuckerTensor(core, tuple(factors)))
    if pos != len(data):
        raise TensorFormatError("trailing bytes after TKV1 payload")
    return src


def load_tensor(path, fmt=None):
    """Read a tensor file and return the matching tenvec source.

    Without ``fmt`` the format is inferred: binary files by their magic,
    text files by a ``canonical``/``tucker``/``dense`` header word, and a
    purely numeric header is read as plain COO (``coo4`` must be explicit).
    """
    data = Path(path).read_bytes()
    if data[:4] == MAGIC:
        if fmt not in (None, "binary"):
            raise TensorFormatError(f"{path} is a TKV1 binary file, not {fmt}")
        return _parse_binary(data)
    if fmt == "binary":
        raise TensorFormatError(f"{path}: missing TKV1 magic")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise TensorFormatError(f"{path}: not a text file")
    return _parse_text(text, fmt or _sniff(text, path))


def _sniff(text, path):
    for line in text.splitlines():
        words = line.split("#", 1)[0].split()
        if not words:
            continue
        if words[0] in ("canonical", "tucker", "dense"):
            return words[0]
        if words[0].lstrip("-").isdigit():
            return "coo"
        break
    raise TensorFormatError(f"{path}: cannot infer format; pass one of {FORMATS}")


def _kind(src):
    src = src.inner if isinstance(src, CountingSource) else src
    if isinstance(src, SparseTensor3):
        return "coo", src
    if isinstance(src, CanonicalTensor):
        return "canonical", src
    if isinstance(src, TuckerSource):
        return "tucker", src
    if isinstance(src, DenseSource):
        return "dense", src
    return "dense", DenseSource(src.densify())


def _rows(mat):
    return "\n".join(" ".join(repr(float(x)) for x in row) for row in mat)


def dumps_text(src):
    kind, src = _kind(src)
    n1, n2, n3 = src.shape
    if kind == "coo":
        lines = [f"{n1} {n2} {n3} {src.nnz}"]
        lines += [f"{i} {j} {k} {float(v)!r}" for (i, j, k), v in zip(src.indices, src.values)]
    elif kind == "dense":
        lines = [f"dense {n1} {n2} {n3}"]
        lines += [repr(float(v)) for v in linearize(src.values)]
    elif kind == "canonical":
        lines = [f"canonical {n1} {n2} {n3} {src.rank}"] + [_rows(f) for f in src.factors if f.size]
    else:
        t = src.tucker
        lines = ["tucker {} {} {} {} {} {}".format(*t.shape, *t.ranks)]
        lines += [_rows(f) for f in t.factors if f.size]
        lines += [" ".join(repr(float(v)) for v in linearize(t.core))]
    return "\n".join(line for line in lines if line) + "\n"


def dumps_binary(src):
    kind, src = _kind(src)
    out = io.BytesIO()
    out.write(MAGIC + bytes([KIND_CODES[kind]]))

    def ints(*vals):
        out.write(struct.pack(f"<{len(vals)}q", *vals))

    def floats(arr):
        out.write(np.asarray(arr, dtype="<f8").ravel(order="F").tobytes())

    if kind == "coo":
        ints(*src.shape, src.nnz)
        ints(*src.indices.ravel())
        floats(src.values)
    elif kind == "dense":
        ints(*src.shape)
        floats(src.values)
    elif kind == "canonical":
        ints(*src.shape, src.rank)
        for f in src.factors:
            floats(f)
    else:
        t = src.tucker
        ints(*t.shape, *t.ranks)
        for f in t.factors:
            floats(f)
        floats(t.core)
    return out.getvalue()


def save_tensor(src, path, fmt="text"):
    """Write ``src`` in its natural text format, or as TKV1 with ``fmt="binary"``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "binary":
        path.write_bytes(dumps_binary(src))
    else:
        path.write_text(dumps_text(src))
    return path


# ---------------------------------------------------------------- generators

def _parse_spec(spec):
    """``"kind:key=val,key=val"`` -> ``(kind, dict)``; ``r`` may be ``3x3x3``."""
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"generator parameter {item!r} is not key=value")
        params[key.strip()] = val.strip()
    return kind.strip(), params


def _triple(val):
    if isinstance(val, (tuple, list)):
        parts = [int(p) for p in val]
    else:
        parts = [int(p) for p in str(val).replace("x", " ").replace("/", " ").split()]
    if len(parts) == 1:
        parts *= 3
    if len(parts) != 3:
        raise ValueError(f"expected one or three integers, got {val!r}")
    return tuple(parts)


def exact_tucker(n, ranks, seed=0):
    rng = np.random.default_rng(seed)
    n, ranks = _triple(n), _triple(ranks)
    if any(r > m for r, m in zip(ranks, n)):
        raise ValueError(f"ranks {ranks} exceed sizes {n}")
    factors = tuple(random_orthonormal(m, r, rng) for m, r in zip(n, ranks))
    return TuckerTensor(rng.standard_normal(ranks), factors, (True, True, True), ortho_tol=1e-10)


def two_slice(n, seed=0):
    """``n x n x n`` tensor whose only non-zero frontal slices are the first two."""
    rng = np.random.default_rng(seed)
    t = np.zeros((n, n, n))
    t[:, :, :2] = rng.standard_normal((n, n, 2))
    return t


def decaying_spectrum(n, rate=0.5, seed=0):
    """Tucker tensor with a diagonal core ``rate**i`` and random orthonormal factors.

    Mode singular values of the result are exactly ``rate**i``.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    core = np.zeros((n, n, n))
    core[np.arange(n), np.arange(n), np.arange(n)] = rate ** np.arange(n)
    factors = tuple(random_orthonormal(n, n, rng) for _ in range(3))
    return TuckerTensor(core, factors, (True, True, True), ortho_tol=1e-10)


def generate_tensor(spec):
    """Build a source from a generator spec such as ``exact-tucker:n=12,r=3x3x3,seed=7``.

    Kinds: ``exact-tucker`` (n, r, seed), ``two-slice`` (n, seed),
    ``decaying-spectrum`` (n, rate, seed) and ``hadamard-square`` (path, format).
    """
    kind, p = _parse_spec(spec)
    seed = int(p.get("seed", 0))
    try:
        if kind == "exact-tucker":
            return TuckerSource(exact_tucker(p["n"], p.get("r", "2"), seed))
        if kind == "two-slice":
            return DenseSource(two_slice(int(p["n"]), seed))
        if kind == "decaying-spectrum":
            return TuckerSource(decaying_spectrum(int(p["n"]), float(p.get("rate", 0.5)), seed))
        if kind == "hadamard-square":
            base = load_tensor(p["path"], p.get("format", "tucker"))
            if not isinstance(base, TuckerSource):
                raise ValueError("hadamard-square needs a Tucker input")
            return HadamardTuckerSource(base.tucker, base.tucker)
    except KeyError as exc:
        raise ValueError(f"generator {kind!r} needs parameter {exc.args[0]!r}") from None
    raise ValueError(f"unknown generator {kind!r}")


# --------------------------------------------------------------- experiments

@dataclass
class ExperimentConfig:
    """One run.  Exactly one of ``input`` (file) and ``generator`` is set."""

    algorithm: str = "wlncr"
    input: str = None
    format: str = None
    generator: str = None
    tol: float = 1e-12
    eps: float = 1e-8
    r_max: tuple = None
    p_als: int = 3
    p_pow: int = 3
    seed: int = 0
    oracle: bool = True
    out: str = None
    mem_budget: float = 2e8
    als_iterations: int = 10
    start: str = "random"

    def __post_init__(self):
        if (self.input is None) == (self.generator is None):
            raise ValueError("give exactly one of input and generator")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0.0 <= self.eps < 1.0 or not 0.0 < self.tol < 1.0:
            raise ValueError("need 0 <= eps < 1 and 0 < tol < 1")
        if self.start not in ("random", "e1"):
            raise ValueError(f"unknown start {self.start!r}; use random or e1")
        if self.r_max is not None:
            self.r_max = _triple(self.r_max) if not isinstance(self.r_max, tuple) else self.r_max
            if min(self.r_max) < 1:
                raise ValueError("rmax must be >= 1")

    def source(self):
        if self.generator is not None:
            return generate_tensor(self.generator)
        return load_tensor(self.input, self.format)


def _caps(cfg, shape):
    if cfg.r_max is None:
        return tuple(shape)
    return tuple(min(r, n) for r, n in zip(cfg.r_max, shape))


class _TrueError:
    """Dense relative residual of the projection onto basis prefixes."""

    def __init__(self, dense, factors):
        self.dense = dense
        self.factors = factors
        self.norm = float(np.linalg.norm(dense)) or 1.0
        self.cache = {}

    def __call__(self, ranks):
        ranks = tuple(ranks)
        if ranks not in self.cache:
            approx = self.dense
            for mode, f, r in zip((1, 2, 3), self.factors, ranks):
                q = f[:, :r]
                approx = mode_multiply(approx, mode, q @ q.T)
            self.cache[ranks] = float(np.linalg.norm(self.dense - approx)) / self.norm
        return self.cache[ranks]


def _run_algorithm(cfg, src):
    shape = src.shape
    caps = _caps(cfg, shape)
    alg = cfg.algorithm
    if alg == "wlncr" and cfg.start == "e1":
        u0, v0, w0 = (np.eye(n)[0] for n in shape)
        return wlncr_drive(src, u0, v0, w0, cfg.tol, cfg.eps, caps, cfg.seed)
    if alg in ("wsvd", "wlnc", "wsvdr", "wlncr"):
        strategy = PivotStrategy(alg, cfg.p_als, cfg.p_pow)
        return tucker_approximate(src, strategy, cfg.tol, cfg.eps, caps, cfg.seed)
    if alg in ("mkr", "opt-mkr"):
        u1, v1 = range_start(src, cfg.seed)
        if alg == "mkr":
            U, V, W, report = mkr(src, u1, v1, max(caps), cfg.tol)
        else:
            U, V, W, report = optimized_mkr(src, u1, v1, max(caps), cfg.tol, cfg.p_als,
                                            cfg.seed)
        U, V, W = U[:, : caps[0]], V[:, : caps[1]], W[:, : caps[2]]
        for rec in report.steps:
            rec.tenvecs += 2  # the range start
        before = src.count
        core = compute_core(src, U, V, W)
        report.core_tenvecs = src.count - before
        t = TuckerTensor(core, (U, V, W), (True, True, True), ortho_tol=1e-10)
        return t, report.finish(t.ranks, report.tenvec_count + 2 + report.core_tenvecs)
    if cfg.r_max is None:
        raise ValueError(f"{alg} needs explicit target ranks (--rmax)")
    if alg == "hosvd":
        report = RunReport("hosvd", estimator="none")
        t = hosvd(src.densify(), caps)
        report.record(0, max(caps), float("nan"), float("nan"), caps, src.count)
        report.termination = {m: Termination("max_rank") for m in (1, 2, 3)}
        return t, report.finish(t.ranks, src.count)
    report = RunReport("tucker-als", estimator="none")
    t = None
    factors = random_init(shape, caps, cfg.seed)
    for it in range(cfg.als_iterations):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            t = tucker_als(src, factors, 1)
        factors = t.factors
        report.record(0, it + 1, float("nan"), float(np.linalg.norm(t.core)), t.ranks, src.count)
    report.termination = {m: Termination("max_rank") for m in (1, 2, 3)}
    return t, report.finish(t.ranks, src.count)


def run_experiment(cfg, src=None):
    """Run one configured algorithm; returns ``(tucker, report, summary)``.

    With ``cfg.out`` set, ``<out>.csv`` and ``<out>.json`` are written.
    """
    base = cfg.source() if src is None else src
    counted = CountingSource(base)
    t, report = _run_algorithm(cfg, counted)
    if report.tenvec_count != counted.count and cfg.algorithm not in ("hosvd",):
        raise RuntimeError(
            f"tenvec accounting mismatch: report {report.tenvec_count}, counter {counted.count}"
        )
    summary = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
        "source": asdict(describe(base)),
        "oracle": "off",
    }
    truth = None
    if cfg.oracle:
        entries = float(np.prod(base.shape))
        if entries > cfg.mem_budget:
            warnings.warn(
                f"dense oracle needs {entries:.3g} entries, budget is {cfg.mem_budget:.3g}; "
                "continuing without true errors",
                RuntimeWarning,
            )
        else:
            dense = base.densify()
            truth = _TrueError(dense, t.factors)
            summary["oracle"] = "dense"
    running = {1: 0, 2: 0, 3: 0}
    for rec in report.steps:
        if rec.mode in running and cfg.algorithm != "tucker-als":
            running[rec.mode] = rec.rank
            ranks = tuple(min(running[m], t.ranks[m - 1]) for m in (1, 2, 3))
            rec.ranks = ranks
        if truth is not None:
            if cfg.algorithm in ("hosvd", "tucker-als"):
                rec.true_error = float(np.linalg.norm(truth.dense - t.full())) / truth.norm
            else:
                rec.true_error = truth(rec.ranks)
    if truth is not None:
        summary["final_true_error"] = float(np.linalg.norm(truth.dense - t.full())) / truth.norm
    summary["report"] = report.to_dict()
    summary["exit_code"] = EXIT_CODES[report.outcome]
    if hasattr(base, "peak_entries"):
        summary["peak_entries"] = base.peak_entries
        summary["kron_core_entries"] = base.kron_core_entries
    if cfg.out:
        out = Path(cfg.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.with_suffix(".csv").write_text(report_csv(report))
        out.with_suffix(".json").write_text(json.dumps(summary, indent=2, default=_json_default))
    return t, report, summary


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def report_csv(report, timing=True):
    """CSV text with one row per step; ``timing=False`` drops the ``ms`` column."""
    buf = io.StringIO()
    cols = CSV_COLUMNS if timing else CSV_COLUMNS[:-1]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for rec in report.steps:
        row = {
            "step": rec.step,
            "mode": rec.mode,
            "rank": rec.rank,
            "ranks": "x".join(str(int(r)) for r in rec.ranks),
            "err_estimate": rec.err_estimate,
            "nrm": rec.nrm,
            "true_error": rec.true_error,
            "tenvecs": rec.tenvecs,
            "ms": round(rec.ms, 3),
        }
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def strip_timing(csv_text):
    """Drop the last (``ms``) column so runs can be compared byte for byte."""
    return "\n".join(line.rsplit(",", 1)[0] for line in csv_text.splitlines()) + "\n"


# ----------------------------------------------------------------------- CLI

def _env_seed():
    val = os.environ.get("TENKRYLOV_SEED")
    return int(val) if val not in (None, "") else 0


def _add_run_flags(p, multi=False):
    p.add_argument("--input", help="tensor file, or a generator spec with --format gen")
    p.add_argument("--format", choices=FORMATS + ("gen",), help="input format")
    if multi:
        p.add_argument("--algo", nargs="+", choices=ALGORITHMS,
                       default=["mkr", "wsvd", "wlnc", "wsvdr", "wlncr"])
        p.add_argument("--jobs", type=int, default=1, help="worker threads")
    else:
        p.add_argument("--algo", choices=ALGORITHMS, default="wlncr")
    p.add_argument("--eps", type=float, default=1e-8,
                   help="relative stopping threshold on the error estimate")
    p.add_argument("--tol", type=float, default=1e-12, help="breakdown threshold")
    p.add_argument("--rmax", type=_triple, default=None, help="r or r1xr2xr3")
    p.add_argument("--pals", type=int, default=3, help="ALS sweeps per pivot")
    p.add_argument("--ppow", type=int, default=3, help="power sweeps per error estimate")
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (default: $TENKRYLOV_SEED, else 0)")
    p.add_argument("--oracle", choices=("on", "off"), default="on",
                   help="dense true-error column when it fits the memory budget")
    p.add_argument("--out", default=None, help="output prefix (directory for compare)")
    p.add_argument("--mem-budget", type=float, default=2e8,
                   help="largest entry count the dense oracle may form")
    p.add_argument("--als-iterations", type=int, default=10, help="sweeps for tucker-als")
    p.add_argument("--start", choices=("random", "e1"), default="random",
                   help="wlncr start vectors: seeded random or first unit vectors")


def _config(args, algo, out, generator=None, seed=None):
    if generator is None and args.format == "gen":
        generator = args.input
    return ExperimentConfig(
        algorithm=algo,
        input=None if generator is not None else args.input,
        format=None if generator is not None else args.format,
        generator=generator,
        tol=args.tol,
        eps=args.eps,
        r_max=args.rmax,
        p_als=args.pals,
        p_pow=args.ppow,
        seed=seed,
        oracle=args.oracle == "on",
        out=out,
        mem_budget=args.mem_budget,
        als_iterations=args.als_iterations,
        start=args.start,
    )


def _print_summary(summary, stream):
    rep = summary["report"]
    line = (f"{rep['algorithm']}: ranks={tuple(rep['ranks'])} tenvecs={rep['tenvec_count']} "
            f"outcome={rep['outcome']}")
    if "final_true_error" in summary:
        line += f" true_error={summary['final_true_error']:.3e}"
    terms = ", ".join(f"mode {m}: {t}" for m, t in rep["termination"].items())
    print(f"{line} [{terms}]", file=stream)


def _cmd_approximate(args, stream):
    seed = _env_seed() if args.seed is None else args.seed
    cfg = _config(args, args.algo, args.out, seed=seed)
    _, _, summary = run_experiment(cfg)
    _print_summary(summary, stream)
    return summary["exit_code"]


def _cmd_compare(args, stream):
    seed = _env_seed() if args.seed is None else args.seed
    outdir = Path(args.out or "compare-out")
    outdir.mkdir(parents=True, exist_ok=True)
    base_cfg = _config(args, args.algo[0], None, seed=seed)
    src = base_cfg.source()
    cfgs = [_config(args, a, str(outdir / a), seed=seed) for a in args.algo]
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda c: run_experiment(c, src), cfgs))
    table = {}
    for cfg, (_, _, summary) in zip(cfgs, results):
        _print_summary(summary, stream)
        table[cfg.algorithm] = {
            "ranks": summary["report"]["ranks"],
            "tenvecs": summary["report"]["tenvec_count"],
            "outcome": summary["report"]["outcome"],
            "final_true_error": summary.get("final_true_error"),
        }
    (outdir / "summary.json").write_text(json.dumps(table, indent=2, default=_json_default))
    return max(r[2]["exit_code"] for r in results)


def _cmd_gen(args, stream):
    spec = args.spec
    src = generate_tensor(spec)
    if args.out is None:
        raise ValueError("gen needs --out")
    save_tensor(src, args.out, "binary" if args.binary else "text")
    print(f"wrote {args.out} ({_kind(src)[0]}, shape {src.shape})", file=stream)
    return 0


def _cmd_hadamard(args, stream):
    seed = _env_seed() if args.seed is None else args.seed
    fmt = args.format or "tucker"
    generator = f"hadamard-square:path={args.input},format={fmt}"
    cfg = _config(args, args.algo, args.out, generator=generator, seed=seed)
    _, report, summary = run_experiment(cfg)
    _print_summary(summary, stream)
    print(f"peak intermediate entries {summary['peak_entries']}, "
          f"implicit core entries {summary['kron_core_entries']}", file=stream)
    return summary["exit_code"]


def _cmd_info(args, stream):
    src = generate_tensor(args.input) if args.format == "gen" else load_tensor(args.input, args.format)
    info = asdict(describe(src))
    print(json.dumps(info, default=_json_default), file=stream)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tenkrylov", description="Matrix-free Tucker approximation experiments."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("approximate", help="run one algorithm")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_approximate)
    p = sub.add_parser("compare", help="run several algorithms on one tensor")
    _add_run_flags(p, multi=True)
    p.set_defaults(func=_cmd_compare)
    p = sub.add_parser("gen", help="write a generated tensor to a file")
    p.add_argument("spec", help="e.g. exact-tucker:n=12,r=3x3x3,seed=7")
    p.add_argument("--out", required=True)
    p.add_argument("--binary", action="store_true", help="write TKV1 instead of text")
    p.set_defaults(func=_cmd_gen)
    p = sub.add_parser("hadamard", help="recompress the elementwise square of a Tucker file")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_hadamard)
    p = sub.add_parser("info", help="describe a tensor file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=FORMATS + ("gen",))
    p.set_defaults(func=_cmd_info)
    return parser


def main(argv=None, stream=None):
    stream = sys.stdout if stream is None else stream
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "input", None) is None and args.command in ("approximate", "compare", "hadamard"):
        parser.error("--input is required")
    try:
        return args.func(args, stream)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
