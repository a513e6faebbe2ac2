"""File formats for photocount traces.

Binned trace (text, line oriented)::

    #subthermal-trace v1 tau_ns=<int>
    <k_count>,<n_count>
    ...

Raw timestamp events::

    #subthermal-events v1
    <channel:0|1>,<timestamp_ns>
    ...

Channel 0 is the subtraction detector, channel 1 the signal detector;
timestamps must be nondecreasing per channel.  Sample files written by the
CLI use ``#subthermal-samples v1`` followed by a one-line column header.
"""

from __future__ import annotations

import re
import warnings

import numpy as np

from .pipeline import BinnedTrace, bin_timestamps

__all__ = [
    "TraceFormatError",
    "TRACE_HEADER_PREFIX",
    "EVENTS_HEADER",
    "write_trace",
    "read_trace",
    "write_events",
    "read_events",
    "load_trace",
    "write_samples",
    "read_samples",
]

TRACE_HEADER_PREFIX = "#subthermal-trace v1"
EVENTS_HEADER = "#subthermal-events v1"
SAMPLES_HEADER_PREFIX = "#subthermal-samples v1"

_TRACE_HEADER_RE = re.compile(r"^#subthermal-trace v1 tau_ns=(\d+)\s*$")
_PAIR_RE = re.compile(r"^(\d+),(\d+)\s*$")

_WRITE_CHUNK = 1 << 20


class TraceFormatError(ValueError):
    """Malformed trace/event file; carries the offending 1-based line number."""

    def __init__(self, path, line_no: int | None, message: str):
        self.path = str(path)
        self.line_no = line_no
        where = f"{self.path}:{line_no}" if line_no is not None else self.path
        super().__init__(f"{where}: {message}")


def _write_pair_lines(fh, a: np.ndarray, b: np.ndarray) -> None:
    for i in range(0, a.size, _WRITE_CHUNK):
        block_a = a[i:i + _WRITE_CHUNK].tolist()
        block_b = b[i:i + _WRITE_CHUNK].tolist()
        fh.write("\n".join(f"{x},{y}" for x, y in zip(block_a, block_b)))
        fh.write("\n")


def write_trace(trace: BinnedTrace, path) -> None:
    """Write a binned trace in the ``#subthermal-trace v1`` format."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{TRACE_HEADER_PREFIX} tau_ns={trace.tau_ns}\n")
        _write_pair_lines(fh, trace.k_counts, trace.n_counts)


def _scan_for_bad_pair_line(path, start_line: int) -> int:
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if line_no < start_line:
                continue
            if line.strip() == "" and line_no > start_line:
                continue
            if not _PAIR_RE.match(line):
                return line_no
    return start_line


def read_trace(path) -> BinnedTrace:
    """Read a ``#subthermal-trace v1`` file back into a BinnedTrace."""
    with open(path) as fh:
        header = fh.readline()
        match = _TRACE_HEADER_RE.match(header)
        if not match:
            raise TraceFormatError(path, 1, f"expected '{TRACE_HEADER_PREFIX} tau_ns=<int>' header")
        tau_ns = int(match.group(1))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # loadtxt warns on empty body
                data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError:
            raise TraceFormatError(
                path, _scan_for_bad_pair_line(path, 2), "expected '<k_count>,<n_count>'"
            ) from None
    if data.size == 0:
        return BinnedTrace(np.zeros(0, np.int64), np.zeros(0, np.int64), tau_ns,
                           meta={"source": str(path)})
    if data.shape[1] != 2 or data.min() < 0:
        raise TraceFormatError(path, _scan_for_bad_pair_line(path, 2),
                               "expected two nonnegative counts per line")
    return BinnedTrace(data[:, 0], data[:, 1], tau_ns, meta={"source": str(path)})


def write_events(ts_subtract, ts_signal, path) -> None:
    """Write raw timestamps in the ``#subthermal-events v1`` format."""
    ts_k = np.asarray(ts_subtract, dtype=np.int64)
    ts_n = np.asarray(ts_signal, dtype=np.int64)
    channel = np.concatenate([np.zeros(ts_k.size, np.int64), np.ones(ts_n.size, np.int64)])
    ts = np.concatenate([ts_k, ts_n])
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{EVENTS_HEADER}\n")
        _write_pair_lines(fh, channel, ts)


def read_events(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an events file; returns (subtraction, signal) timestamp arrays."""
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != EVENTS_HEADER:
            raise TraceFormatError(path, 1, f"expected '{EVENTS_HEADER}' header")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # loadtxt warns on empty body
                data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError:
            raise TraceFormatError(
                path, _scan_for_bad_pair_line(path, 2), "expected '<channel:0|1>,<timestamp_ns>'"
            ) from None
    if data.size == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    channels = data[:, 0]
    ts = data[:, 1]
    bad = np.nonzero((channels != 0) & (channels != 1))[0]
    if bad.size:
        raise TraceFormatError(path, int(bad[0]) + 2, f"channel must be 0 or 1, got {channels[bad[0]]}")
    if ts.min() < 0:
        bad_row = int(np.nonzero(ts < 0)[0][0])
        raise TraceFormatError(path, bad_row + 2, "negative timestamp")
    out = []
    for ch in (0, 1):
        rows = np.nonzero(channels == ch)[0]
        ts_ch = ts[rows]
        if ts_ch.size > 1:
            drop = np.nonzero(np.diff(ts_ch) < 0)[0]
            if drop.size:
                raise TraceFormatError(path, int(rows[drop[0] + 1]) + 2,
                                       f"channel {ch} timestamps decrease")
        out.append(ts_ch)
    return out[0], out[1]


def load_trace(path, tau_ns: int | None = None) -> BinnedTrace:
    """Load either recognized format; events files are binned with ``tau_ns``."""
    with open(path) as fh:
        first = fh.readline()
    if first.startswith(TRACE_HEADER_PREFIX):
        return read_trace(path)
    if first.strip() == EVENTS_HEADER:
        if tau_ns is None:
            raise TraceFormatError(path, 1, "events input requires a tau_ns bin width")
        ts_k, ts_n = read_events(path)
        trace = bin_timestamps(ts_k, ts_n, tau_ns)
        trace.meta["source"] = str(path)
        return trace
    raise TraceFormatError(path, 1, "unrecognized header; expected a subthermal trace or events file")


def write_samples(samples, path, meta: dict | None = None) -> None:
    """Write conditioned samples as one count per line with a provenance header."""
    samples = np.asarray(samples, dtype=np.int64)
    pairs = " ".join(f"{k}={v}" for k, v in (meta or {}).items())
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{SAMPLES_HEADER_PREFIX}{' ' + pairs if pairs else ''}\n")
        fh.write("N\n")
        if samples.size:
            fh.write("\n".join(str(v) for v in samples.tolist()))
            fh.write("\n")


def read_samples(path) -> np.ndarray:
    """Read a samples file written by ``write_samples``."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith(SAMPLES_HEADER_PREFIX):
            raise TraceFormatError(path, 1, f"expected '{SAMPLES_HEADER_PREFIX}' header")
        column = fh.readline().strip()
        if column != "N":
            raise TraceFormatError(path, 2, "expected column header 'N'")
        body = fh.read().split()
    try:
        return np.array([int(v) for v in body], dtype=np.int64)
    except ValueError:
        raise TraceFormatError(path, None, "sample lines must be integers") from None
