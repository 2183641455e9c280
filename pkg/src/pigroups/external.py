"""Out-of-process experiments speaking CSV over standard streams.

Per batch, the toolkit writes a CSV of query points (header = quantity
symbols) to the child's stdin and expects one dependent value per row on
stdout. A nonzero exit, unparseable or non-finite output, or a timeout
aborts the run with the offending batch or row identified. Batching
amortizes process start-up across large designs; with several workers,
disjoint batches go to separate processes and land in preallocated slots,
so the result is identical for any worker count.
"""

from __future__ import annotations

import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ExperimentTimeout, ParseFailure, SubprocessFailure


@dataclass(frozen=True)
class ExternalExperiment:
    command: tuple[str, ...]
    symbols: tuple[str, ...]
    timeout: float | None = None
    batch_size: int = 20000
    n_workers: int = 1
    domain: str = "positive"

    def evaluate_batch(self, points) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(points, dtype=float))
        starts = list(range(0, Q.shape[0], self.batch_size))
        out = np.empty(Q.shape[0])
        if self.n_workers <= 1 or len(starts) <= 1:
            for b, s in enumerate(starts):
                out[s:s + self.batch_size] = self._run_batch(Q[s:s + self.batch_size], b, s)
        else:
            with ThreadPoolExecutor(max_workers=self.n_workers) as pool:
                futures = [
                    pool.submit(self._run_batch, Q[s:s + self.batch_size], b, s)
                    for b, s in enumerate(starts)
                ]
                for s, fut in zip(starts, futures):
                    out[s:s + self.batch_size] = fut.result()
        return out

    def __call__(self, q_vec) -> float:
        return float(self.evaluate_batch(np.asarray(q_vec, dtype=float)[None, :])[0])

    def _run_batch(self, Q: np.ndarray, batch_index: int, row_offset: int) -> np.ndarray:
        text = ",".join(self.symbols) + "\n"
        text += "\n".join(",".join("%.17g" % v for v in row) for row in Q) + "\n"
        try:
            proc = subprocess.run(
                list(self.command), input=text, capture_output=True,
                text=True, timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise ExperimentTimeout(
                f"batch {batch_index}: no reply within {self.timeout}s"
            ) from exc
        except OSError as exc:
            raise SubprocessFailure(f"cannot launch {self.command[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise SubprocessFailure(
                f"batch {batch_index}: exit code {proc.returncode}; "
                f"stderr: {proc.stderr.strip()!r}"
            )
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != Q.shape[0]:
            raise ParseFailure(
                f"batch {batch_index}: expected {Q.shape[0]} values, got {len(lines)}"
            )
        values = np.empty(Q.shape[0])
        for i, line in enumerate(lines):
            try:
                v = float(line.strip())
            except ValueError:
                v = np.nan
            if not np.isfinite(v):
                raise ParseFailure(
                    f"row {row_offset + i}: unparseable output {line.strip()!r}"
                )
            values[i] = v
        return values
