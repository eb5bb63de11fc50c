"""Device profiling: benchmark workloads and two-phase profile assembly.

Two workloads produce a GFLOPS figure each: an escape-time Mandelbrot render
(compute bound) and a radix-2 complex FFT over a large buffer (memory bound).
The device's benchmark score is the mean of the two.
"""

from __future__ import annotations

import hashlib
import math
import queue
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Mapping

import numpy as np

from offloadkit.domain import NodeClass, NodeId, NodeProfile, validate_profile

MANDELBROT_REGION = (-2.0, 0.47, -1.12, 1.12)
# complex square (3 mul + 2 add), add c (2 add), |z|^2 compare (1)
FLOPS_PER_ESCAPE_ITERATION = 8
FFT_SEED = 20180702


class WorkloadKind(str, Enum):
    MANDELBROT = "Mandelbrot"
    FFT = "Fft"


class InvalidSize(ValueError):
    pass


class BenchmarkTimeout(TimeoutError):
    pass


@dataclass(frozen=True)
class WorkloadSpec:
    kind: WorkloadKind
    width: int = 800
    height: int = 800
    max_iter: int = 256
    region: tuple[float, float, float, float] = MANDELBROT_REGION
    fft_size: int = 1 << 20
    runs: int = 5
    warmup: int = 0

    @classmethod
    def mandelbrot(cls, width: int = 800, height: int = 800, max_iter: int = 256, **kw: Any) -> WorkloadSpec:
        return cls(WorkloadKind.MANDELBROT, width=width, height=height, max_iter=max_iter, **kw)

    @classmethod
    def fft(cls, size: int = 1 << 20, **kw: Any) -> WorkloadSpec:
        return cls(WorkloadKind.FFT, fft_size=size, **kw)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "width": self.width,
            "height": self.height,
            "max_iter": self.max_iter,
            "region": list(self.region),
            "fft_size": self.fft_size,
            "runs": self.runs,
            "warmup": self.warmup,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> WorkloadSpec:
        return cls(
            kind=WorkloadKind(data["kind"]),
            width=int(data.get("width", 800)),
            height=int(data.get("height", 800)),
            max_iter=int(data.get("max_iter", 256)),
            region=tuple(float(v) for v in data.get("region", MANDELBROT_REGION)),
            fft_size=int(data.get("fft_size", 1 << 20)),
            runs=int(data.get("runs", 5)),
            warmup=int(data.get("warmup", 0)),
        )


@dataclass(frozen=True)
class WorkloadResult:
    """Outcome of ``runs`` timed executions of one workload.

    ``gflops`` is always ``flops / mean_runtime_s / 1e9``; ``checksum`` is a
    digest of the computed output and does not depend on timing.
    """

    kind: WorkloadKind
    runs: int
    mean_runtime_s: float
    gflops: float
    flops: float
    checksum: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "runs": self.runs,
            "mean_runtime_s": self.mean_runtime_s,
            "gflops": self.gflops,
            "flops": self.flops,
            "checksum": self.checksum,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> WorkloadResult:
        return cls(
            kind=WorkloadKind(data["kind"]),
            runs=int(data["runs"]),
            mean_runtime_s=float(data["mean_runtime_s"]),
            gflops=float(data["gflops"]),
            flops=float(data["flops"]),
            checksum=str(data.get("checksum", "")),
        )


def gflops_for(flops: float, mean_runtime_s: float) -> float:
    return flops / mean_runtime_s / 1e9


# --- Mandelbrot -----------------------------------------------------------

def mandelbrot_grid(width: int, height: int, max_iter: int,
                    region: tuple[float, float, float, float] = MANDELBROT_REGION) -> np.ndarray:
    """Escape-time iteration counts, shape ``(height, width)``.

    A pixel's count is the number of ``z <- z*z + c`` updates performed before
    ``|z| > 2`` is observed or ``max_iter`` is reached. Pixel coordinates are
    spaced like ``numpy.linspace`` over the closed region.
    """
    x_min, x_max, y_min, y_max = region
    xs = np.linspace(x_min, x_max, width)
    ys = np.linspace(y_min, y_max, height)
    cr = np.broadcast_to(xs, (height, width)).ravel().copy()
    ci = np.broadcast_to(ys[:, None], (height, width)).ravel().copy()

    counts = np.zeros(cr.size, dtype=np.int64)
    active = np.arange(cr.size)
    zr = np.zeros_like(cr)
    zi = np.zeros_like(ci)
    for _ in range(max_iter):
        if active.size == 0:
            break
        inside = zr * zr + zi * zi <= 4.0
        if not inside.all():
            active, zr, zi, cr, ci = active[inside], zr[inside], zi[inside], cr[inside], ci[inside]
        zr, zi = zr * zr - zi * zi + cr, 2.0 * zr * zi + ci
        counts[active] += 1
    return counts.reshape(height, width)


def run_mandelbrot(spec: WorkloadSpec) -> WorkloadResult:
    if spec.kind is not WorkloadKind.MANDELBROT:
        raise ValueError(f"expected a Mandelbrot spec, got {spec.kind.value}")

    def once() -> np.ndarray:
        return mandelbrot_grid(spec.width, spec.height, spec.max_iter, spec.region)

    grid, runtimes = _timed(once, spec.runs, spec.warmup)
    flops = float(FLOPS_PER_ESCAPE_ITERATION * int(grid.sum()))
    mean = sum(runtimes) / len(runtimes)
    return WorkloadResult(
        kind=WorkloadKind.MANDELBROT,
        runs=spec.runs,
        mean_runtime_s=mean,
        gflops=gflops_for(flops, mean),
        flops=flops,
        checksum=grid_checksum(grid),
    )


def grid_checksum(grid: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(grid, dtype="<i8").tobytes()).hexdigest()


# --- FFT ------------------------------------------------------------------

def _is_power_of_two(n: int) -> bool:
    return n >= 2 and n & (n - 1) == 0


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_radix2(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Iterative Cooley-Tukey FFT; the inverse is normalised by 1/N.

    Works in place on ``x`` when it is a contiguous complex128 array and
    returns it; other inputs are copied first.
    """
    if isinstance(x, np.ndarray) and x.dtype == np.complex128 and x.flags.c_contiguous:
        a = x
    else:
        a = np.array(x, dtype=np.complex128)
    n = a.shape[0]
    if a.ndim != 1 or not _is_power_of_two(n):
        raise InvalidSize(f"FFT size must be a power of two >= 2, got {a.shape}")

    a[:] = a[_bit_reverse_permutation(n)]
    sign = 1.0 if inverse else -1.0
    half = 1
    while half < n:
        twiddle = np.exp(sign * 1j * np.pi * np.arange(half) / half)
        blocks = a.reshape(-1, 2 * half)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * twiddle
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        half *= 2
    if inverse:
        a /= n
    return a


def fft_input(size: int, seed: int = FFT_SEED) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


def run_fft(spec: WorkloadSpec) -> WorkloadResult:
    if spec.kind is not WorkloadKind.FFT:
        raise ValueError(f"expected an Fft spec, got {spec.kind.value}")
    n = spec.fft_size
    if not _is_power_of_two(n):
        raise InvalidSize(f"FFT size must be a power of two >= 2, got {n}")
    source = fft_input(n)

    def once() -> np.ndarray:
        return fft_radix2(source.copy())

    out, runtimes = _timed(once, spec.runs, spec.warmup)
    flops = 5.0 * n * math.log2(n)
    mean = sum(runtimes) / len(runtimes)
    return WorkloadResult(
        kind=WorkloadKind.FFT,
        runs=spec.runs,
        mean_runtime_s=mean,
        gflops=gflops_for(flops, mean),
        flops=flops,
        checksum=hashlib.sha256(np.round(out, 6).tobytes()).hexdigest(),
    )


def _timed(fn: Callable[[], Any], runs: int, warmup: int) -> tuple[Any, list[float]]:
    if runs < 1:
        raise ValueError("runs must be >= 1")
    for _ in range(warmup):
        fn()
    runtimes = []
    out = None
    for _ in range(runs):
        start = time.perf_counter()
        out = fn()
        # clamp so a coarse clock never yields a zero runtime
        runtimes.append(max(time.perf_counter() - start, 1e-9))
    return out, runtimes


def run_workload(spec: WorkloadSpec) -> WorkloadResult:
    if spec.kind is WorkloadKind.MANDELBROT:
        return run_mandelbrot(spec)
    return run_fft(spec)


def benchmark_score(man: WorkloadResult, fft: WorkloadResult) -> float:
    if man.kind is not WorkloadKind.MANDELBROT or fft.kind is not WorkloadKind.FFT:
        raise ValueError("benchmark_score takes a Mandelbrot result and an Fft result")
    return (man.gflops + fft.gflops) / 2


# --- profiling --------------------------------------------------------------

Runner = Callable[[WorkloadSpec, WorkloadSpec], "tuple[WorkloadResult, WorkloadResult]"]

_bench_lock = threading.Lock()


def local_runner(man_spec: WorkloadSpec, fft_spec: WorkloadSpec) -> tuple[WorkloadResult, WorkloadResult]:
    """Execute both workloads in this process, one at a time."""
    with _bench_lock:
        return run_mandelbrot(man_spec), run_fft(fft_spec)


def simulated_result(spec: WorkloadSpec, gflops: float) -> WorkloadResult:
    """A result that reports ``gflops`` without executing anything.

    The flop count is the nominal upper bound (every pixel iterating to
    ``max_iter``) for Mandelbrot and the usual 5 N log2 N for the FFT.
    """
    if gflops <= 0:
        raise ValueError("simulated gflops must be > 0")
    if spec.kind is WorkloadKind.MANDELBROT:
        flops = float(FLOPS_PER_ESCAPE_ITERATION * spec.width * spec.height * spec.max_iter)
    else:
        flops = 5.0 * spec.fft_size * math.log2(spec.fft_size)
    runtime = flops / (gflops * 1e9)
    return WorkloadResult(spec.kind, spec.runs, runtime, gflops_for(flops, runtime), flops)


def simulated_runner(gflops: float) -> Runner:
    def run(man_spec: WorkloadSpec, fft_spec: WorkloadSpec) -> tuple[WorkloadResult, WorkloadResult]:
        return simulated_result(man_spec, gflops), simulated_result(fft_spec, gflops)

    return run


@dataclass(frozen=True)
class StaticContext:
    """What a node knows about itself without running anything."""

    node_id: NodeId
    node_class: NodeClass
    cpu_clock_ghz: float
    cpu_cores: int
    memory_gb: float
    battery_level_pct: float | None = None
    charging: bool | None = None


def profile_node(
    static_ctx: StaticContext,
    runner: Runner,
    *,
    man_spec: WorkloadSpec | None = None,
    fft_spec: WorkloadSpec | None = None,
    deadline_s: float = 60.0,
) -> NodeProfile:
    """Static context first, then both benchmarks through ``runner``."""
    man_spec = man_spec or WorkloadSpec.mandelbrot()
    fft_spec = fft_spec or WorkloadSpec.fft()
    profile = NodeProfile(
        node_id=static_ctx.node_id,
        node_class=static_ctx.node_class,
        benchmark_gflops=0.0,
        cpu_clock_ghz=static_ctx.cpu_clock_ghz,
        cpu_cores=static_ctx.cpu_cores,
        memory_gb=static_ctx.memory_gb,
        battery_level_pct=static_ctx.battery_level_pct,
        charging=static_ctx.charging,
    )
    validate_profile(profile)

    # daemon thread: a runner that never returns must not block interpreter exit
    box: queue.Queue = queue.Queue(maxsize=1)

    def call() -> None:
        try:
            box.put((True, runner(man_spec, fft_spec)))
        except BaseException as exc:  # noqa: BLE001 - re-raised in caller
            box.put((False, exc))

    threading.Thread(target=call, name=f"bench-{static_ctx.node_id}", daemon=True).start()
    try:
        ok, value = box.get(timeout=deadline_s)
    except queue.Empty:
        raise BenchmarkTimeout(
            f"benchmark results for {static_ctx.node_id!r} not received within {deadline_s}s"
        ) from None
    if not ok:
        raise value
    man, fft = value
    return replace(profile, benchmark_gflops=benchmark_score(man, fft))
