"""Objective quality metrics for reference/test sequence pairs.

Sequence-level PSNR is the mean of per-frame PSNR values (the logging
convention of the reference codec software), with per-frame infinities
replaced by a configurable clamp so means stay finite; the substitution
is flagged in the result.
"""

from __future__ import annotations

import collections
import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import correlate1d

from .errors import (
    DataFormatError,
    DimensionError,
    EmptyInputError,
    InputError,
    LengthError,
)
from .video_io import FrameBuffer

PSNR_Y = "PSNR_Y"
PSNR_U = "PSNR_U"
PSNR_V = "PSNR_V"
WPSNR = "WPSNR"
SSIM = "SSIM"
COMPUTABLE_METRICS = (PSNR_Y, PSNR_U, PSNR_V, WPSNR, SSIM)

DEFAULT_CLAMP_DB = 100.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


@dataclass(frozen=True)
class PlaneStats:
    plane_id: str
    mse: float
    psnr: float  # math.inf marks a lossless plane


@dataclass(frozen=True)
class FrameQuality:
    frame_index: int
    planes: tuple[PlaneStats, PlaneStats, PlaneStats]
    wpsnr: float
    ssim: float


@dataclass(frozen=True)
class SequenceQuality:
    metric_id: str
    frame_values: tuple[float, ...]
    value: float
    clamp_applied: bool = False
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ContentFeatures:
    si: float
    ti: float


def mse(ref_plane, test_plane) -> float:
    """Mean squared error between two equally sized sample arrays."""
    ref = np.asarray(ref_plane)
    test = np.asarray(test_plane)
    if ref.shape != test.shape:
        raise DimensionError(f"plane shapes differ: {ref.shape} vs {test.shape}")
    if ref.size == 0:
        raise EmptyInputError("empty plane")
    diff = ref.astype(np.float64) - test.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr_from_mse(mse_value: float, bit_depth: int) -> float:
    """PSNR in dB for a signal of amplitude 2**bit_depth - 1; inf when MSE is 0."""
    if bit_depth not in (8, 10):
        raise InputError(f"unsupported bit depth {bit_depth}")
    if mse_value < 0:
        raise InputError(f"negative MSE {mse_value}")
    if mse_value == 0:
        return math.inf
    amplitude = (1 << bit_depth) - 1
    return 10.0 * math.log10(amplitude * amplitude / mse_value)


def wpsnr(psnr_y: float, psnr_u: float, psnr_v: float) -> float:
    """Combine per-plane PSNR as (6*Y + U + V) / 8."""
    return (6.0 * psnr_y + psnr_u + psnr_v) / 8.0


@lru_cache(maxsize=8)
def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    return k / k.sum()


def _windowed_mean(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable correlation; rows first (contiguous axis), then crop to the
    # fully supported interior so no padding convention leaks in.
    r = kernel.size // 2
    rows = correlate1d(values, kernel, axis=1, mode="constant")[:, r:-r]
    return correlate1d(rows, kernel, axis=0, mode="constant")[r:-r, :]


def ssim_frame(
    ref: FrameBuffer,
    test: FrameBuffer,
    plane: str = "y",
    window_size: int = _SSIM_WINDOW,
    sigma: float = _SSIM_SIGMA,
    k1: float = _SSIM_K1,
    k2: float = _SSIM_K2,
) -> float:
    """Mean structural similarity over all fully supported windows.

    Luma-only by default; pass plane="u"/"v" for a chroma plane.
    """
    _check_compatible(ref.info, test.info)
    idx = "yuv".index(plane)
    return _ssim_plane(
        ref.planes[idx], test.planes[idx], ref.info.sample_max,
        window_size, sigma, k1, k2,
    )


def _ssim_plane(ref, test, sample_max, window_size=_SSIM_WINDOW,
                sigma=_SSIM_SIGMA, k1=_SSIM_K1, k2=_SSIM_K2) -> float:
    if ref.shape != test.shape:
        raise DimensionError(f"plane shapes differ: {ref.shape} vs {test.shape}")
    if min(ref.shape) < window_size:
        raise InputError(
            f"plane {ref.shape} smaller than the {window_size}x{window_size} window"
        )
    kernel = _gaussian_kernel(window_size, sigma)
    c1 = (k1 * sample_max) ** 2
    c2 = (k2 * sample_max) ** 2
    r = ref.astype(np.float64)
    e = test.astype(np.float64)
    mu_r = _windowed_mean(r, kernel)
    mu_e = _windowed_mean(e, kernel)
    var_r = _windowed_mean(r * r, kernel) - mu_r * mu_r
    var_e = _windowed_mean(e * e, kernel) - mu_e * mu_e
    cov = _windowed_mean(r * e, kernel) - mu_r * mu_e
    ssim_map = ((2.0 * mu_r * mu_e + c1) * (2.0 * cov + c2)) / (
        (mu_r * mu_r + mu_e * mu_e + c1) * (var_r + var_e + c2)
    )
    return float(ssim_map.mean())


def frame_quality(
    ref: FrameBuffer, test: FrameBuffer, clamp_db: float = DEFAULT_CLAMP_DB
) -> FrameQuality:
    """Full per-frame stats: plane MSE/PSNR, weighted PSNR, luma SSIM.

    Plane PSNR keeps the infinity marker; the weighted PSNR is computed
    from clamped plane values so it stays finite.
    """
    _check_compatible(ref.info, test.info)
    stats = []
    clamped = []
    for i, name in enumerate("YUV"):
        m = mse(ref.planes[i], test.planes[i])
        p = psnr_from_mse(m, ref.info.bit_depth)
        stats.append(PlaneStats(name, m, p))
        clamped.append(p if math.isfinite(p) else clamp_db)
    return FrameQuality(
        frame_index=ref.frame_index,
        planes=tuple(stats),
        wpsnr=wpsnr(*clamped),
        ssim=ssim_frame(ref, test),
    )


def _check_compatible(a, b):
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionError(
            f"geometry mismatch: reference {a.width}x{a.height} "
            f"vs test {b.width}x{b.height}"
        )
    if a.bit_depth != b.bit_depth:
        raise DimensionError(
            f"bit depth mismatch: reference {a.bit_depth} vs test {b.bit_depth}"
        )
    if a.chroma != b.chroma:
        raise DimensionError(
            f"chroma mismatch: reference {a.chroma} vs test {b.chroma}"
        )


def _frame_pair_metrics(pair, metric_ids, clamp_db):
    ref, test = pair
    want_planes = set()
    if PSNR_Y in metric_ids or WPSNR in metric_ids:
        want_planes.add(0)
    if PSNR_U in metric_ids or WPSNR in metric_ids:
        want_planes.add(1)
    if PSNR_V in metric_ids or WPSNR in metric_ids:
        want_planes.add(2)

    psnr_raw = {}
    for i in sorted(want_planes):
        psnr_raw[i] = psnr_from_mse(
            mse(ref.planes[i], test.planes[i]), ref.info.bit_depth
        )

    def clamp(p):
        return p if math.isfinite(p) else clamp_db

    values = {}
    clamped = {}
    for mid, plane in ((PSNR_Y, 0), (PSNR_U, 1), (PSNR_V, 2)):
        if mid in metric_ids:
            values[mid] = clamp(psnr_raw[plane])
            clamped[mid] = not math.isfinite(psnr_raw[plane])
    if WPSNR in metric_ids:
        values[WPSNR] = wpsnr(*(clamp(psnr_raw[i]) for i in range(3)))
        clamped[WPSNR] = any(not math.isfinite(psnr_raw[i]) for i in range(3))
    if SSIM in metric_ids:
        values[SSIM] = ssim_frame(ref, test)
        clamped[SSIM] = False
    return values, clamped


def _paired(ref_source, test_source):
    ref_it = iter(ref_source)
    test_it = iter(test_source)
    index = 0
    while True:
        ref = next(ref_it, None)
        test = next(test_it, None)
        if ref is None and test is None:
            return
        if ref is None or test is None:
            side = "test" if ref is None else "reference"
            raise LengthError(
                f"frame-count mismatch: {side} sequence ended at frame {index}"
            )
        _check_compatible(ref.info, test.info)
        yield ref, test
        index += 1


def _ordered_map(fn, items, jobs):
    if jobs <= 1:
        for item in items:
            yield fn(item)
        return
    from concurrent.futures import ThreadPoolExecutor

    window = max(2, jobs * 2)
    pending = collections.deque()
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


def sequence_quality(
    ref_source,
    test_source,
    metric_ids=(PSNR_Y, PSNR_U, PSNR_V, WPSNR, SSIM),
    clamp_db: float = DEFAULT_CLAMP_DB,
    jobs: int = 1,
) -> dict[str, SequenceQuality]:
    """Stream frame pairs once and compute the selected metrics.

    The reduction consumes per-frame results in ascending frame order, so
    results are identical regardless of the worker count.
    """
    metric_ids = tuple(metric_ids)
    if not metric_ids:
        raise InputError("empty metric selection")
    for mid in metric_ids:
        if mid not in COMPUTABLE_METRICS:
            raise InputError(f"unknown metric {mid!r}")
    per_frame = {mid: [] for mid in metric_ids}
    clamp_hit = {mid: False for mid in metric_ids}

    def work(pair):
        return _frame_pair_metrics(pair, metric_ids, clamp_db)

    for values, clamped in _ordered_map(work, _paired(ref_source, test_source), jobs):
        for mid in metric_ids:
            per_frame[mid].append(values[mid])
            clamp_hit[mid] = clamp_hit[mid] or clamped[mid]

    n = len(per_frame[metric_ids[0]])
    if n == 0:
        raise EmptyInputError("no frames in input sequences")

    out = {}
    for mid in metric_ids:
        frames = per_frame[mid]
        out[mid] = SequenceQuality(
            metric_id=mid,
            frame_values=tuple(frames),
            value=sum(frames) / n,
            clamp_applied=clamp_hit[mid],
        )
    return out


def _sobel_magnitude(luma: np.ndarray) -> np.ndarray:
    """Gradient magnitude on interior pixels, standard 3x3 Sobel kernels."""
    if luma.shape[0] < 3 or luma.shape[1] < 3:
        raise InputError(f"plane {luma.shape} too small for a 3x3 Sobel filter")
    p = luma.astype(np.float64)
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2]
    )
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:]
    )
    return np.sqrt(gx * gx + gy * gy)


def spatial_info(frames) -> float:
    """Max over frames of the stddev of the Sobel-filtered luma plane."""
    best = None
    for frame in frames:
        value = float(np.std(_sobel_magnitude(frame.y)))
        best = value if best is None else max(best, value)
    if best is None:
        raise EmptyInputError("spatial_info requires at least one frame")
    return best


def temporal_info(frames) -> float:
    """Max over successive frame pairs of the stddev of the luma difference."""
    best = None
    previous = None
    for frame in frames:
        y = frame.y.astype(np.float64)
        if previous is not None:
            best_pair = float(np.std(y - previous))
            best = best_pair if best is None else max(best, best_pair)
        previous = y
    if best is None:
        raise InputError("temporal_info requires at least two frames")
    return best


def content_features(frames) -> ContentFeatures:
    """SI and TI in a single pass over the sequence."""
    si = None
    ti = None
    previous = None
    for frame in frames:
        si_frame = float(np.std(_sobel_magnitude(frame.y)))
        si = si_frame if si is None else max(si, si_frame)
        y = frame.y.astype(np.float64)
        if previous is not None:
            ti_frame = float(np.std(y - previous))
            ti = ti_frame if ti is None else max(ti, ti_frame)
        previous = y
    if si is None:
        raise EmptyInputError("content_features requires at least one frame")
    if ti is None:
        raise InputError("content_features requires at least two frames for TI")
    return ContentFeatures(si=si, ti=ti)


def ingest_external_scores(
    path, name: str | None = None, frame_count: int | None = None
) -> SequenceQuality:
    """Load per-frame scores produced by an external metric tool.

    Supports a two-column CSV (frame,score) and the JSON layout of the
    common VMAF tool: {"frames": [{"metrics": {"<name>": value}}, ...]}.
    """
    text = _read_text(path)
    stripped = text.lstrip()
    if stripped.startswith("{") or stripped.startswith("["):
        metric_name = name or "vmaf"
        scores = _scores_from_json(stripped, metric_name, path)
    else:
        metric_name = name or "score"
        scores = _scores_from_csv(text, path)

    if not scores:
        raise EmptyInputError(f"{path}: no scores present")
    warnings = []
    if frame_count is not None and frame_count != len(scores):
        warnings.append(
            f"score count {len(scores)} does not match declared frame count "
            f"{frame_count}; mean taken over present scores"
        )
    return SequenceQuality(
        metric_id=f"EXTERNAL:{metric_name}",
        frame_values=tuple(scores),
        value=sum(scores) / len(scores),
        warnings=tuple(warnings),
    )


def _read_text(path) -> str:
    with open(path, "r", encoding="utf-8") as fp:
        return fp.read()


def _scores_from_json(text, metric_name, path):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from None
    frames = doc.get("frames") if isinstance(doc, dict) else None
    if frames is None:
        raise DataFormatError(f'{path}: missing "frames" array')
    scores = []
    for i, entry in enumerate(frames):
        try:
            value = entry["metrics"][metric_name]
        except (TypeError, KeyError):
            raise DataFormatError(
                f"{path}: frame {i} lacks metric {metric_name!r}"
            ) from None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise DataFormatError(f"{path}: non-numeric score at frame {i}")
        scores.append(float(value))
    return scores


def _scores_from_csv(text, path):
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise EmptyInputError(f"{path}: empty file")
    header = [cell.strip().lower() for cell in rows[0]]
    if header != ["frame", "score"]:
        raise DataFormatError(
            f"{path}: expected header 'frame,score', got {','.join(header)!r}"
        )
    scores = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected two columns")
        try:
            scores.append(float(row[1]))
        except ValueError:
            raise DataFormatError(
                f"{path}:{lineno}: non-numeric score {row[1]!r}"
            ) from None
    return scores
