"""Splitting training data into time-contiguous segments and training them.

Segments are bounded by changes in the control signal.  Each segment keeps
the axis-aligned bounding box of its inputs; the box decides which segments
answer a query and also fixes the segment's input normalisation.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import ContractViolation, InvalidInputError, InvalidParameterError
from .simulators import rng_for
from .trainer import BatchModel, HyperParams, fit_batch

NOISE_STD = 1e-4  # variance 1e-8
NOISE_STREAM = 3
INPUT_SCALINGS = ("unit_diagonal", "unit_range", "none")

# Number of partitions per robot speed (um/s) used for long micro-robot runs.
SPEED_PARTITIONS = {0.2: 20, 0.4: 10, 0.6: 6, 0.8: 5, 1.0: 4}


@dataclass
class Segment:
    """Positions ``[start, stop)`` of the training data sorted by time."""
    start: int
    stop: int
    lower: np.ndarray = None
    upper: np.ndarray = None
    input_scaling: str = "unit_diagonal"

    def __post_init__(self):
        if not 0 <= self.start < self.stop:
            raise InvalidInputError(f"empty segment [{self.start}, {self.stop})")
        if self.input_scaling not in INPUT_SCALINGS:
            raise InvalidParameterError(f"unknown input scaling {self.input_scaling!r}")

    @property
    def row_range(self):
        return range(self.start, self.stop)

    def fit_bounds(self, X):
        rows = np.asarray(X, dtype=float)[self.start:self.stop]
        self.lower = rows.min(axis=0)
        self.upper = rows.max(axis=0)
        return self

    def _span(self):
        span = self.upper - self.lower
        return np.where(span > 0, span, 1.0)

    def normalize(self, X):
        """Map raw inputs to the coordinates the segment's models live in.

        ``unit_diagonal`` sends the bounding box to one whose diagonal has
        length 1; ``unit_range`` to the unit hypercube.
        """
        X = np.asarray(X, dtype=float)
        if self.input_scaling == "none":
            return X
        Z = (X - self.lower) / self._span()
        if self.input_scaling == "unit_diagonal":
            Z = Z / math.sqrt(self.lower.shape[0])
        return Z

    def contains(self, x):
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def exterior_distance(self, x):
        """Distance from ``x`` to the box, each axis measured in box widths."""
        gap = np.maximum(self.lower - x, 0.0) + np.maximum(x - self.upper, 0.0)
        return float(np.linalg.norm(gap / self._span()))


@dataclass
class SegmentedModel:
    """One ``BatchModel`` per (segment, response) pair.

    ``batch_models[s][j]`` serves segment ``s`` and response column ``j``.
    """
    segments: list
    batch_models: list
    params: HyperParams = field(default_factory=HyperParams)
    input_names: list = None
    response_names: list = None
    input_roles: list = None

    def __post_init__(self):
        if len(self.segments) != len(self.batch_models):
            raise ContractViolation("need exactly one set of batch models per segment")

    @property
    def input_dim(self):
        return self.segments[0].lower.shape[0]

    @property
    def response_dim(self):
        return len(self.batch_models[0])

    def local_model_counts(self):
        """Total local models per response, summed over segments."""
        return [sum(len(seg[j].models) for seg in self.batch_models)
                for j in range(self.response_dim)]

    def iterations(self):
        return [max(seg[j].iterations_used for seg in self.batch_models)
                for j in range(self.response_dim)]


def find_control_changes(control):
    """Indices ``i`` where ``control[i] != control[i - 1]``."""
    if control is None:
        return []
    control = np.asarray(control)
    if control.shape[0] == 0:
        raise InvalidInputError("empty control signal")
    return (np.flatnonzero(control[1:] != control[:-1]) + 1).tolist()


def build_segments(changes, N, segments_requested=1, overlap_blocks=1):
    """Group control-action blocks into contiguous segments.

    Blocks are the runs between control changes.  All segments get
    ``B // S`` blocks except the last, which takes the remainder; each
    non-final segment then extends ``overlap_blocks`` blocks into its
    successor.
    """
    if segments_requested < 1:
        raise InvalidParameterError("segments_requested must be at least 1")
    if overlap_blocks < 0:
        raise InvalidParameterError("overlap_blocks must be non-negative")
    bounds = [0] + sorted(int(c) for c in changes if 0 < c < N) + [N]
    n_blocks = len(bounds) - 1
    if segments_requested > n_blocks:
        raise InvalidInputError(
            f"{segments_requested} segments requested but only {n_blocks} control blocks")
    per = n_blocks // segments_requested
    segments = []
    for s in range(segments_requested):
        first = s * per
        last = n_blocks if s == segments_requested - 1 else first + per
        if s < segments_requested - 1:
            last = min(n_blocks, last + overlap_blocks)
        segments.append(Segment(bounds[first], bounds[last]))
    return segments


def ensure_nonzero_variance(y, noise_std=NOISE_STD, rng_seed=0, stream=()):
    """Return ``y`` unchanged unless it is constant; then jitter it slightly."""
    y = np.asarray(y, dtype=float)
    if np.var(y) != 0.0:
        return y
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([rng_seed, NOISE_STREAM, *stream])))
    return y + noise_std * rng.standard_normal(y.shape)


def segments_containing(x, segments):
    """Indices of segments whose box holds ``x``; else the nearest one."""
    if not segments:
        raise InvalidInputError("no segments to search")
    x = np.asarray(x, dtype=float)
    hits = [i for i, seg in enumerate(segments) if seg.contains(x)]
    if hits:
        return hits
    dists = [seg.exterior_distance(x) for seg in segments]
    return [int(np.argmin(dists))]


def _fit_job(args):
    X, y, params = args
    return fit_batch(X, y, params)


def train_segmented(data, params=HyperParams(), segments_requested=1, overlap_blocks=1,
                    rng_seed=0, jobs=1, input_scaling="unit_diagonal"):
    """Prepare the data and fit every (segment, response) pair.

    Segments are cut at control changes with rows in time order (when a
    time column exists).  Within a segment the rows keep their order in
    ``data``, which is the order local models are allocated in.  Constant
    responses are jittered before training.
    """
    if len(data) == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    if data.time_column_index is not None:
        order = np.argsort(data.sample_times, kind="stable")
    else:
        order = np.arange(len(data))
    timed = data.take(order)
    segments = build_segments(find_control_changes(timed.control), len(data),
                              segments_requested, overlap_blocks)
    jobs_in = []
    for s, seg in enumerate(segments):
        seg.input_scaling = input_scaling
        seg.fit_bounds(timed.inputs)
        rows = np.sort(order[seg.start:seg.stop])
        Z = seg.normalize(data.inputs[rows])
        for j in range(data.response_dim):
            y = ensure_nonzero_variance(data.responses[rows, j],
                                        rng_seed=rng_seed, stream=(s, j))
            jobs_in.append((Z, y, params))
    if jobs > 1 and len(jobs_in) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            fitted = list(pool.map(_fit_job, jobs_in))
    else:
        fitted = [_fit_job(a) for a in jobs_in]
    q = data.response_dim
    batches = [fitted[s * q:(s + 1) * q] for s in range(len(segments))]
    return SegmentedModel(segments, batches, params, list(data.input_names),
                          list(data.response_names), list(data.input_roles))
