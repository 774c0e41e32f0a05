"""Dense float64 matrix operations and seeded randomness.

Everything the GCN forward/backward pass needs: matmul, ReLU and its
backward, row softmax, segment mean readout, inverted dropout masks, and the
elementwise algebra used by backpropagation. Matrices are plain 2-D float64
numpy arrays. Every public operation validates shapes and rejects NaN/Inf
inputs instead of propagating them.

Randomness comes from numpy's PCG64 generator seeded with a 64-bit integer;
the algorithm is pinned so seeded streams (and therefore test vectors and
trained models) stay stable.
"""

from __future__ import annotations

import numpy as np

Matrix = np.ndarray


class KernelError(ValueError):
    """Base class for numeric kernel errors."""


class ShapeMismatch(KernelError):
    pass


class FiniteViolation(KernelError):
    pass


class EmptySegment(KernelError):
    pass


class SegmentOutOfRange(KernelError):
    pass


class BadProbability(KernelError):
    pass


def make_rng(seed: int | np.random.SeedSequence | np.random.Generator) -> np.random.Generator:
    """PCG64 generator from a seed; passes an existing Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def as_matrix(values, name: str = "matrix") -> Matrix:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {m.shape}")
    check_finite(m, name)
    return m


def check_finite(m: Matrix, name: str = "matrix") -> None:
    if not np.all(np.isfinite(m)):
        raise FiniteViolation(f"{name} contains NaN or Inf")


def matmul(a, b) -> Matrix:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    check_finite(out, "matmul result")
    return out


def transpose(m) -> Matrix:
    return as_matrix(m).T.copy()


def add(a, b) -> Matrix:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise ShapeMismatch(f"add shapes differ: {a.shape} vs {b.shape}")
    out = a + b
    check_finite(out, "add result")
    return out


def scale(m, c: float) -> Matrix:
    m = as_matrix(m)
    if not np.isfinite(c):
        raise FiniteViolation("scale factor is not finite")
    out = m * c
    check_finite(out, "scale result")
    return out


def elementwise_mul(a, b) -> Matrix:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise ShapeMismatch(f"elementwise_mul shapes differ: {a.shape} vs {b.shape}")
    out = a * b
    check_finite(out, "elementwise_mul result")
    return out


def relu(m) -> Matrix:
    return np.maximum(as_matrix(m), 0.0)


def relu_backward(m, upstream) -> Matrix:
    """Pass upstream gradient where m > 0; the subgradient at 0 is 0."""
    m = as_matrix(m, "m")
    upstream = as_matrix(upstream, "upstream")
    if m.shape != upstream.shape:
        raise ShapeMismatch(
            f"relu_backward shapes differ: {m.shape} vs {upstream.shape}"
        )
    return np.where(m > 0.0, upstream, 0.0)


def leaky_relu(m, slope: float = 0.01) -> Matrix:
    """max(x, slope * x). The graph layers use this rather than plain ReLU:
    with bias-free layers and non-negative degree features, a plain-ReLU unit
    whose weights start negative is dead for every input and can never
    recover, so whole models are stillborn for unlucky seeds. The leaky slope
    keeps a gradient path open."""
    m = as_matrix(m)
    return np.where(m > 0.0, m, slope * m)


def leaky_relu_backward(m, upstream, slope: float = 0.01) -> Matrix:
    """Upstream gradient where m > 0, slope-scaled elsewhere."""
    m = as_matrix(m, "m")
    upstream = as_matrix(upstream, "upstream")
    if m.shape != upstream.shape:
        raise ShapeMismatch(
            f"leaky_relu_backward shapes differ: {m.shape} vs {upstream.shape}"
        )
    return np.where(m > 0.0, upstream, slope * upstream)


def softmax_rows(m) -> Matrix:
    """Row-wise softmax with per-row max subtraction for overflow safety."""
    m = as_matrix(m)
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def segment_mean(m, segments, num_segments: int) -> Matrix:
    """Mean of m's rows per segment; segments must be sorted and cover
    0..num_segments-1 with no empty segment."""
    m = as_matrix(m)
    seg = np.asarray(segments, dtype=np.int64)
    if seg.ndim != 1 or seg.shape[0] != m.shape[0]:
        raise ShapeMismatch(
            f"segments length {seg.shape} does not match {m.shape[0]} rows"
        )
    if seg.size == 0:
        raise EmptySegment("no rows to reduce")
    if seg.min() < 0 or seg.max() >= num_segments:
        raise SegmentOutOfRange(
            f"segment ids span {seg.min()}..{seg.max()}, expected 0..{num_segments - 1}"
        )
    if np.any(np.diff(seg) < 0):
        raise SegmentOutOfRange("segment ids must be non-decreasing")
    counts = np.bincount(seg, minlength=num_segments)
    if np.any(counts == 0):
        raise EmptySegment(f"segments {np.flatnonzero(counts == 0).tolist()} are empty")
    boundaries = np.searchsorted(seg, np.arange(num_segments))
    sums = np.add.reduceat(m, boundaries, axis=0)
    return sums / counts[:, None]


def dropout_mask(rng: np.random.Generator, rows: int, cols: int, p: float) -> Matrix:
    """Inverted dropout mask: entries are 0 with probability p, else 1/(1-p),
    so the mask has unit expectation and inference needs no rescaling."""
    if not 0.0 <= p < 1.0:
        raise BadProbability(f"dropout probability {p} not in [0, 1)")
    keep = rng.random((rows, cols)) >= p
    return keep / (1.0 - p)
