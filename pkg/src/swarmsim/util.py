"""Shared small helpers: seeding, truncated sampling, stable JSON.

Everything here is deliberately boring. The determinism guarantees of the
package lean on two conventions that live in this module:

* trial seeds are derived with ``numpy.random.SeedSequence`` spawn keys so a
  (master_seed, cell_index, trial_index) triple always maps to the same
  uint64, independent of process or worker layout;
* JSON written for humans or round-tripping is serialized with sorted keys
  and plain ``repr`` floats, so identical data means identical bytes.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [0, 2*pi). Python's % already has the right sign."""
    return theta % TWO_PI


def derive_trial_seed(master_seed: int, cell_index: int, trial_index: int) -> int:
    """Deterministic per-trial seed, stable across processes and platforms.

    SeedSequence mixes the entropy triple; we take one 64-bit word. Worker
    count or scheduling order never enters, so sweep outputs cannot depend
    on the executor layout.
    """
    ss = np.random.SeedSequence([int(master_seed), int(cell_index), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def positive_truncated_normal(
    rng: np.random.Generator, mean: float, std: float, n: int,
    upper: float = math.inf,
) -> np.ndarray:
    """Draw n values from N(mean, std^2) truncated to (0, upper].

    Resamples out-of-range draws in place, so the number of consumed uniforms
    depends only on the draw sequence (deterministic given the rng state).
    A non-positive mean cannot be sampled this way and is a caller error.
    """
    if not (mean > 0.0):
        raise ValueError(f"truncated-normal mean must be positive, got {mean}")
    if mean > upper:
        raise ValueError(f"truncated-normal mean {mean} exceeds upper bound {upper}")
    if std < 0.0:
        raise ValueError(f"std must be non-negative, got {std}")
    if std == 0.0:
        return np.full(n, float(mean))
    vals = rng.normal(mean, std, n)
    while True:
        bad = (vals <= 0.0) | (vals > upper)
        k = int(bad.sum())
        if k == 0:
            return vals
        vals[bad] = rng.normal(mean, std, k)


def dump_stable_json(obj: Any, indent: int | None = 2) -> str:
    """Serialize with sorted keys so equal payloads are equal bytes."""
    return json.dumps(obj, indent=indent, sort_keys=True, allow_nan=False)


def float_or_null(x: float) -> float | None:
    """JSON convention for metric values: non-finite floats become null."""
    return float(x) if math.isfinite(x) else None


def null_or_float(x: Any) -> float:
    """Inverse of float_or_null: null means positive infinity.

    The only non-finite metric the package emits is circliness = +inf (the
    degenerate centroid case), so the inverse mapping is unambiguous.
    """
    return math.inf if x is None else float(x)
