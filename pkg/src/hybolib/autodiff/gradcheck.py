"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, grad


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_checked: int
    n_skipped: int
    tol: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures and np.isfinite(self.max_rel_err)

    def __bool__(self):
        return self.passed


def near_threshold(x, threshold, h):
    """Mask of entries within 10h of a clamp/relu kink, for ``finite_difference_check(skip=...)``."""
    return np.abs(np.asarray(x) - threshold) < 10 * h


def finite_difference_check(f, inputs, h=1e-6, tol=1e-5, floor=1e-3, skip=None):
    """Compare backward gradients of ``f(*inputs)`` against central differences.

    ``f`` must return a one-element Tensor and be deterministic (replay dropout
    masks and negative samples). ``inputs`` is a Tensor or a list of them; each
    is perturbed in place one element at a time and restored.

    The relative error of an element is ``|a - n| / max(|a|, |n|, floor)``.
    ``floor`` keeps gradients that are zero up to roundoff from failing on
    noise. ``skip`` is an optional list of boolean masks (one per input)
    marking subgradient points to leave out.
    """
    if not 0 < h <= 1e-3:
        raise ValueError(f"step h must be in (0, 1e-3], got {h}")
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    for t in inputs:
        t.requires_grad = True
    analytic = grad(f(*inputs), inputs)

    worst = 0.0
    n_checked = n_skipped = 0
    failures = []
    for k, t in enumerate(inputs):
        mask = None if skip is None or skip[k] is None else np.asarray(skip[k], dtype=bool)
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            if mask is not None and mask.reshape(-1)[i]:
                n_skipped += 1
                continue
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f(*inputs).data.reshape(-1)[0])
            flat[i] = orig - h
            fm = float(f(*inputs).data.reshape(-1)[0])
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            ana = float(analytic[k].reshape(-1)[i])
            n_checked += 1
            if not (np.isfinite(num) and np.isfinite(ana)):
                failures.append((k, i, ana, num, float("nan")))
                worst = float("nan")
                continue
            rel = abs(ana - num) / max(abs(ana), abs(num), floor)
            if not np.isnan(worst):
                worst = max(worst, rel)
            if rel > tol:
                failures.append((k, i, ana, num, rel))
    return GradCheckReport(worst, n_checked, n_skipped, tol, failures)
