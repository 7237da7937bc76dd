"""Log-domain outlier screening of ECa values."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

SIGMA_WINDOW = 2.5


class DomainError(ValueError):
    def __init__(self, indices: Sequence[int]):
        super().__init__(f"non-positive values at indices {list(indices)}")
        self.indices = list(indices)


class InsufficientDataError(ValueError):
    pass


@dataclass
class ScreeningReport:
    n_input: int
    n_removed: int
    log_mean: float
    log_sd: float
    removed_indices: list[int] = field(default_factory=list)
    mean_before_msm: float = float("nan")
    mean_after_msm: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def log_transform(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    bad = np.flatnonzero(~(v > 0))
    if bad.size:
        raise DomainError(bad.tolist())
    return np.log(v)


def screen_outliers(
    values: Sequence[float], window: float = SIGMA_WINDOW
) -> tuple[np.ndarray, ScreeningReport]:
    """Drop values whose log lies more than ``window`` sample SDs from the log mean.

    Statistics are computed once over the full input; there is no iteration.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InsufficientDataError("screening needs at least two values")
    z = log_transform(v)
    mu = float(z.mean())
    sd = float(z.std(ddof=1))
    # sd == 0 leaves the strict inequality false everywhere
    out = np.abs(z - mu) > window * sd
    removed = np.flatnonzero(out)
    kept = v[~out]
    report = ScreeningReport(
        n_input=int(v.size),
        n_removed=int(removed.size),
        log_mean=mu,
        log_sd=sd,
        removed_indices=removed.tolist(),
        mean_before_msm=float(v.mean()),
        mean_after_msm=float(kept.mean()),
    )
    return kept, report
