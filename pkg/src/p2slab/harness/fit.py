from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    points: int
    x_column: str
    y_column: str

    def as_row(self) -> dict[str, Any]:
        return {"x_column": self.x_column, "y_column": self.y_column, "slope": self.slope,
                "intercept": self.intercept, "r_squared": self.r_squared, "points": self.points}


FIT_COLUMNS = ("x_column", "y_column", "slope", "intercept", "r_squared", "points")


def fit_power_law_xy(x: Sequence[float], y: Sequence[float], x_column: str = "x",
                     y_column: str = "y") -> FitResult:
    """Least squares on ``(log x, log y)``; ``y ~ exp(intercept) x^slope``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1D of equal length")
    if len(x) < 4:
        raise FitError(f"need at least 4 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise FitError("power-law fit needs finite positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise FitError("x values are all equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - float(np.sum(resid ** 2)) / ss_tot))
    return FitResult(float(slope), float(intercept), r2, len(x), x_column, y_column)


def fit_power_law(rows: Sequence[Mapping[str, Any]], x_column: str, y_column: str,
                  where: Callable[[Mapping[str, Any]], bool] | None = None) -> FitResult:
    kept = [r for r in rows if where is None or where(r)]
    for col in (x_column, y_column):
        if kept and col not in kept[0]:
            raise FitError(f"no column {col!r}")
    return fit_power_law_xy([r[x_column] for r in kept], [r[y_column] for r in kept], x_column, y_column)
