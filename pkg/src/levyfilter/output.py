"""Filter output records and their CSV schema."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class FilterOutput:
    """Per-time filter summaries: posterior mean, threshold probabilities,
    unnormalized-mass diagnostics, and (for the particle engine) ESS.

    Rows are always normalized posterior summaries; ``normalized`` records
    that convention explicitly.
    """

    t: np.ndarray
    mean: np.ndarray
    thresholds: tuple
    probs: dict  # threshold -> array of P(X > a)
    xi_log: np.ndarray
    renorm_count: np.ndarray
    ess: Optional[np.ndarray] = None
    normalized: bool = True

    def prob(self, a: float) -> np.ndarray:
        return self.probs[float(a)]

    def at_time(self, t: float) -> dict:
        i = int(np.argmin(np.abs(self.t - t)))
        row = {"t": float(self.t[i]), "mean": float(self.mean[i])}
        for a in self.thresholds:
            row[f"p_exceed_{a:g}"] = float(self.probs[float(a)][i])
        return row

    def to_csv(self, path: str) -> None:
        cols = ["t", "mean"]
        cols += [f"p_exceed_{a:g}" for a in self.thresholds]
        cols += ["xi_log", "mass_renorm_count"]
        data = [self.t, self.mean]
        data += [self.probs[float(a)] for a in self.thresholds]
        data += [self.xi_log, self.renorm_count]
        if self.ess is not None:
            cols.append("ess")
            data.append(self.ess)
        lines = [",".join(cols)]
        for row in zip(*data):
            lines.append(",".join(f"{v:.17g}" for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
