"""Time-to-solution model for one knob configuration.

The time to dock an average ligand is a linear function of three data
features (pocket points ``p``, mean atoms ``a``, mean rotamers ``r``) and
all of their products, plus an intercept. Screening ``n`` ligands on ``w``
workers is then predicted as ``n * t / w``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .kernel import KnobConfig

FEATURE_NAMES = ("xp_p", "xl_a", "xl_r", "xp_p*xl_a", "xp_p*xl_r", "xl_a*xl_r", "xp_p*xl_a*xl_r")
N_PARAMS = len(FEATURE_NAMES) + 1


class FitError(ValueError):
    pass


class NegativePredictionWarning(UserWarning):
    """The raw model output was negative and has been clamped to zero."""


@dataclass(frozen=True)
class DataFeatures:
    pocket_points: float
    avg_atoms: float
    avg_rotamers: float
    ligand_count: int = 1

    def __post_init__(self):
        for name in ("pocket_points", "avg_atoms", "avg_rotamers", "ligand_count"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @classmethod
    def of(cls, pocket, ligands) -> "DataFeatures":
        """Features of an actual pocket and ligand list."""
        ligands = list(ligands)
        if not ligands:
            raise ValueError("no ligands")
        return cls(pocket.n_points, float(np.mean([lig.n_atoms for lig in ligands])),
                   float(np.mean([len(lig.rotamers) for lig in ligands])), len(ligands))


@dataclass(frozen=True)
class Observation:
    features: DataFeatures
    time_per_ligand: float

    def __post_init__(self):
        if not self.time_per_ligand > 0:
            raise ValueError(f"measured time must be positive, got {self.time_per_ligand}")


def feature_vector(f: DataFeatures) -> np.ndarray:
    p, a, r = float(f.pocket_points), float(f.avg_atoms), float(f.avg_rotamers)
    return np.array([p, a, r, p * a, p * r, a * r, p * a * r])


@dataclass(frozen=True)
class PerfModel:
    config: KnobConfig
    coefficients: tuple[float, ...]
    intercept: float
    adjusted_r2: float
    n_observations: int

    def time_per_ligand(self, f: DataFeatures) -> float:
        return float(np.dot(self.coefficients, feature_vector(f)) + self.intercept)


def design_matrix(observations: Sequence[Observation]) -> np.ndarray:
    x = np.array([feature_vector(o.features) for o in observations]).reshape(-1, N_PARAMS - 1)
    return np.hstack([x, np.ones((len(x), 1))])


def fit(config: KnobConfig, observations: Sequence[Observation]) -> PerfModel:
    """Ordinary least squares through a column-pivoted QR factorisation.

    Columns are scaled to unit maximum before factorising so that the rank
    test is not fooled by the very different magnitudes of the products.

    Raises
    ------
    FitError
        With fewer than 9 observations, or when the design is rank
        deficient (the message names the columns that are dependent).
    """
    n = len(observations)
    if n < N_PARAMS + 1:
        raise FitError(f"need at least {N_PARAMS + 1} observations, got {n}")
    x = design_matrix(observations)
    y = np.array([o.time_per_ligand for o in observations])
    scale = np.abs(x).max(axis=0)
    names = FEATURE_NAMES + ("intercept",)
    if np.any(scale == 0):
        zero = [names[k] for k in np.flatnonzero(scale == 0)]
        raise FitError(f"rank-deficient design: column(s) {', '.join(zero)} are all zero")
    xs = x / scale
    q, r, piv = linalg.qr(xs, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(xs.shape) * np.finfo(float).eps * 1e3
    rank = int(np.sum(diag > tol))
    if rank < N_PARAMS:
        bad = sorted(names[k] for k in piv[rank:])
        raise FitError(f"rank-deficient design (rank {rank} of {N_PARAMS}): "
                       f"column(s) {', '.join(bad)} are collinear with the others")
    beta_scaled = np.empty(N_PARAMS)
    beta_scaled[piv] = linalg.solve_triangular(r, q.T @ y)
    beta = beta_scaled / scale
    resid = y - x @ beta
    sse = float(resid @ resid)
    centred = y - y.mean()
    sst = float(centred @ centred)
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else 0.0)
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - N_PARAMS)
    return PerfModel(config, tuple(float(b) for b in beta[:-1]), float(beta[-1]), float(adj), n)


def predict(model: PerfModel, f: DataFeatures, workers: int = 1) -> float:
    """Predicted seconds to screen ``f.ligand_count`` ligands on ``workers``.

    Negative raw predictions are clamped to 0 with a
    :class:`NegativePredictionWarning`.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    raw = f.ligand_count * model.time_per_ligand(f) / workers
    if raw < 0:
        warnings.warn(f"negative time prediction {raw!r} s clamped to 0 for {model.config}",
                      NegativePredictionWarning, stacklevel=2)
        return 0.0
    return raw
