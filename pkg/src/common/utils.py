from functools import lru_cache
from typing import List

import numpy as np
from scipy.stats import chi2

from .errors import NonFiniteInputError

SPEED_OF_LIGHT = 299_792_458.0
GRAVITY = np.array([0.0, 0.0, -9.81])


@lru_cache(maxsize=256)
def chi2_threshold(dof: int, percentile: float) -> float:
    """Upper chi-squared quantile used by every gate in the suite."""
    return float(chi2.ppf(percentile, dof))


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def min_eigenvalue(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(symmetrize(mat)).min())


def require_finite(name: str, *arrays) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInputError(f"Non-finite values in {name}: {arr}")


def substreams(seed: int, index: int, count: int = 1) -> List[np.random.Generator]:
    """`count` independent generators for stream `index` of a master seed."""
    child = np.random.SeedSequence(seed).spawn(index + 1)[index]
    return [np.random.default_rng(s) for s in child.spawn(count)]
