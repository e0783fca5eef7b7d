import logging
from typing import Dict, Hashable, Iterable, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from src.common.utils import symmetrize
from .factors import Factor, PriorFactor
from .graph import FactorGraph, ordering

logger = logging.getLogger(__name__)


def schur_complement(H: np.ndarray, b: np.ndarray, m: int, damping: float = 1e-9) -> Tuple[np.ndarray, np.ndarray]:
    """Eliminate the first `m` variables: H*_λλ = H_λλ − H_λµH_µµ⁻¹H_µλ, b* = b_λ − H_λµH_µµ⁻¹b_µ."""
    h_mm, h_ml, h_ll = H[:m, :m], H[:m, m:], H[m:, m:]
    b_m, b_l = b[:m], b[m:]
    if m == 0:
        return h_ll.copy(), b_l.copy()
    try:
        factor = cho_factor(h_mm)
    except LinAlgError:
        logger.warning("singular block in marginalization; adding %.1e to its diagonal", damping)
        factor = cho_factor(h_mm + damping * np.eye(m))
    x = cho_solve(factor, np.column_stack([h_ml, b_m]))
    return symmetrize(h_ll - h_ml.T @ x[:, :-1]), b_l - h_ml.T @ x[:, -1]


def marginalize(
    graph: FactorGraph,
    values: Dict[Hashable, object],
    keys: Iterable[Hashable],
    damping: float = 1e-9,
) -> Tuple[Optional[PriorFactor], List[Factor]]:
    """Remove `keys` and their factors; their information moves into a prior on the Markov blanket.

    The blanket is linearized at `values`, which become the prior's frozen
    linearization points. Returns the new prior (None when the blanket is
    empty) and the factors taken out of the graph.
    """
    keys = list(dict.fromkeys(keys))
    removed = graph.touching(keys)
    graph.remove(removed)
    blanket = list(dict.fromkeys(k for f in removed for k in f.keys if k not in keys))

    local = FactorGraph(removed)
    index = ordering(values, keys + blanket)
    system = local.linearize(values, index)
    m = sum(index[k].stop - index[k].start for k in keys)
    H, b = schur_complement(system.H, system.b, m, damping)

    for key in keys:
        values.pop(key, None)
    if not blanket:
        return None, removed

    frozen = {k: (values[k].copy() if isinstance(values[k], np.ndarray) else values[k]) for k in blanket}
    prior = PriorFactor(tuple(blanket), H, b, frozen)
    graph.add(prior)
    logger.debug("marginalized %s: %d factors into a prior on %d variables", keys, len(removed), len(blanket))
    return prior, removed
