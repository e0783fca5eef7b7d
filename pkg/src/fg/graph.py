"""Dense normal equations and the Levenberg–Marquardt solver."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from src.geom.navstate import boxplus, tangent_dim
from .factors import Factor
from .schemas import FgConfig

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class LinearSystem:
    """H δ = b with H = JᵀJ and b = −Jᵀr over the ordered variables."""

    H: np.ndarray
    b: np.ndarray
    index: Dict[Hashable, slice]

    @property
    def dim(self) -> int:
        return len(self.b)


def ordering(values: Dict[Hashable, object], keys: Optional[Iterable[Hashable]] = None) -> Dict[Hashable, slice]:
    index, start = {}, 0
    for key in (values if keys is None else keys):
        dim = tangent_dim(values[key])
        index[key] = slice(start, start + dim)
        start += dim
    return index


class FactorGraph:
    def __init__(self, factors: Sequence[Factor] = ()):
        self.factors: List[Factor] = list(factors)

    def add(self, factor: Factor) -> None:
        self.factors.append(factor)

    def extend(self, factors: Iterable[Factor]) -> None:
        self.factors.extend(factors)

    def remove(self, factors: Iterable[Factor]) -> None:
        drop = {id(f) for f in factors}
        self.factors = [f for f in self.factors if id(f) not in drop]

    def touching(self, keys: Iterable[Hashable]) -> List[Factor]:
        keys = set(keys)
        return [f for f in self.factors if keys.intersection(f.keys)]

    def keys(self) -> set:
        return {k for f in self.factors for k in f.keys}

    def __len__(self) -> int:
        return len(self.factors)

    def count(self, kind: Optional[str] = None) -> int:
        """Scalar rows, optionally for one factor kind only."""
        return sum(len(f) for f in self.factors if kind is None or f.kind == kind)

    def cost(self, values: Dict[Hashable, object]) -> float:
        return float(sum(f.cost(values) for f in self.factors))

    def check(self, values: Dict[Hashable, object]) -> None:
        missing = self.keys() - set(values)
        if missing:
            raise KeyError(f"factors reference missing variables {sorted(missing)}")

    def linearize(self, values: Dict[Hashable, object], index: Optional[Dict[Hashable, slice]] = None) -> LinearSystem:
        index = ordering(values) if index is None else index
        dim = max((s.stop for s in index.values()), default=0)
        H = np.zeros((dim, dim))
        b = np.zeros(dim)
        for factor in self.factors:
            r, jac = factor.weighted(values)
            blocks = [(index[k], jac[k]) for k in factor.keys]
            for si, ji in blocks:
                b[si] -= ji.T @ r
                for sj, jj in blocks:
                    H[si, sj] += ji.T @ jj
        return LinearSystem(0.5 * (H + H.T), b, index)


def retract(values: Dict[Hashable, object], delta: np.ndarray, index: Dict[Hashable, slice]) -> Dict[Hashable, object]:
    out = dict(values)
    for key, sl in index.items():
        out[key] = boxplus(values[key], delta[sl])
    return out


@dataclass
class LmSummary:
    iterations: int = 0
    initial_cost: float = 0.0
    final_cost: float = 0.0
    costs: List[float] = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    final_lambda: float = 0.0


def solve_lm(graph: FactorGraph, values: Dict[Hashable, object], cfg: FgConfig = FgConfig()):
    """Levenberg–Marquardt on the whole graph; returns (values, summary).

    Costs recorded in the summary are those of accepted iterates only, so
    they never increase.
    """
    graph.check(values)
    lam = cfg.initial_lambda
    cost = graph.cost(values)
    summary = LmSummary(initial_cost=cost, costs=[cost])
    if not graph.factors:
        summary.converged, summary.reason = True, "empty graph"
        return values, summary

    for it in range(cfg.max_iterations):
        system = graph.linearize(values)
        if np.linalg.norm(system.b) < cfg.gradient_tolerance:
            summary.converged, summary.reason = True, "gradient"
            break

        accepted = False
        while lam <= cfg.max_lambda:
            try:
                factor = cho_factor(system.H + lam * np.eye(system.dim))
            except LinAlgError:
                lam *= 10.0
                continue
            delta = cho_solve(factor, system.b)
            trial = retract(values, delta, system.index)
            trial_cost = graph.cost(trial)
            if np.isfinite(trial_cost) and trial_cost <= cost:
                accepted = True
                break
            lam *= 10.0

        summary.iterations = it + 1
        if not accepted:
            summary.reason = "damping exhausted"
            logger.warning("LM stopped after %d iterations: λ exceeded %.1e", it + 1, cfg.max_lambda)
            break

        values = trial
        change = cost - trial_cost
        cost = trial_cost
        summary.costs.append(cost)
        lam = max(lam / 10.0, 1e-12)
        if change <= cfg.relative_tolerance * max(cost, np.finfo(float).tiny):
            summary.converged, summary.reason = True, "relative cost change"
            break
    else:
        summary.reason = "max iterations"
        logger.warning("LM did not converge in %d iterations (cost %.3e)", cfg.max_iterations, cost)

    summary.final_cost = cost
    summary.final_lambda = lam
    return values, summary
