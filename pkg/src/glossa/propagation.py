"""Modified-Adsorption style label propagation.

Synchronous (Jacobi) iteration of

    Y'_v = (mu1 p_inj(v) Y_v + mu2 sum_u W_vu Y'_u + mu3 p_abnd(v) r)
           / (mu1 p_inj(v) + mu2 sum_u W_vu + mu3)

with p_inj = 1 for seeded nodes (scaled by seed confidence) and 0
otherwise, p_abnd = 1 - 0.9 p_inj, and r a point mass on a dummy
abandonment label. The dummy coordinate is dropped and rows are
renormalized on output, so an isolated seed is returned exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import TagDictionary
from .graph import LabelGraph, is_type_node, type_of
from .tags import Tag

INJECTION_KEEP = 0.9  # p_abnd = 1 - INJECTION_KEEP * p_inj


class NoSeeds(ValueError):
    pass


@dataclass(frozen=True)
class PropagationConfig:
    mu1: float = 1.0
    mu2: float = 0.01
    mu3: float = 0.01
    max_iters: int = 50
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if min(self.mu1, self.mu2, self.mu3) <= 0:
            raise ValueError("all mu constants must be positive")


@dataclass
class PropagationResult:
    distributions: dict[str, dict[Tag, float]]
    labels: list[Tag]
    residual: float
    iterations: int
    seeded: set[str] = field(default_factory=set)

    def distribution(self, node: str) -> dict[Tag, float]:
        return self.distributions[node]


def propagate(graph: LabelGraph, cfg: PropagationConfig | None = None) -> PropagationResult:
    cfg = cfg or PropagationConfig()
    if not graph.seeds:
        raise NoSeeds("propagation needs at least one seeded node")
    n = graph.n_nodes
    L = len(graph.labels)
    # final column is the dummy abandonment label
    Y = np.zeros((n, L + 1))
    p_inj = np.zeros(n)
    for name, dist in graph.seeds.items():
        i = graph.index[name]
        Y[i, :L] = dist
        p_inj[i] = graph.seed_confidence.get(name, 1.0)
    p_abnd = 1.0 - INJECTION_KEEP * p_inj
    r = np.zeros(L + 1)
    r[L] = 1.0

    W = graph.weights
    w_deg = np.asarray(W.sum(axis=1)).ravel()
    denom = cfg.mu1 * p_inj + cfg.mu2 * w_deg + cfg.mu3
    inj_term = cfg.mu1 * p_inj[:, None] * Y
    abnd_term = cfg.mu3 * np.outer(p_abnd, r)

    current = Y.copy()
    residual = np.inf
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        updated = (inj_term + cfg.mu2 * (W @ current) + abnd_term) / denom[:, None]
        residual = float(np.max(np.abs(updated - current).sum(axis=1)))
        current = updated
        if residual < cfg.tol:
            break

    real = current[:, :L]
    sums = real.sum(axis=1)
    distributions: dict[str, dict[Tag, float]] = {}
    for i, name in enumerate(graph.nodes):
        if sums[i] > 0.0:
            row = real[i] / sums[i]
        else:
            row = np.zeros(L)
        distributions[name] = {tag: float(row[k]) for k, tag in enumerate(graph.labels)}
    return PropagationResult(distributions, list(graph.labels), residual,
                             iterations, set(graph.seeds))


def expand_dictionary(result: PropagationResult, keep_threshold: float = 0.1,
                      existing: TagDictionary | None = None) -> TagDictionary:
    """Dictionary expansion: unseeded type nodes contribute every tag whose
    propagated probability clears the threshold; existing entries pass
    through unchanged."""
    out = existing.copy() if existing is not None else TagDictionary()
    for name, dist in result.distributions.items():
        if not is_type_node(name) or name in result.seeded:
            continue
        word = type_of(name)
        if word in out:
            continue
        for tag, p in sorted(dist.items(), key=lambda kv: str(kv[0])):
            if p >= keep_threshold:
                out.add(word, tag, "propagated")
    return out
