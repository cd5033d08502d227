"""Consensus formation among miners on random communication networks."""

from .kernels import BACKEND
from .graph import (
    CentralityRanking,
    Ensemble,
    Graph,
    closeness_centrality,
    gen_barabasi_albert,
    gen_erdos_renyi,
    gen_sbm,
    node_at_quantile,
)
from .experiments import EnsembleConfig, competitive_diffusion

__all__ = [
    "BACKEND",
    "CentralityRanking",
    "Ensemble",
    "EnsembleConfig",
    "Graph",
    "closeness_centrality",
    "competitive_diffusion",
    "gen_barabasi_albert",
    "gen_erdos_renyi",
    "gen_sbm",
    "node_at_quantile",
]
