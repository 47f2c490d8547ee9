"""bnbench: a discrete Bayesian-network structure-learning benchmark toolkit.

Learn structures with three classes of algorithms, fit and query the
resulting networks, and grade everything with the model-fit, graph-distance
and predictive metrics used by the benchmark tables.
"""

from . import data, graph, indtest, learn, metrics, model, score

__version__ = "0.1.0"

__all__ = ["data", "graph", "indtest", "learn", "metrics", "model", "score"]
