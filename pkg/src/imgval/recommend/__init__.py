from .engine import (MetricPool, OutOfFrontier, PendingGuide, PoolEntry,
                     Session, decision_graph, export_graph, map_category,
                     recommend)
from .graph import DecisionGraph

__all__ = ["MetricPool", "OutOfFrontier", "PendingGuide", "PoolEntry",
           "Session", "DecisionGraph", "decision_graph", "export_graph",
           "map_category", "recommend"]
