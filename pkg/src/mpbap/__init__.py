"""Branch-and-cut-and-price for multi-port berth allocation with speed choice."""
from .model import (CostWeights, Instance, InstanceError, SpeedGrid, fuel_per_distance,
                    fuel_rate, generate_instance, read_instance, write_instance)
from .graph import VoyageGraph, build_graph, conflict_set, shortest_path

__all__ = [
    "CostWeights", "Instance", "InstanceError", "SpeedGrid", "fuel_per_distance", "fuel_rate",
    "generate_instance", "read_instance", "write_instance", "VoyageGraph", "build_graph",
    "conflict_set", "shortest_path",
]
