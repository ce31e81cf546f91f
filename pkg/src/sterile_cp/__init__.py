"""Sterile-insect contact process: simulation, duality, percolation and block estimators."""
from .events import EventStream, ModelParams, build_stream, events_in_window
from .lattice import Box
from .process import InitSpec, LatticeConfig, ModelVariant, Trajectory, evolve
from .stats import EstimateCI

__version__ = "0.1.0"

__all__ = ["Box", "EstimateCI", "EventStream", "InitSpec", "LatticeConfig", "ModelParams",
           "ModelVariant", "Trajectory", "build_stream", "events_in_window", "evolve"]
