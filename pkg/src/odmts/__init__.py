"""Bilevel design of on-demand multimodal transit networks.

The agency opens bus legs between hubs; every trip then takes its cheapest
route, and riders with a car decide whether the resulting trip is quick
enough to switch. Designs are found by Benders decomposition with
combinatorial cuts for the adoption decisions.
"""
from .decomposition import SolveConfig, SolveRun, solve
from .follower import Design
from .generator import GenSpec, generate
from .instance import EconomicParams, Instance, InstanceError, Network, Trip, load_instance
from .oracle import enumerate_bilevel

__version__ = "0.1.0"

__all__ = ["Design", "EconomicParams", "GenSpec", "Instance", "InstanceError", "Network",
           "SolveConfig", "SolveRun", "Trip", "enumerate_bilevel", "generate", "load_instance",
           "solve"]
