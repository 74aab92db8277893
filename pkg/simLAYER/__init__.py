"""
群体模拟层，包含个体最优反应与逐轮抽样模拟。
"""

from .population_sim import SimulationConfig, SimulationTrace, best_response, simulate, test_observed

__all__ = ["SimulationConfig", "SimulationTrace", "best_response", "simulate", "test_observed"]
