"""Rank RL algorithm variants for agent-based policy optimization.

Traces of agent/environment interaction are discretized, analyzed and
turned into domain-driven and reliability metrics, which are ranked and
aggregated.  A small epidemic simulator and baseline policies produce
traces end to end.
"""

__version__ = "0.1.0"
