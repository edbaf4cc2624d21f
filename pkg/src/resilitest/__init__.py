"""Resilience-testing toolkit for microservice systems.

Records traces from a deterministic microservice simulator, templates them
for replay, selects high-complexity test traces, plans application-level
fault injections, executes three-phase test campaigns, and verdicts system
resilience with a multi-level oracle.
"""

__version__ = "0.1.0"
