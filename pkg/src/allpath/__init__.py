"""Desk-scale laboratory for the All-Path family of Ethernet switching
protocols: frame-level simulation of ARP-Path, Flow-Path and Bridge-Path,
plus the analytic companions (scalability equations, grid path counting,
two-path QBD stationary analysis, flow-level load-balance simulation).
"""

__version__ = "0.1.0"
