"""
LISA DRAM Simulator

A cycle-level simulator of low-cost inter-linked subarrays: fast in-DRAM
bulk copies, an in-DRAM cache in fast subarrays and linked precharge.
"""

__version__ = "1.0.0"
__author__ = "Memory Systems Team"
__description__ = "Cycle-level DRAM simulator for inter-linked subarrays"
