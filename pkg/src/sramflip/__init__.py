"""Retention-failure simulator for ultra-low-voltage SRAM latches.

A 6T bitcell in hold mode reduces to two cross-coupled subthreshold
inverters. The package computes its butterfly curves and static noise
margin, maps the variability plane, linearizes the latch around its data
state, runs transient-noise Monte Carlo for the mean time to failure and
compares it with closed-form first-passage predictors.
"""

__version__ = "0.1.0"
