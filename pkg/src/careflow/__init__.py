"""Careflow: event-log based mortality prediction pipeline.

Converts patient event histories into event logs, discovers a workflow
Petri net, replays logs through decay-enhanced places into timed state
samples, trains a two-branch neural classifier, and reports AUC with
DeLong confidence intervals and exact grouped Shapley attributions.
"""

__version__ = "0.1.0"
