"""Robust near-field STAR-RIS beamforming for joint sensing, communication
and power transfer: channel models, physical-layer metrics, the robust LMI
machinery, alternating active/passive optimization, and a seeded experiment
harness with baselines."""

__version__ = "0.1.0"
