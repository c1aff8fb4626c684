"""specklemon: laser-speckle ablation monitoring.

Simulates speckle image sequences from parametrically machined rough
surfaces, trains a joint depth/material network on them, and serves
predictions and evaluations over a CLI and an HTTP API.
"""

__version__ = "0.1.0"
