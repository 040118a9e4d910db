"""Standalone anomaly-scoring sidecar.

Serves per-pixel anomaly maps over a length-delimited binary protocol, either
from a WinCLIP zero-shot segmentation model or from a conformance echo
backend used for protocol testing without model weights.
"""

__version__ = "0.1.0"
