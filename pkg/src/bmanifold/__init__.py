"""Unsupervised behavior-manifold toolkit for audio.

Pipeline: WAV audio -> 70-dim low-level descriptors at 100 Hz -> 420-dim
windowed functionals -> context-reconstruction bottleneck network -> 64-dim
embeddings -> nearest-neighbor classification / scenario similarity.
"""

__version__ = "0.1.0"
