"""trapline: camera-trap time-lapse processing toolkit.

Turns SD-card image dumps into per-day MP4 videos plus machine-drafted,
human-verified segment and identity annotations. ML inference is abstracted
behind pluggable detection, mask, and embedding providers.
"""

__version__ = "0.1.0"
