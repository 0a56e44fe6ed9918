"""Dual-stream video monitoring service.

Converts a sequence of raw YUV420 frames into a live H.264 (Annex-B)
stream and a live MPJPEG stream served over TCP, with a JSON control
API for live camera settings and stream statistics.
"""

__version__ = "0.1.0"
