"""Plug-and-play ADMM reconstruction for MR fingerprinting.

Arrays follow one convention throughout: TSMIs are float64 arrays of shape
(channels, height, width), k-space data are complex128 arrays of shape
(frames, samples_per_frame) and tissue maps are dicts of (height, width)
arrays with keys t1, t2, pd and mask.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
