"""Surround multi-camera and scanner rig calibration."""

from rigcal._core import *  # noqa: F401,F403
from rigcal._core import __doc__  # noqa: F401

__version__ = "0.1.0"
