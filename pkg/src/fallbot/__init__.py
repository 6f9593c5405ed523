"""Toolkit for a small camera-equipped mobile robot that watches for falls.

Subsystems:

- :mod:`fallbot.projective` — plane-induced pixel-transfer maps between views
- :mod:`fallbot.raster` — 8-bit image I/O and projective warping
- :mod:`fallbot.kinematics` — mecanum drive velocity/wheel-speed conversions
- :mod:`fallbot.sysid` — per-wheel duty-cycle/speed calibration
- :mod:`fallbot.falldet` — rule-based and learned fall classification
- :mod:`fallbot.simulator` — open-loop drive simulation on a calibrated plant
- :mod:`fallbot.pipeline` — end-to-end detection run producing a fall report
- :mod:`fallbot.config` — flat key=value files for camera and chassis setup
- :mod:`fallbot.cli` — the ``fallbot`` command-line front end
"""

__version__ = "0.1.0"
