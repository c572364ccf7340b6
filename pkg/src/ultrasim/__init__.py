"""Pose-conditioned generative ultrasound simulator.

Trains convolutional generators that map a 7D transducer pose (position +
unit quaternion) to a 2D grayscale image, against a deterministic synthetic
phantom renderer, and ships the evaluation protocols plus a serving layer.
"""

__version__ = "0.1.0"
