"""Polarimetric image decoding, augmentation and depth losses."""
__version__ = "0.1.0"
