"""Estimate degradation sampling weights from reference images and synthesize LR/HR training pairs."""

__version__ = "0.1.0"
