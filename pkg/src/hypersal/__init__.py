"""Hyperspectral salient object detection at desk scale: a numpy/numba tensor
engine with reverse-mode autodiff, the joint spatial-spectral saliency network,
classical spectral-pyramid baselines, and the training/evaluation harness."""

__version__ = "0.1.0"
