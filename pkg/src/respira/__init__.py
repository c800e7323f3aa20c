"""Respiratory rate estimation from camera frames of the face and chest.

Frames are split into small sub-ROI cells, each cell's colour traces are
low-pass filtered, decomposed with EMD, and the respiratory mode's rate is
read off its autocorrelation. Per-cell rates are fused with an SNR-weighted
median.
"""

from .errors import InputError, PipelineError
from .pipeline import AnalysisResult, PipelineConfig, analyze_cells, analyze_frames

__version__ = "0.1.0"

__all__ = ["AnalysisResult", "InputError", "PipelineConfig", "PipelineError", "analyze_cells", "analyze_frames"]
