"""Background estimation from video via motion-masked center-hole
inpainting, with foreground segmentation and a benchmark metric suite."""

from .config import PipelineConfig
from .dataio import FrameSequence, load_sequence
from .pipeline import BackgroundModel, estimate_background, run_benchmark, segment_video

__all__ = [
    "PipelineConfig",
    "FrameSequence",
    "load_sequence",
    "BackgroundModel",
    "estimate_background",
    "segment_video",
    "run_benchmark",
]

__version__ = "0.1.0"
