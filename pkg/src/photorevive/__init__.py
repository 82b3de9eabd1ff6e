"""Reference-guided restoration and colorization of old photographs."""

from .colorspace import LabImage, lab_to_rgb, rgb_to_gray, rgb_to_lab
from .model import ModelConfig, RepairModel, model_from_checkpoint, tiny_model_config
from .pipeline import RepairPipeline, RepairRequest, RepairResult

__all__ = [
    "LabImage", "lab_to_rgb", "rgb_to_gray", "rgb_to_lab",
    "ModelConfig", "RepairModel", "model_from_checkpoint", "tiny_model_config",
    "RepairPipeline", "RepairRequest", "RepairResult",
]

__version__ = "0.1.0"
