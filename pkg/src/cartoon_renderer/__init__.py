"""Reference-guided photo cartoonization: feature modeling, Soft-AdaIN coordination, rendering."""

from .coordination import Coordinator, GateNetwork, adain, blend_stats, coordinate, gate_weights, soft_adain
from .features import FeatureModel, ModelingNetwork, channel_stats, extract_feature_model, normalize
from .inference import Pipeline, cartoonize, cartoonize_highres, load_pipeline, reconstruct
from .losses import LossReport, LossWeights
from .rendering import RenderingNetwork, render

__version__ = "0.1.0"

__all__ = [
    "Coordinator", "GateNetwork", "adain", "blend_stats", "coordinate", "gate_weights", "soft_adain",
    "FeatureModel", "ModelingNetwork", "channel_stats", "extract_feature_model", "normalize",
    "Pipeline", "cartoonize", "cartoonize_highres", "load_pipeline", "reconstruct",
    "LossReport", "LossWeights", "RenderingNetwork", "render",
]
