"""Hierarchical temporal memory simulator with interchangeable compute
backends: exact arithmetic, and a hardware-faithful model of resistive
crossbar dot products digitized by spin-neuron SAR/WTA converters, plus
the matching energy accounting."""

__version__ = "0.1.0"

from .backends import ComputeBackend, HardwareBackend, IdealBackend
from .images import Image, quantize_image, scale_image
from .network import HtmNetwork, InferenceResult, infer_network, train_network
from .node import HtmNode, NodeOutput, spatial_similarity
from .scan import ScanParams, TrainingSequence, generate_training_sequence
from .topology import NetworkTopology

__all__ = [
    "ComputeBackend",
    "HardwareBackend",
    "HtmNetwork",
    "HtmNode",
    "IdealBackend",
    "Image",
    "InferenceResult",
    "NetworkTopology",
    "NodeOutput",
    "ScanParams",
    "TrainingSequence",
    "generate_training_sequence",
    "infer_network",
    "quantize_image",
    "scale_image",
    "spatial_similarity",
    "train_network",
    "__version__",
]
