"""Feature extraction into the p3dc feature-store binary format."""

__version__ = "0.1.0"

from .backbones import StubBackbone, WideResNetBackbone
from .extract import ExtractJob, extract, load_split_spec

__all__ = [
    "ExtractJob",
    "StubBackbone",
    "WideResNetBackbone",
    "extract",
    "load_split_spec",
    "__version__",
]
