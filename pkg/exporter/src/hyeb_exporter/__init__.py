"""Image-folder to HYEB dataset exporter."""

from .encoders import ClipEncoder, Encoder, PixelStatsEncoder, make_encoder
from .export import ExportSpec, export, merge

__version__ = "0.1.0"
