"""Attention forecasting from multimodal mobile-interaction sensor streams."""

from ._accel import BACKEND
from .errors import AttnForecastError
from .examples import Task, TaskConfig
from .features import FeatureGroup
from .recording import Recording, load_recording, save_recording

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AttnForecastError", "FeatureGroup", "Recording", "Task", "TaskConfig",
    "load_recording", "save_recording", "__version__",
]
