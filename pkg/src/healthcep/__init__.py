"""Real-time complex event processing over ECG and blood-pressure streams."""
from healthcep.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
