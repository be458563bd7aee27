"""HTTP bridge exposing masked-LM mask filling and seq2seq parsing."""

__version__ = "0.1.0"

from .config import BridgeConfig, load_config
from .service import create_app

__all__ = ["BridgeConfig", "load_config", "create_app", "__version__"]
