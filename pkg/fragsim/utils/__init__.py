"""Utils package"""
from .logger import logger, setup_logger
from .config_loader import APP_DEFAULTS, ConfigLoader

__all__ = ["logger", "setup_logger", "ConfigLoader", "APP_DEFAULTS"]
