"""HTTP service exposing a transformer's last-token attention rows."""

from .app import create_app
from .service import ShimConfig, ShimRequestError, ShimService, load_service

__all__ = [
    "ShimConfig",
    "ShimRequestError",
    "ShimService",
    "create_app",
    "load_service",
]
