from .app import create_app, serve
from .store import RevisionConflictError, UnknownVideoError, VideoStore

__all__ = [
    "RevisionConflictError",
    "UnknownVideoError",
    "VideoStore",
    "create_app",
    "serve",
]
