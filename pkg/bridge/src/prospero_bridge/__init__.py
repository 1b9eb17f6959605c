"""Reference server for the external sequence-prior wire protocol."""

from .backends import MockProfileBackend, load_backend
from .tokens import TokenMap, UnmappableToken
from .server import serve_stdio, serve_tcp

__version__ = "1.0.0"

__all__ = [
    "MockProfileBackend",
    "TokenMap",
    "UnmappableToken",
    "load_backend",
    "serve_stdio",
    "serve_tcp",
]
