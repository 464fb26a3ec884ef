"""Stdio wire-protocol adapter exposing an LLM endpoint as a schedloop agent."""

from .adapter import (
    AdapterConfig,
    EndpointError,
    FixtureEndpoint,
    HttpEndpoint,
    build_endpoint,
    handle_record,
    main,
    serve_stdio,
)

__all__ = [
    "AdapterConfig",
    "EndpointError",
    "FixtureEndpoint",
    "HttpEndpoint",
    "build_endpoint",
    "handle_record",
    "main",
    "serve_stdio",
]

__version__ = "0.1.0"
