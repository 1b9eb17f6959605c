"""Command-line entry point for the bridge server."""

from __future__ import annotations

import sys

import click

from .backends import BackendError, load_backend
from .server import serve_stdio, serve_tcp


@click.command()
@click.option(
    "--transport",
    type=click.Choice(["stdio", "tcp"]),
    default="stdio",
    help="stdio serves the spawning process; tcp serves long-lived model servers",
)
@click.option(
    "--backend",
    "backend_kind",
    type=click.Choice(["mock", "hf_model"]),
    default="mock",
)
@click.option(
    "--model",
    default=None,
    help="mock: JSON profile path (random profile when omitted); hf_model: model id",
)
@click.option("--length", type=int, default=64, help="profile length for generated mock profiles")
@click.option("--seed", type=int, default=0, help="seed for generated mock profiles")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=7683)
def main(transport, backend_kind, model, length, seed, host, port):
    """Serve an external sequence prior over the newline-JSON wire protocol."""
    try:
        backend = load_backend(backend_kind, model, length, seed)
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        sys.exit(1)
    if transport == "stdio":
        serve_stdio(backend)
    else:
        try:
            serve_tcp(backend, host, port)
        except OSError as exc:
            click.echo(f"bind error: {exc}", err=True)
            sys.exit(1)


if __name__ == "__main__":
    main()
