"""Command line entry point for the scoring sidecar."""

import sys

import click

from .backend import SUPPORTED_BACKBONES, make_backend
from .server import serve_socket, serve_stdio


@click.command()
@click.option(
    "--backbone",
    default="ViT-B/16+",
    type=click.Choice(sorted(SUPPORTED_BACKBONES)),
    show_default=True,
    help="Vision backbone for the WinCLIP model.",
)
@click.option("--category", default=None, help="Object category for the prompt set.")
@click.option(
    "--weights",
    default=None,
    type=click.Path(exists=True, dir_okay=False),
    help="Optional checkpoint overriding the pretrained weights.",
)
@click.option("--port", default=None, type=int, help="Serve on this TCP port.")
@click.option("--stdio", is_flag=True, help="Serve over stdin/stdout instead of TCP.")
@click.option(
    "--echo",
    is_flag=True,
    help="Conformance mode: return the channel mean of the input, no model.",
)
@click.option("--host", default="127.0.0.1", show_default=True, help="TCP bind address.")
def main(backbone, category, weights, port, stdio, echo, host):
    """Serve anomaly score maps over the detector wire protocol."""
    if stdio == (port is not None):
        raise click.UsageError("choose exactly one of --stdio or --port")
    try:
        backend = make_backend(echo, backbone, category, weights)
    except (ValueError, ImportError) as exc:
        raise click.ClickException(str(exc))
    if stdio:
        serve_stdio(backend)
    else:
        def announce(bound_port):
            print(f"listening on {host}:{bound_port}", file=sys.stderr, flush=True)

        serve_socket(backend, host, port, ready_callback=announce)


if __name__ == "__main__":
    main()
