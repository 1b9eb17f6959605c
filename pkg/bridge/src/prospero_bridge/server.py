"""Newline-JSON request loop over stdio or TCP.

One JSON object per line, responses in request order. A rejected handshake
answers with an error object and closes the connection; malformed requests
get an error object without dropping the connection.
"""

from __future__ import annotations

import json
import socket
import sys

from .tokens import ALPHABET, MASK_TOKEN

PROTOCOL_VERSION = 1


def _error(message: str) -> dict:
    return {"op": "error", "message": message}


def handle_request(req: dict, backend) -> tuple[dict, bool]:
    """Returns (response, keep_connection)."""
    op = req.get("op")
    if op == "hello":
        if req.get("version") != PROTOCOL_VERSION:
            return _error(f"unsupported protocol version {req.get('version')!r}"), False
        if req.get("alphabet") != ALPHABET:
            return _error("alphabet mismatch"), False
        return {"op": "hello_ok", "model": backend.name}, True
    if op == "logprobs":
        tokens = req.get("tokens")
        position = req.get("position")
        if not isinstance(tokens, list) or not all(
            isinstance(t, int) and (t == MASK_TOKEN or 0 <= t < len(ALPHABET))
            for t in tokens
        ):
            return _error("tokens must be ints in 0..19 or -1"), True
        if not isinstance(position, int) or not 1 <= position <= len(tokens):
            return _error("position must be a 1-based index into tokens"), True
        if tokens[position - 1] != MASK_TOKEN:
            return _error(f"position {position} is not masked"), True
        try:
            backend_tokens = backend.token_map.map_sequence(tokens)
            raw = backend.logprobs(backend_tokens, position - 1)
            values = backend.token_map.renormalize(raw)
        except Exception as exc:  # noqa: BLE001 - report to the client, don't die
            return _error(str(exc)), True
        return {"op": "logprobs_ok", "values": [float(v) for v in values]}, True
    return _error(f"unknown op {op!r}"), True


def serve_lines(reader, writer, backend) -> None:
    for line in reader:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            writer.write(json.dumps(_error("invalid JSON")) + "\n")
            writer.flush()
            return
        if not isinstance(req, dict):
            writer.write(json.dumps(_error("request must be an object")) + "\n")
            writer.flush()
            return
        response, keep = handle_request(req, backend)
        writer.write(json.dumps(response) + "\n")
        writer.flush()
        if not keep:
            return


def serve_stdio(backend) -> None:
    serve_lines(sys.stdin, sys.stdout, backend)


def serve_tcp(backend, host: str, port: int) -> None:
    with socket.create_server((host, port)) as srv:
        while True:
            conn, _addr = srv.accept()
            with conn, conn.makefile("rw", encoding="utf-8", newline="\n") as fh:
                serve_lines(fh, fh, backend)
