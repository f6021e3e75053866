"""Wire format: one UTF-8 JSON object per line over a TCP stream.

Request::

    {"session": <token or null>, "op": <name>, "args": {...}}

Response::

    {"status": "ok" | "error", "payload": ..., "error_kind": <str or null>,
     "message": <str or null>}
"""

import json

MAX_LINE_BYTES = 64 * 1024 * 1024

# error kinds
UNAUTHORIZED = "unauthorized"
FORBIDDEN_OPERATION = "forbidden_operation"
EXPORT_DISABLED = "export_disabled"
DISCLOSURE_GUARD = "disclosure_guard"
BAD_REQUEST = "bad_request"
NOT_FOUND = "not_found"
INVALID_ARGUMENT = "invalid_argument"
INTERNAL = "internal_error"
UNREACHABLE = "unreachable"
TIMEOUT = "timeout"
PROTOCOL = "protocol_error"


class ProtocolError(ValueError):
    pass


def encode(obj):
    return (json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def decode(line):
    if len(line) > MAX_LINE_BYTES:
        raise ProtocolError("message too large")
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed message: {exc}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("message must be a JSON object")
    return obj


def request(op, args=None, session=None):
    return {"session": session, "op": op, "args": dict(args or {})}


def parse_request(obj):
    if set(obj) - {"session", "op", "args"}:
        raise ProtocolError("unexpected request fields")
    op = obj.get("op")
    if not isinstance(op, str):
        raise ProtocolError("request needs a string 'op'")
    args = obj.get("args", {})
    if args is None:
        args = {}
    if not isinstance(args, dict):
        raise ProtocolError("'args' must be an object")
    session = obj.get("session")
    if session is not None and not isinstance(session, str):
        raise ProtocolError("'session' must be a string or null")
    return session, op, args


def ok(payload):
    return {"status": "ok", "payload": payload, "error_kind": None, "message": None}


def error(kind, message):
    return {"status": "error", "payload": None, "error_kind": kind, "message": str(message)}
