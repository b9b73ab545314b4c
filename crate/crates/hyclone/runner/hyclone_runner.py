"""hyclone-runner: probe or call one function of a Python fragment.

Reads one JSON request from stdin and writes exactly one JSON response to
stdout, then exits 0.

Request:  {"mode": "probe" | "call", "source": str,
           "entrypoint": str | null, "args": [...] (call only)}
Response: {"status": "probe_ok", "entrypoint": {"name": str, "arity": int}}
          {"status": "ok", "value": <canonical JSON>}
          {"status": "error", "error_kind": str, "error_message": str}
"""

import ast
import io
import json
import math
import os
import sys

_REAL_STDOUT_FD = os.dup(1)
_INT_LIMIT = 2 ** 63


def _emit(obj):
    data = json.dumps(obj, sort_keys=True, allow_nan=False).encode("utf-8")
    os.write(_REAL_STDOUT_FD, data + b"\n")


def _error(kind, message):
    return {"status": "error", "error_kind": kind, "error_message": str(message)[:4000]}


def _canon_float(x):
    if math.isnan(x) or math.isinf(x):
        return {"__repr__": repr(x)}
    return float("%.17g" % x)


def _sort_key(v):
    return json.dumps(v, sort_keys=True)


def canon(v, depth=0):
    if depth > 200:
        return {"__repr__": "<too deep>"}
    if v is None or isinstance(v, bool) or isinstance(v, str):
        return v
    if isinstance(v, int):
        if -_INT_LIMIT <= v < _INT_LIMIT:
            return v
        return {"__repr__": repr(v)}
    if isinstance(v, float):
        return _canon_float(v)
    if isinstance(v, (list, tuple)):
        return [canon(x, depth + 1) for x in v]
    if isinstance(v, (set, frozenset)):
        return sorted((canon(x, depth + 1) for x in v), key=_sort_key)
    if isinstance(v, dict):
        out = {}
        for k, x in v.items():
            ck = k if isinstance(k, str) else _sort_key(canon(k, depth + 1))
            out[ck] = canon(x, depth + 1)
        return dict(sorted(out.items()))
    try:
        return {"__repr__": repr(v)}
    except BaseException:
        return {"__repr__": "<unrepresentable %s>" % type(v).__name__}


def _top_level_functions(source):
    tree = ast.parse(source)
    return [
        node.name
        for node in tree.body
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef))
    ]


def _load(source, entrypoint):
    names = _top_level_functions(source)
    if entrypoint:
        if entrypoint not in names:
            raise LookupError("no top-level function named %r" % entrypoint)
        name = entrypoint
    elif not names:
        raise LookupError("fragment defines no top-level function")
    else:
        name = names[-1]
    namespace = {"__name__": "__fragment__", "__builtins__": __builtins__}
    exec(compile(source, "<fragment>", "exec"), namespace)
    fn = namespace.get(name)
    if not callable(fn):
        raise LookupError("%r is not callable after execution" % name)
    return name, fn


def _arity(fn):
    # look through functools.wraps / lru_cache style wrappers
    seen = 0
    while hasattr(fn, "__wrapped__") and seen < 50:
        fn = fn.__wrapped__
        seen += 1
    code = getattr(fn, "__code__", None)
    if code is None:
        raise LookupError("cannot determine the parameters of %r" % fn)
    positional = code.co_argcount
    defaults = len(fn.__defaults__ or ())
    return positional - defaults


def _handle(raw):
    try:
        req = json.loads(raw)
    except Exception as e:
        return _error("ProtocolError", "request is not JSON: %s" % e)
    if not isinstance(req, dict):
        return _error("ProtocolError", "request must be a JSON object")
    mode = req.get("mode")
    source = req.get("source")
    entrypoint = req.get("entrypoint")
    if mode not in ("probe", "call") or not isinstance(source, str):
        return _error("ProtocolError", "mode must be probe|call and source a string")
    if entrypoint is not None and not isinstance(entrypoint, str):
        return _error("ProtocolError", "entrypoint must be a string or null")
    if mode == "call" and not isinstance(req.get("args"), list):
        return _error("ProtocolError", "call mode requires an args array")
    if mode == "probe" and "args" in req:
        return _error("ProtocolError", "probe mode takes no args")

    try:
        _top_level_functions(source)
    except SyntaxError as e:
        return _error("SyntaxError", e)
    try:
        name, fn = _load(source, entrypoint)
    except LookupError as e:
        return _error("NoEntrypoint", e)
    except BaseException as e:
        return _error(type(e).__name__, e)

    if mode == "probe":
        try:
            arity = _arity(fn)
        except LookupError as e:
            return _error("NoEntrypoint", e)
        return {"status": "probe_ok", "entrypoint": {"name": name, "arity": arity}}
    try:
        result = fn(*req["args"])
    except BaseException as e:
        return _error(type(e).__name__, e)
    try:
        return {"status": "ok", "value": canon(result)}
    except BaseException as e:
        return _error(type(e).__name__, e)


def main():
    # fragment prints must not reach the protocol channel
    sys.stdout = io.StringIO()
    try:
        raw = sys.stdin.buffer.read().decode("utf-8")
    except Exception as e:
        _emit(_error("ProtocolError", "unreadable request: %s" % e))
        return
    try:
        response = _handle(raw)
    except BaseException as e:
        response = _error("ProtocolError", "runner failure: %s: %s" % (type(e).__name__, e))
    try:
        _emit(response)
    except BaseException as e:
        _emit(_error("ProtocolError", "unserializable response: %s" % type(e).__name__))


if __name__ == "__main__":
    main()
    os._exit(0)
