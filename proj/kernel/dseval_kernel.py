# Execution kernel driven by the dseval C++ runtime.
#
# Protocol: one JSON request per line on stdin, one JSON response per line on
# the protocol stream (the process's original stdout). User code output is
# captured and never reaches the protocol stream.

import ast
import base64
import contextlib
import copy
import hashlib
import io
import json
import math
import os
import pickle
import signal
import sys
import time
import traceback
import types

try:
    from joblib.externals import cloudpickle as _pickler
except Exception:  # pragma: no cover
    try:
        import cloudpickle as _pickler
    except Exception:
        _pickler = pickle

_proto = os.fdopen(os.dup(1), "w", buffering=1, encoding="utf-8")
os.dup2(2, 1)
sys.stdout = sys.__stdout__ = io.TextIOWrapper(os.fdopen(1, "wb", buffering=0), write_through=True)

INT64_MAX = 2**63 - 1
INT64_MIN = -(2**63)


class KernelTimeout(BaseException):
    pass


def _on_alarm(signum, frame):
    raise KernelTimeout()


signal.signal(signal.SIGALRM, _on_alarm)


def _new_namespace():
    ns = {"__name__": "__main__", "__builtins__": __builtins__}
    return ns


NS = _new_namespace()


def _user_names(ns):
    out = []
    for name, value in ns.items():
        if name.startswith("_"):
            continue
        if isinstance(value, types.ModuleType):
            continue
        out.append(name)
    return sorted(out)


# ---------------------------------------------------------------- value export


def _qualname(tp):
    module = getattr(tp, "__module__", "") or ""
    name = getattr(tp, "__qualname__", getattr(tp, "__name__", str(tp)))
    if module in ("builtins", ""):
        return name
    top = module.split(".")[0]
    top_mod = sys.modules.get(top)
    if top_mod is not None and getattr(top_mod, name, None) is tp:
        return top + "." + name
    return module + "." + name


def _pd():
    return sys.modules.get("pandas")


def _np():
    return sys.modules.get("numpy")


def _num(x):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return {"inf": 1 if x > 0 else -1}
    return x


def _cell(x):
    np = _np()
    pd = _pd()
    if x is None:
        return None
    if isinstance(x, bool) or (np is not None and isinstance(x, np.bool_)):
        return bool(x)
    if isinstance(x, int) or (np is not None and isinstance(x, np.integer)):
        x = int(x)
        if INT64_MIN <= x <= INT64_MAX:
            return x
        return {"s": str(x)}
    if isinstance(x, float) or (np is not None and isinstance(x, np.floating)):
        return _num(float(x))
    if isinstance(x, str):
        return x
    if isinstance(x, tuple):
        return {"tuple": [_cell(y) for y in x]}
    if pd is not None:
        try:
            if x is pd.NaT or x is pd.NA:
                return None
        except Exception:
            pass
    return {"s": str(x)}


def _code_key(code):
    consts = tuple(_code_key(c) if isinstance(c, types.CodeType) else repr(c) for c in code.co_consts)
    return (code.co_name, code.co_code, consts, code.co_names, code.co_varnames, code.co_freevars)


def _digest(value):
    try:
        if isinstance(value, types.FunctionType):
            payload = repr((_code_key(value.__code__), repr(value.__defaults__))).encode()
        elif isinstance(value, type):
            payload = _qualname(value).encode()
        else:
            payload = _pickler.dumps(value, protocol=4)
        return hashlib.sha256(payload).hexdigest()
    except Exception:
        return None


def _index(idx, limit):
    labels = idx[:limit] if limit is not None else idx
    return {
        "names": [None if n is None else str(n) for n in idx.names],
        "values": [_cell(v) for v in labels],
    }


def _dtype_str(dt):
    return str(dt)


def _nunique(obj):
    try:
        return int(obj.nunique(dropna=False))
    except Exception:
        return -1


def encode(value, limit=None, depth=0, top=True):
    np = _np()
    pd = _pd()
    out = None
    if value is None:
        out = {"t": "none"}
    elif isinstance(value, bool) or (np is not None and isinstance(value, np.bool_)):
        out = {"t": "bool", "v": bool(value)}
    elif isinstance(value, int) or (np is not None and isinstance(value, np.integer)):
        iv = int(value)
        if INT64_MIN <= iv <= INT64_MAX:
            out = {"t": "int", "v": iv}
        else:
            out = {"t": "float", "v": _num(float(iv))}
    elif isinstance(value, float) or (np is not None and isinstance(value, np.floating)):
        out = {"t": "float", "v": _num(float(value))}
    elif isinstance(value, str):
        out = {"t": "str", "v": value}
    elif depth < 8 and isinstance(value, (list, tuple)):
        kind = "list" if isinstance(value, list) else "tuple"
        out = {"t": kind, "items": [encode(v, limit, depth + 1, False) for v in value]}
    elif depth < 8 and isinstance(value, (set, frozenset)):
        items = [encode(v, limit, depth + 1, False) for v in value]
        items.sort(key=lambda e: json.dumps(e, sort_keys=True))
        out = {"t": "set", "items": items}
    elif depth < 8 and isinstance(value, dict):
        out = {
            "t": "dict",
            "items": [[encode(k, limit, depth + 1, False), encode(v, limit, depth + 1, False)] for k, v in value.items()],
        }
    elif np is not None and isinstance(value, np.ndarray):
        flat = value.reshape(-1)
        if limit is not None:
            flat = flat[:limit]
        out = {
            "t": "array",
            "dtype": _dtype_str(value.dtype),
            "shape": list(value.shape),
            "data": [_cell(x) for x in flat.tolist()],
        }
    elif pd is not None and isinstance(value, pd.DataFrame):
        rows = value.shape[0]
        head = value if limit is None else value.iloc[:limit]
        out = {
            "t": "table",
            "columns": [str(c) for c in value.columns],
            "dtypes": [_dtype_str(d) for d in value.dtypes],
            "index": _index(value.index, limit),
            "rows": rows,
            "data": [[_cell(x) for x in head.iloc[:, i].tolist()] for i in range(value.shape[1])],
            "nunique": [_nunique(value.iloc[:, i]) for i in range(value.shape[1])],
        }
    elif pd is not None and isinstance(value, pd.Series):
        head = value if limit is None else value.iloc[:limit]
        out = {
            "t": "series",
            "name": None if value.name is None else str(value.name),
            "dtype": _dtype_str(value.dtype),
            "index": _index(value.index, limit),
            "rows": int(value.shape[0]),
            "data": [_cell(x) for x in head.tolist()],
            "nunique": _nunique(value),
        }
    elif pd is not None and isinstance(value, pd.Index):
        labels = value if limit is None else value[:limit]
        out = {
            "t": "array",
            "dtype": _dtype_str(value.dtype),
            "shape": [len(value)],
            "data": [_cell(x) for x in labels.tolist()],
        }
    else:
        try:
            text = str(value)
        except Exception:
            text = "<unprintable>"
        out = {"t": "object", "text": text[:2000], "digest": _digest(value)}
    out["type"] = _qualname(type(value))
    if top:
        try:
            out["repr"] = str(value)
        except Exception:
            out["repr"] = ""
    return out


# ---------------------------------------------------------------- syntax trees


def _tree(node, receivers=False):
    if isinstance(node, ast.AST):
        out = {"_type": type(node).__name__}
        if receivers and isinstance(node, (ast.Attribute, ast.Subscript)):
            try:
                out["_recv"] = ast.unparse(node.value)
            except Exception:
                out["_recv"] = None
        for base in ("expr", "stmt", "expr_context", "comprehension", "arguments", "keyword", "alias", "excepthandler"):
            if isinstance(node, getattr(ast, base)):
                out["_base"] = base
                break
        for field, value in ast.iter_fields(node):
            if field == "ctx":
                out[field] = type(value).__name__
            else:
                out[field] = _tree(value, receivers)
        return out
    if isinstance(node, list):
        return [_tree(n, receivers) for n in node]
    if isinstance(node, (str, int, float, bool)) or node is None:
        if isinstance(node, float) and (math.isnan(node) or math.isinf(node)):
            return str(node)
        return node
    return repr(node)


def _error(exc, tb_text=""):
    name = type(exc).__name__
    kinds = {
        "ModuleNotFoundError": "module-not-found",
        "AttributeError": "attribute",
        "KeyError": "key",
        "NameError": "name",
        "UnboundLocalError": "name",
        "TypeError": "type",
        "ValueError": "value",
        "SyntaxError": "syntax",
        "IndentationError": "syntax",
        "TabError": "syntax",
    }
    kind = kinds.get(name, "other")
    return {"kind": kind, "ename": name, "message": str(exc), "traceback": tb_text}


# ---------------------------------------------------------------- execution


def _checkpoint(ns):
    saved = {}
    exact = True
    for name, value in ns.items():
        if name == "__builtins__" or isinstance(value, types.ModuleType):
            saved[name] = value
            continue
        try:
            saved[name] = copy.deepcopy(value)
        except Exception:
            saved[name] = value
            exact = False
    return saved, exact


def _run(code, timeout):
    global NS
    stream = io.StringIO()
    started = time.monotonic()
    result = None
    error = None
    rolled_back = False
    try:
        tree = ast.parse(code, mode="exec")
    except SyntaxError as exc:
        return {
            "result": None,
            "stream": "",
            "error": _error(exc, "".join(traceback.format_exception_only(type(exc), exc))),
            "duration": time.monotonic() - started,
            "rolled_back": False,
        }
    last_expr = None
    if tree.body and isinstance(tree.body[-1], ast.Expr):
        last_expr = ast.Expression(tree.body.pop().value)
    saved = _checkpoint(NS) if timeout else None
    if timeout:
        # The host starts its hard deadline from here.
        _proto.write('{"armed": true}\n')
        _proto.flush()
    value = None
    try:
        with contextlib.redirect_stdout(stream):
            if timeout:
                signal.setitimer(signal.ITIMER_REAL, float(timeout))
            try:
                exec(compile(tree, "<cell>", "exec"), NS)
                if last_expr is not None:
                    value = eval(compile(last_expr, "<cell>", "eval"), NS)
            finally:
                signal.setitimer(signal.ITIMER_REAL, 0)
    except KernelTimeout:
        error = {"kind": "timeout", "ename": "TimeoutError", "message": "execution exceeded %.3fs" % timeout, "traceback": ""}
        if saved is not None:
            NS.clear()
            NS.update(saved[0])
            rolled_back = True
    except BaseException as exc:  # noqa: B902 - user code may raise anything
        tb = traceback.format_exception(type(exc), exc, exc.__traceback__)
        error = _error(exc, "".join(tb[1:]) if len(tb) > 1 else "".join(tb))
    if error is None and value is not None:
        try:
            result = encode(value)
        except Exception as exc:
            result = {"t": "object", "type": _qualname(type(value)), "text": "<unencodable: %s>" % exc, "repr": ""}
    return {
        "result": result,
        "stream": stream.getvalue(),
        "error": error,
        "duration": time.monotonic() - started,
        "rolled_back": rolled_back,
    }


def _eval(expr, ns=None):
    return eval(compile(expr, "<expr>", "eval"), NS if ns is None else ns)


# ---------------------------------------------------------------- snapshots


def _snapshot():
    names = [n for n in NS if n != "__builtins__"]
    state = {n: NS[n] for n in names}
    try:
        blob = _pickler.dumps(state, protocol=4)
        return {"blob": base64.b64encode(blob).decode(), "unpicklable": []}
    except Exception:
        pass
    ok = {}
    bad = []
    for n in names:
        try:
            _pickler.dumps(NS[n], protocol=4)
            ok[n] = NS[n]
        except Exception:
            bad.append(n)
    blob = _pickler.dumps(ok, protocol=4)
    return {"blob": base64.b64encode(blob).decode(), "unpicklable": sorted(bad)}


def _restore(blob):
    global NS
    state = pickle.loads(base64.b64decode(blob))
    NS = _new_namespace()
    NS.update(state)
    NS["__builtins__"] = __builtins__


# ---------------------------------------------------------------- validators support


def _call_test(function, inputs, validator):
    if function not in NS or not callable(NS[function]):
        return {"missing": True}
    try:
        args = [_eval(e) for e in inputs]
    except BaseException as exc:
        return {"invalid": "input expression failed: %s: %s" % (type(exc).__name__, exc)}
    if validator:
        scope = dict(NS)
        try:
            exec(compile(validator, "<input_validator>", "exec"), scope)
            checks = [v for k, v in scope.items() if k.startswith("_validate") and callable(v)]
            for check in checks:
                check(*copy.deepcopy(args))
        except BaseException as exc:
            return {"invalid": "input validator rejected case: %s: %s" % (type(exc).__name__, exc)}
    stream = io.StringIO()
    try:
        with contextlib.redirect_stdout(stream):
            out = NS[function](*copy.deepcopy(args))
    except BaseException as exc:
        tb = traceback.format_exception(type(exc), exc, exc.__traceback__)
        return {"error": _error(exc, "".join(tb))}
    return {"output": encode(out)}


_METRICS = {
    "accuracy": ("accuracy_score", False),
    "precision": ("precision_score", False),
    "recall": ("recall_score", False),
    "f1": ("f1_score", False),
    "roc_auc": ("roc_auc_score", False),
    "r2": ("r2_score", False),
    "mse": ("mean_squared_error", True),
    "rmse": ("mean_squared_error", True),
    "mae": ("mean_absolute_error", True),
}


def _score_model(model, x_name, y_name, metric, blob=None):
    import sklearn.metrics as skm

    est = pickle.loads(base64.b64decode(blob))[model] if blob else NS[model]
    X = NS[x_name]
    y = NS[y_name]
    if metric in (None, "", "score"):
        return float(est.score(X, y)), False
    name, lower = _METRICS[metric]
    value = float(getattr(skm, name)(y, est.predict(X)))
    if metric == "rmse":
        value = value ** 0.5
    return value, lower


def _dump(names):
    return base64.b64encode(_pickler.dumps({n: NS[n] for n in names if n in NS}, protocol=4)).decode()


def _typeof(expr):
    value = _eval(expr)
    if isinstance(value, types.ModuleType):
        return {"module": value.__name__}
    if isinstance(value, (types.FunctionType, types.BuiltinFunctionType, type)):
        mod = getattr(value, "__module__", None) or ""
        return {"callable": (mod.split(".")[0] + "." if mod and mod not in ("builtins", "__main__") else "") + getattr(value, "__qualname__", getattr(value, "__name__", "?")), "user": mod == "__main__"}
    return {"type": _qualname(type(value))}


# ---------------------------------------------------------------- dispatch


def handle(req):
    global NS
    op = req.get("op")
    if op == "ping":
        return {"ok": True, "pid": os.getpid()}
    if op == "parse":
        try:
            tree = ast.parse(req["code"], mode="exec")
        except SyntaxError as exc:
            return {"ok": False, "error": dict(_error(exc, ""), line=exc.lineno or 0)}
        return {"ok": True, "tree": _tree(tree, bool(req.get("receivers")))}
    if op == "execute":
        return dict(ok=True, **_run(req["code"], req.get("timeout")))
    if op == "names":
        return {"ok": True, "names": _user_names(NS)}
    if op == "export":
        names = req.get("names")
        if names is None:
            names = _user_names(NS)
        limit = req.get("limit")
        values = {}
        missing = []
        for n in names:
            if n in NS:
                values[n] = encode(NS[n], limit)
            else:
                missing.append(n)
        return {"ok": True, "values": values, "missing": missing}
    if op == "snapshot":
        return dict(ok=True, **_snapshot())
    if op == "restore":
        _restore(req["blob"])
        return {"ok": True}
    if op == "reset":
        NS = _new_namespace()
        return {"ok": True}
    if op == "eval":
        try:
            return {"ok": True, "value": encode(_eval(req["expr"]))}
        except BaseException as exc:
            return {"ok": False, "error": _error(exc, "")}
    if op == "typeof":
        try:
            return dict(ok=True, **_typeof(req["expr"]))
        except BaseException as exc:
            return {"ok": False, "error": _error(exc, "")}
    if op == "call_test":
        return dict(ok=True, **_call_test(req["function"], req["inputs"], req.get("input_validator")))
    if op == "dump":
        try:
            return {"ok": True, "blob": _dump(req["names"])}
        except BaseException as exc:
            return {"ok": False, "error": _error(exc, "")}
    if op == "score_model":
        try:
            score, lower = _score_model(req["model"], req["x"], req["y"], req.get("metric"), req.get("blob"))
            return {"ok": True, "score": score, "lower_is_better": lower}
        except BaseException as exc:
            return {"ok": False, "error": _error(exc, traceback.format_exc())}
    return {"ok": False, "error": {"kind": "other", "ename": "ProtocolError", "message": "unknown op %r" % op, "traceback": ""}}


def main():
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            resp = handle(req)
        except BaseException as exc:  # noqa: B902
            resp = {"ok": False, "error": {"kind": "other", "ename": type(exc).__name__, "message": str(exc), "traceback": traceback.format_exc()}}
        _proto.write(json.dumps(resp, allow_nan=False, default=str) + "\n")
        _proto.flush()


if __name__ == "__main__":
    main()
