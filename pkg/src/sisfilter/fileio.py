"""JSON model documents and CSV outputs.

Model document (all indices 1-based)::

    {
      "S_m": 3,
      "horizon": 50,
      "dims": [{"n_x": 2, "n_u": 1, "n_y": 1, "n_wp": 1, "n_wm": 1}, ...],
      "blocks": [{"A": [[...]], "B": ..., ..., "M": ...}, ...],
      "time_varying": [{"t": 4, "i": 2, "A": [[...]]}, ...]
    }

``dims`` and ``blocks`` may also be a single object applied to every index.
Matrices are row-major arrays of arrays; an omitted matrix is zero.  A
``time_varying`` entry replaces the listed matrices of the base block at
``(t, i)``.  :func:`dump_model` writes the canonical form (lists everywhere,
all nine matrices, entries sorted by ``(t, i)``), and loading a canonical
document then dumping it returns the same document.

CSV files use ``\\n`` line endings and ``repr`` formatting for floats, the
shortest string that round-trips to the same IEEE double, so output is
byte-identical across runs and platforms.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import SISError
from .model import MATRIX_NAMES, ChainModel, SignalDims, SubsystemBlock

DIM_NAMES = ("n_x", "n_u", "n_y", "n_wp", "n_wm")
TRACE_KINDS = ("x", "v_plus", "v_minus", "w_plus", "w_minus", "gamma", "y")


class DocumentError(SISError, ValueError):
    """A JSON document is malformed; ``path`` locates the offending field."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


def fmt(value) -> str:
    return repr(float(value))


# -- model documents ---------------------------------------------------------

def _int(doc, key, path, minimum=None):
    if key not in doc:
        raise DocumentError(path, f"missing required field {key!r}")
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise DocumentError(f"{path}.{key}" if path else key, f"expected integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise DocumentError(f"{path}.{key}" if path else key, f"must be >= {minimum}, got {val}")
    return val


def _matrix(value, path, shape):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError(path, f"not a rectangular numeric array ({exc})") from None
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(shape)
    if arr.ndim != 2:
        raise DocumentError(path, f"expected a 2-D array of arrays, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise DocumentError(path, "non-finite entry")
    return arr


def _block_from_doc(doc, path, dims, base=None):
    if not isinstance(doc, dict):
        raise DocumentError(path, "expected an object of matrices")
    unknown = set(doc) - set(MATRIX_NAMES) - {"t", "i"}
    if unknown:
        raise DocumentError(path, f"unknown field(s) {sorted(unknown)}")
    shapes = dims.shapes()
    mats = {}
    for name in MATRIX_NAMES:
        if name in doc:
            mats[name] = _matrix(doc[name], f"{path}.{name}", shapes[name])
        elif base is not None:
            mats[name] = getattr(base, name)
        else:
            mats[name] = np.zeros(shapes[name])
    return SubsystemBlock(dims=dims, **mats)


def _per_index(doc, key, S_m):
    val = doc.get(key)
    if val is None:
        raise DocumentError("", f"missing required field {key!r}")
    if isinstance(val, dict):
        return [val] * S_m, lambda k: key
    if not isinstance(val, list) or len(val) != S_m:
        raise DocumentError(key, f"expected an object or a list of {S_m} entries")
    return val, lambda k: f"{key}[{k}]"


def model_from_doc(doc) -> ChainModel:
    """Build a :class:`ChainModel` from a parsed model document."""
    if not isinstance(doc, dict):
        raise DocumentError("", "model document must be a JSON object")
    S_m = _int(doc, "S_m", "", minimum=1)
    horizon = _int(doc, "horizon", "", minimum=1)
    dims_docs, dims_path = _per_index(doc, "dims", S_m)
    dims = []
    for k, dd in enumerate(dims_docs):
        path = dims_path(k)
        if not isinstance(dd, dict):
            raise DocumentError(path, "expected an object")
        unknown = set(dd) - set(DIM_NAMES)
        if unknown:
            raise DocumentError(path, f"unknown field(s) {sorted(unknown)}")
        vals = {name: (_int(dd, name, path, minimum=0) if name in dd or name == "n_x" else 0)
                for name in DIM_NAMES}
        dims.append(SignalDims(**vals))
    block_docs, block_path = _per_index(doc, "blocks", S_m)
    blocks = [_block_from_doc(bd, block_path(k), dims[k]) for k, bd in enumerate(block_docs)]
    overrides = {}
    tv = doc.get("time_varying", [])
    if not isinstance(tv, list):
        raise DocumentError("time_varying", "expected a list")
    for k, entry in enumerate(tv):
        path = f"time_varying[{k}]"
        if not isinstance(entry, dict):
            raise DocumentError(path, "expected an object")
        t = _int(entry, "t", path, minimum=1)
        i = _int(entry, "i", path, minimum=1)
        if t > horizon or i > S_m:
            raise DocumentError(path, f"(t={t},i={i}) outside the model range")
        if (t, i) in overrides:
            raise DocumentError(path, f"duplicate entry for (t={t},i={i})")
        overrides[(t, i)] = _block_from_doc(entry, path, dims[i - 1], base=blocks[i - 1])
    unknown = set(doc) - {"S_m", "horizon", "dims", "blocks", "time_varying"}
    if unknown:
        raise DocumentError("", f"unknown field(s) {sorted(unknown)}")
    return ChainModel(blocks, horizon, overrides=overrides)


def _block_to_doc(block):
    return {name: getattr(block, name).tolist() for name in MATRIX_NAMES}


def model_to_doc(model: ChainModel) -> dict:
    if model.rule is not None:
        raise ValueError("rule-based models cannot be serialized; tabulate them first")
    doc = {
        "S_m": model.length,
        "horizon": model.horizon,
        "dims": [{name: int(getattr(d, name)) for name in DIM_NAMES} for d in model.dims],
        "blocks": [_block_to_doc(b) for b in model.base_blocks],
    }
    tv = []
    for (t, i), block in sorted(model.overrides.items()):
        tv.append({"t": t, "i": i, **_block_to_doc(block)})
    if tv:
        doc["time_varying"] = tv
    return doc


def parse_json_text(text, source="<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{source}:{exc.lineno}:{exc.colno}", exc.msg) from None


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DocumentError(str(path), f"cannot read ({exc.strerror})") from None
    return parse_json_text(text, str(path))


def load_model(path) -> ChainModel:
    doc = load_json(path)
    try:
        return model_from_doc(doc)
    except DocumentError as exc:
        raise DocumentError(f"{path}:{exc.path}" if exc.path else str(path), exc.message) from None


def dump_model(model: ChainModel, path):
    Path(path).write_text(json.dumps(model_to_doc(model), indent=1) + "\n")


# -- CSV ---------------------------------------------------------------------

def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_solution_csv(solution, path_or_fh):
    """Debug dump of one interconnection solution."""
    rows = [("t", "i", "signal_name", "component_index", "value")]
    for k in range(solution.length):
        for name in ("v_plus", "v_minus", "w_plus", "w_minus"):
            for c, val in enumerate(getattr(solution, name)[k], start=1):
                rows.append((solution.t, k + 1, name, c, fmt(val)))
    _write_rows(rows, path_or_fh)


def _write_rows(rows, path_or_fh):
    if hasattr(path_or_fh, "write"):
        _writer(path_or_fh).writerows(rows)
        return
    with open(path_or_fh, "w", newline="") as fh:
        _writer(fh).writerows(rows)


def write_trace_csv(trace, path):
    """Trace as ``t,i,kind,component,value`` rows, time-major."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("t", "i", "kind", "component", "value"))
        for t in range(1, trace.horizon + 1):
            for k in range(trace.length):
                for kind in TRACE_KINDS:
                    if kind == "gamma":
                        w.writerow((t, k + 1, kind, 1, fmt(trace.gamma[t - 1, k])))
                        continue
                    for c, val in enumerate(getattr(trace, kind)[k][t - 1], start=1):
                        w.writerow((t, k + 1, kind, c, fmt(val)))


def read_trace_csv(path, model, seed=None, inputs=None):
    """Rebuild a :class:`~sisfilter.sim.Trace` from :func:`write_trace_csv` output.

    ``inputs`` is the per-index ``(horizon, n_u)`` input record (inputs are
    not part of the CSV); zeros when omitted.  Noise samples are not stored,
    so ``trace.d`` is None.
    """
    from .sim import Trace

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "i", "kind", "component", "value"]:
            raise DocumentError(str(path), f"unexpected header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                t, i, kind, c, val = row
                rows.append((int(t), int(i), kind, int(c), float(val)))
            except ValueError:
                raise DocumentError(f"{path}:{lineno}", f"malformed row {row}") from None
    if not rows:
        raise DocumentError(str(path), "no data rows")
    horizon = max(r[0] for r in rows)
    dims = model.dims
    size = {"x": "n_x", "y": "n_y", "v_plus": "n_wp", "w_plus": "n_wp",
            "v_minus": "n_wm", "w_minus": "n_wm"}
    arrays = {kind: [np.zeros((horizon, getattr(d, attr))) for d in dims]
              for kind, attr in size.items()}
    gamma = np.zeros((horizon, model.length), dtype=int)
    for t, i, kind, c, val in rows:
        if not 1 <= i <= model.length or kind not in TRACE_KINDS:
            raise DocumentError(str(path), f"row (t={t},i={i},kind={kind}) does not fit the model")
        if kind == "gamma":
            gamma[t - 1, i - 1] = int(val)
        else:
            arrays[kind][i - 1][t - 1, c - 1] = val
    if inputs is None:
        inputs = [np.zeros((horizon, d.n_u)) for d in dims]
    return Trace(seed, horizon, arrays["x"], inputs, arrays["v_plus"], arrays["v_minus"],
                 arrays["w_plus"], arrays["w_minus"], gamma, arrays["y"])


def write_estimates_csv(run, path, moments=False):
    header = ["t", "i", "component", "x_hat"]
    if moments:
        header += ["S_diag", "T_diag"]
    rows = [header]
    T_end = run.estimates[0].shape[0]
    for t in range(1, T_end + 1):
        for k, est in enumerate(run.estimates):
            for c in range(est.shape[1]):
                row = [t, k + 1, c + 1, fmt(est[t - 1, c])]
                if moments:
                    row += [fmt(run.S_diag[k][t - 1, c]), fmt(run.T_diag[k][t - 1, c])]
                rows.append(row)
    _write_rows(rows, path)


def write_metrics_csv(per_t, aggregate, path, extra=()):
    """``metric,t,value`` rows: per-time MSE, the aggregate, then ``extra`` pairs."""
    rows = [("metric", "t", "value")]
    rows += [("mse", t, fmt(v)) for t, v in enumerate(per_t, start=1)]
    rows.append(("mse_aggregate", "", fmt(aggregate)))
    rows += [(name, "", fmt(val)) for name, val in extra]
    _write_rows(rows, path)


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
