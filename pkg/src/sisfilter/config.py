"""Scenario configuration documents.

A scenario is one JSON object::

    {
      "model": {...} | "model_file": "chain.json",
      "horizon": 100,
      "seed": 7,
      "p": 0.7 | [p_1, ..., p_Sm] | {"default": 0.7, "per_index": [...], "per_time": {"3": [...]}},
      "init": {"mean": ..., "cov": ...} | {"fixed": ...},
      "inputs": {"constant": ..., "per_time": {"5": [...]}},
      "filter": {"initial_mean": ..., "second_moment": ...}
    }

Per-index vectors and matrices may be given once and broadcast to every
subsystem.  ``model_file`` is resolved relative to the scenario file.  When
``filter`` is omitted the filter starts from the initial mean with
``S = T = cov + mean mean'``.  Command-line overrides (seed, p, horizon) are
applied on top of the document.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import SISError
from .fileio import DocumentError, load_json, model_from_doc, model_to_doc
from .model import ChainModel
from .nahi import DropoutSchedule
from .sim import InitialCondition, Scenario

SCENARIO_KEYS = {"model", "model_file", "horizon", "seed", "p", "init", "inputs", "filter"}


@dataclass
class LoadedScenario:
    scenario: Scenario
    filter_mean: list
    filter_second_moment: list
    doc: dict

    @property
    def model(self) -> ChainModel:
        return self.scenario.model


def _depth(value):
    depth = 0
    while isinstance(value, list) and value:
        depth += 1
        value = value[0]
    return depth


def _per_index_arrays(value, path, S_m, shapes):
    """Broadcast a single vector/matrix or accept one per index."""
    base_depth = len(shapes[0])
    if _depth(value) > base_depth:
        if len(value) != S_m:
            raise DocumentError(path, f"expected {S_m} per-index entries, got {len(value)}")
        items = value
    else:
        items = [value] * S_m
    out = []
    for k, (item, shape) in enumerate(zip(items, shapes)):
        try:
            arr = np.array(item, dtype=float)
        except (TypeError, ValueError):
            raise DocumentError(f"{path}[{k}]", "not a numeric array") from None
        if arr.size != int(np.prod(shape)):
            raise DocumentError(f"{path}[{k}]", f"expected shape {shape}, got {arr.shape}")
        out.append(arr.reshape(shape))
    return out


def schedule_from_doc(value, S_m, path="p") -> DropoutSchedule:
    try:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return DropoutSchedule(float(value))
        if isinstance(value, list):
            if len(value) != S_m:
                raise DocumentError(path, f"expected {S_m} per-index probabilities")
            return DropoutSchedule(1.0, per_index=value)
        if isinstance(value, dict):
            unknown = set(value) - {"default", "per_index", "per_time"}
            if unknown:
                raise DocumentError(path, f"unknown field(s) {sorted(unknown)}")
            per_time = value.get("per_time") or {}
            for t, row in per_time.items():
                if not isinstance(row, list) or len(row) != S_m:
                    raise DocumentError(f"{path}.per_time.{t}", f"expected {S_m} probabilities")
            per_index = value.get("per_index")
            if per_index is not None and len(per_index) != S_m:
                raise DocumentError(f"{path}.per_index", f"expected {S_m} probabilities")
            return DropoutSchedule(value.get("default", 1.0), per_index=per_index,
                                   per_time={int(t): row for t, row in per_time.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DocumentError):
            raise
        raise DocumentError(path, str(exc)) from None
    raise DocumentError(path, "expected a number, a list or an object")


def _inputs_from_doc(value, model: ChainModel):
    if value is None:
        return None, None
    if not isinstance(value, dict):
        raise DocumentError("inputs", "expected an object")
    unknown = set(value) - {"constant", "per_time"}
    if unknown:
        raise DocumentError("inputs", f"unknown field(s) {sorted(unknown)}")
    S_m = model.length
    shapes = [(d.n_u,) for d in model.dims]
    const = [np.zeros(s) for s in shapes]
    if "constant" in value:
        const = _per_index_arrays(value["constant"], "inputs.constant", S_m, shapes)
    table = {}
    for t, row in (value.get("per_time") or {}).items():
        table[int(t)] = _per_index_arrays(row, f"inputs.per_time.{t}", S_m, shapes)

    def inputs(t, i):
        row = table.get(t)
        return (row if row is not None else const)[i - 1]

    return inputs, value


def scenario_from_doc(doc, base_dir=Path("."), seed=None, p=None, horizon=None) -> LoadedScenario:
    """Build a scenario from a parsed document plus command-line overrides."""
    if not isinstance(doc, dict):
        raise DocumentError("", "scenario must be a JSON object")
    unknown = set(doc) - SCENARIO_KEYS
    if unknown:
        raise DocumentError("", f"unknown field(s) {sorted(unknown)}")
    if "model" in doc:
        model = model_from_doc(doc["model"])
    elif "model_file" in doc:
        mpath = Path(base_dir) / doc["model_file"]
        try:
            model = model_from_doc(load_json(mpath))
        except DocumentError as exc:
            raise DocumentError(f"{mpath}:{exc.path}", exc.message) from None
    else:
        raise DocumentError("", "need either 'model' or 'model_file'")

    S_m = model.length
    h = doc.get("horizon", model.horizon) if horizon is None else horizon
    if isinstance(h, bool) or not isinstance(h, int) or h < 1:
        raise DocumentError("horizon", f"expected a positive integer, got {h!r}")
    if h > model.horizon:
        if not model.time_invariant:
            raise DocumentError("horizon", f"{h} exceeds the model horizon {model.horizon}")
        model = model.with_horizon(h)

    s = doc.get("seed", 0) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int) or s < 0:
        raise DocumentError("seed", f"expected a non-negative integer, got {s!r}")

    schedule = schedule_from_doc(doc.get("p", 1.0) if p is None else p, S_m)

    vec_shapes = [(d.n_x,) for d in model.dims]
    mat_shapes = [(d.n_x, d.n_x) for d in model.dims]
    init_doc = doc.get("init", {"fixed": [[0.0] * s[0] for s in vec_shapes]})
    if not isinstance(init_doc, dict):
        raise DocumentError("init", "expected an object")
    if "fixed" in init_doc:
        init = InitialCondition.fixed(_per_index_arrays(init_doc["fixed"], "init.fixed", S_m, vec_shapes))
    else:
        mean = ([np.zeros(s) for s in vec_shapes] if "mean" not in init_doc else
                _per_index_arrays(init_doc["mean"], "init.mean", S_m, vec_shapes))
        if "cov" not in init_doc:
            raise DocumentError("init", "need 'fixed' or 'cov'")
        cov = _per_index_arrays(init_doc["cov"], "init.cov", S_m, mat_shapes)
        init = InitialCondition.gaussian(mean, cov)

    inputs, inputs_doc = _inputs_from_doc(doc.get("inputs"), model)

    fdoc = doc.get("filter", {})
    if not isinstance(fdoc, dict):
        raise DocumentError("filter", "expected an object")
    fmean = (list(init.mean) if "initial_mean" not in fdoc else
             _per_index_arrays(fdoc["initial_mean"], "filter.initial_mean", S_m, vec_shapes))
    fmom = (init.second_moment() if "second_moment" not in fdoc else
            _per_index_arrays(fdoc["second_moment"], "filter.second_moment", S_m, mat_shapes))

    try:
        scenario = Scenario(model, h, schedule, s, init, inputs)
    except SISError as exc:
        raise DocumentError("", str(exc)) from None

    resolved = {
        "model": model_to_doc(model) if model.rule is None else None,
        "horizon": h,
        "seed": s,
        "p": schedule.to_config(),
        "init": ({"fixed": [m.tolist() for m in init.mean]} if init.cov is None else
                 {"mean": [m.tolist() for m in init.mean], "cov": [c.tolist() for c in init.cov]}),
        "filter": {"initial_mean": [np.asarray(m).tolist() for m in fmean],
                   "second_moment": [np.asarray(P).tolist() for P in fmom]},
    }
    if inputs_doc is not None:
        resolved["inputs"] = inputs_doc
    return LoadedScenario(scenario, fmean, fmom, resolved)


def load_scenario(path, seed=None, p=None, horizon=None) -> LoadedScenario:
    path = Path(path)
    doc = load_json(path)
    try:
        return scenario_from_doc(doc, path.parent, seed=seed, p=p, horizon=horizon)
    except DocumentError as exc:
        raise DocumentError(f"{path}:{exc.path}" if exc.path else str(path), exc.message) from None


def is_model_document(doc) -> bool:
    return isinstance(doc, dict) and "S_m" in doc
