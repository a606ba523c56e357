import json
from pathlib import Path

import numpy as np
import pytest

from sisfilter.benchmark import benchmark_model, benchmark_scenario
from sisfilter.config import load_scenario, scenario_from_doc, schedule_from_doc
from sisfilter.fileio import (DocumentError, dump_model, load_model, model_from_doc, model_to_doc,
                              parse_json_text, read_trace_csv, write_trace_csv)
from sisfilter.model import ChainModel, SubsystemBlock
from sisfilter.sim import simulate

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _varying_model():
    base = SubsystemBlock.build(np.eye(2), J=[[1.0, 0.0]], M=[[1.0]], n_wp=1, n_wm=1,
                                G=[[0.1, 0.0], [0.0, 1.0]])
    return ChainModel([base] * 3, 6, overrides={(4, 2): base.replace(A=3 * np.eye(2)),
                                                 (2, 1): base.replace(M=[[2.0]])})


def test_model_round_trip(tmp_path):
    model = _varying_model()
    path = tmp_path / "m.json"
    dump_model(model, path)
    again = load_model(path)
    assert model_to_doc(again) == model_to_doc(model)
    np.testing.assert_array_equal(again.block_at(4, 2).A, 3 * np.eye(2))
    np.testing.assert_array_equal(again.block_at(4, 1).A, np.eye(2))
    # canonical text is a fixed point
    dump_model(again, tmp_path / "m2.json")
    assert (tmp_path / "m2.json").read_text() == path.read_text()


def test_broadcast_dims_and_blocks():
    doc = {"S_m": 2, "horizon": 3, "dims": {"n_x": 1, "n_y": 1},
           "blocks": {"A": [[0.5]], "J": [[1.0]], "M": [[1.0]]}}
    model = model_from_doc(doc)
    assert model.length == 2 and model.block_at(3, 2).A[0, 0] == 0.5
    assert model.block_at(1, 1).C.shape == (1, 0)


@pytest.mark.parametrize("doc,where", [
    ({"horizon": 3, "dims": {"n_x": 1}, "blocks": {}}, "S_m"),
    ({"S_m": 2, "horizon": 3, "dims": [{"n_x": 1}], "blocks": {}}, "dims"),
    ({"S_m": 1, "horizon": 3, "dims": {"n_x": 1, "n_z": 2}, "blocks": {}}, "n_z"),
    ({"S_m": 1, "horizon": 3, "dims": {"n_x": 1}, "blocks": {"A": [[1, 2], [3]]}}, "blocks.A"),
    ({"S_m": 1, "horizon": 3, "dims": {"n_x": 1}, "blocks": {},
      "time_varying": [{"t": 9, "i": 1}]}, "time_varying[0]"),
    ({"S_m": 1, "horizon": 3, "dims": {"n_x": 1}, "blocks": {}, "extra": 1}, "extra"),
])
def test_malformed_model_documents(doc, where):
    with pytest.raises(DocumentError) as info:
        model_from_doc(doc)
    assert where in str(info.value)


def test_json_syntax_error_has_location():
    with pytest.raises(DocumentError, match=r"<string>:2:"):
        parse_json_text('{"S_m": 1,\n "horizon": }')


def test_trace_csv_round_trip(tmp_path):
    trace = simulate(benchmark_scenario(4, horizon=12))
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,i,kind,component,value"
    back = read_trace_csv(path, benchmark_model(12), seed=4)
    for kind in ("x", "v_plus", "v_minus", "w_plus", "w_minus", "y"):
        assert all(np.array_equal(a, b) for a, b in zip(getattr(trace, kind), getattr(back, kind)))
    assert np.array_equal(back.gamma, trace.gamma)
    assert b"\r\n" not in path.read_bytes()


def test_schedule_forms():
    assert schedule_from_doc(0.3, 2).at(5, 2) == 0.3
    assert schedule_from_doc([0.1, 0.9], 2).at(5, 2) == 0.9
    s = schedule_from_doc({"default": 0.5, "per_time": {"2": [0.0, 1.0]}}, 2)
    assert s.at(2, 1) == 0.0 and s.at(3, 1) == 0.5
    with pytest.raises(DocumentError):
        schedule_from_doc([0.1], 2)
    with pytest.raises(DocumentError):
        schedule_from_doc(1.5, 2)


def test_scenario_file_with_referenced_model():
    loaded = load_scenario(SCENARIOS / "benchmark.json")
    assert loaded.model.length == 3 and loaded.scenario.horizon == 100
    assert loaded.scenario.schedule.at(1, 1) == 0.7
    np.testing.assert_array_equal(loaded.filter_second_moment[2], 4 * np.eye(2))


def test_overrides_win_and_extend_horizon():
    loaded = load_scenario(SCENARIOS / "benchmark.json", seed=11, p=0.2, horizon=150)
    assert loaded.scenario.seed == 11 and loaded.scenario.horizon == 150
    assert loaded.model.horizon == 150 and loaded.scenario.schedule.at(9, 3) == 0.2


def test_scenario_rejects_unknown_fields_and_bad_values():
    base = json.loads((SCENARIOS / "scalar.json").read_text())
    with pytest.raises(DocumentError, match="unknown"):
        scenario_from_doc({**base, "colour": 1})
    with pytest.raises(DocumentError, match="seed"):
        scenario_from_doc({**base, "seed": -1})
    with pytest.raises(DocumentError, match="init.cov"):
        scenario_from_doc({**base, "init": {"mean": [0.0], "cov": [[1.0, 0.0]]}})


def test_inputs_broadcast_and_per_time():
    doc = {"model": {"S_m": 2, "horizon": 4, "dims": {"n_x": 1, "n_u": 1},
                     "blocks": {"A": [[0.5]], "C": [[1.0]]}},
           "inputs": {"constant": [1.0], "per_time": {"3": [[2.0], [5.0]]}}}
    scen = scenario_from_doc(doc).scenario
    assert scen.input_at(1, 2).tolist() == [1.0]
    assert scen.input_at(3, 2).tolist() == [5.0]
