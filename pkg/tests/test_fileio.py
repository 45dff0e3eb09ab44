import json
import math
import pathlib

import numpy as np
import pytest

from modalstab.fileio import (SCHEMA_NAMES, SchemaViolation, dumps_canonical,
                              format_float, matrix_from_doc, matrix_to_doc,
                              read_json, schema_text, validate_document,
                              write_json_atomic, write_sweep_csv,
                              write_text_atomic, write_trajectory_csv)
from modalstab.simulate import Trajectory


def _plant_doc():
    return {"type": "heat", "b": 5.0, "f": {"kind": "constant", "value": 1.0}}


def test_format_float_round_trip(rng):
    for _ in range(200):
        x = float(rng.standard_normal() * 10.0 ** rng.integers(-20, 20))
        assert float(format_float(x)) == x
    assert format_float(1.0) == "1"
    assert format_float(0.1) == "0.10000000000000001"


def test_format_float_non_finite():
    assert format_float(math.nan) == '"nan"'
    assert format_float(math.inf) == '"inf"'
    assert format_float(-math.inf) == '"-inf"'


def test_dumps_canonical_is_deterministic():
    doc = {"a": 1.5, "b": [1.0, 2.0, 3.0], "c": {"x": [[1.0, 0.0], [0.0, 1.0]]},
           "s": "text", "flag": True, "none": None}
    one = dumps_canonical(doc)
    two = dumps_canonical(json.loads(json.dumps(doc)))
    assert one == two
    assert json.loads(one) == doc
    # flat numeric lists stay on one line
    assert "[1, 2, 3]" in one.replace("1.0", "1").replace("\n", " ") or "1, 2, 3" in one


def test_write_json_atomic_round_trip(tmp_path):
    path = tmp_path / "doc.json"
    doc = {"plant": _plant_doc(), "N": 4}
    write_json_atomic(str(path), doc)
    again = read_json(str(path), schema_name="config")
    assert again == {"plant": {"type": "heat", "b": 5.0,
                               "f": {"kind": "constant", "value": 1.0}}, "N": 4}
    write_json_atomic(str(path), {"plant": _plant_doc()})  # atomic overwrite
    assert "N" not in read_json(str(path))


def test_write_text_atomic_leaves_no_partial_file(tmp_path):
    target = tmp_path / "out.txt"
    write_text_atomic(str(target), "alpha\n")
    write_text_atomic(str(target), "beta\n")
    assert target.read_text() == "beta\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_validate_document_accepts_all_plants():
    validate_document(_plant_doc(), "plant")
    validate_document({"type": "wave", "b": 3.0, "kappa": 1.0,
                       "f": {"kind": "cosine", "k0": 1.0}}, "plant")
    validate_document({"type": "heat_boundary", "b": 5.0,
                       "f": {"kind": "indicator", "xi1": 0.0, "xi2": 0.5},
                       "a_grid": [6.0, 7.0]}, "plant")


def test_validate_document_reports_first_error():
    with pytest.raises(SchemaViolation):
        validate_document({"type": "heat"}, "plant")
    with pytest.raises(SchemaViolation):
        validate_document({"type": "heat", "b": 5.0,
                           "f": {"kind": "constant", "value": 1.0},
                           "extra": 1}, "plant")
    with pytest.raises(ValueError):
        validate_document({}, "no_such_schema")


def test_matrix_round_trip(rng):
    M = rng.standard_normal((3, 4))
    doc = matrix_to_doc(M)
    assert matrix_from_doc(doc, rows=3, cols=4).real.tolist() == M.tolist()


def test_matrix_to_doc_rejects_complex_residue():
    with pytest.raises(ValueError):
        matrix_to_doc(np.array([[1.0 + 1e-3j]]))
    out = matrix_to_doc(np.array([[1.0 + 1e-14j]]))
    assert out == [[1.0]]


def test_matrix_from_doc_rejects_bad_shapes():
    with pytest.raises(SchemaViolation):
        matrix_from_doc([[1.0, 2.0], [3.0]])
    with pytest.raises(SchemaViolation):
        matrix_from_doc([[1.0, 2.0]], rows=2, cols=1)


def test_trajectory_csv_layout(tmp_path):
    times = np.array([0.0, 0.5])
    states = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    outputs = np.array([[7.0], [8.0]])
    inputs = np.array([[9.0], [10.0]])
    traj = Trajectory(times, states, outputs, inputs, dt=0.5)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(str(path), traj, n_plant=2)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,x_1,x_2,w_1,u_1,y_1"
    first = lines[1].split(",")
    assert [float(v) for v in first] == [0.0, 1.0, 2.0, 3.0, 9.0, 7.0]
    assert len(lines) == 3


def test_sweep_csv_layout(tmp_path):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(str(path), [(2, 0.5, 3.0, 1.5, "Failed"),
                                (4, 0.1, 3.0, 0.3, "Certified")])
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "N,tail_gain,gain_R,product,verdict"
    assert lines[1].split(",") == ["2", "0.5", "3", "1.5", "Failed"]
    assert lines[2].endswith("Certified")


def test_packaged_schemas_match_docs_copies():
    root = pathlib.Path(__file__).resolve().parents[1]
    src_dir = root / "src" / "modalstab" / "schemas"
    docs_dir = root / "docs" / "schemas"
    names = sorted(p.name for p in src_dir.glob("*.json"))
    assert names == sorted(p.name for p in docs_dir.glob("*.json"))
    assert names == sorted(f"{n}.schema.json" for n in SCHEMA_NAMES)
    for name in names:
        assert (src_dir / name).read_bytes() == (docs_dir / name).read_bytes()


def test_schema_text_is_valid_json():
    for name in SCHEMA_NAMES:
        parsed = json.loads(schema_text(name))
        assert parsed["$id"].endswith(f"{name}.schema.json")
