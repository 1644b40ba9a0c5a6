import json

import pytest

from lbfl.cli import (
    EXIT_CAP,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_USAGE,
    SchemaError,
    instance_from_json,
    instance_to_json,
    main,
    read_instance,
    verify_report,
)
from lbfl.gallery import gen_locality_star, gen_random


def write(tmp_path, doc, name="inst.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture
def random_file(tmp_path):
    return write(tmp_path, instance_to_json(gen_random(2, 6, 14, 3)))


def test_points_format_parses():
    doc = {
        "M": 2,
        "facilities": [{"id": "a", "opening_cost": 1.0}],
        "clients": [{"id": "x"}, {"id": "y"}],
        "points": {"a": [0, 0], "x": [3, 4], "y": [0, 1]},
    }
    inst, fids, cids = instance_from_json(doc)
    assert fids == ["a"] and cids == ["x", "y"]
    assert inst.conn[0].tolist() == [5.0, 1.0]


@pytest.mark.parametrize(
    "patch",
    [
        {"M": 0},
        {"M": "3"},
        {"format": 9},
        {"distances": [[0, 1], [1, 0]]},
        {"facilities": []},
        {"facilities": [{"id": 0, "opening_cost": -1.0}]},
    ],
)
def test_schema_errors(patch):
    doc = instance_to_json(gen_random(0, 1, 3, 2))
    doc.update(patch)
    with pytest.raises(SchemaError):
        instance_from_json(doc)


def test_non_metric_distances_rejected():
    doc = instance_to_json(gen_random(0, 1, 2, 2))
    doc["distances"][1][2] = doc["distances"][2][1] = 100.0
    with pytest.raises(SchemaError, match="metric"):
        instance_from_json(doc)


def test_round_trip(tmp_path):
    inst = gen_random(5, 3, 7, 2)
    back, _, _ = read_instance(write(tmp_path, instance_to_json(inst)))
    assert (back.dist == inst.dist).all() and (back.opening_costs == inst.opening_costs).all()


def test_solve_report_verifies(tmp_path, random_file):
    out = tmp_path / "r.json"
    assert main(["solve", random_file, "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    inst, fids, cids = read_instance(random_file)
    assert verify_report(rep, inst, fids, cids)
    assert rep["tool"] == "lbfl" and rep["command"] == "solve"
    rep["costs"]["total"] += 1.0
    assert not verify_report(rep, inst, fids, cids)


def test_solve_is_byte_identical(tmp_path, random_file):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["solve", random_file, "--seed", "3", "--mode", "random", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_derandomised_no_worse_than_fixed_at_same_gamma(tmp_path):
    path = write(tmp_path, instance_to_json(gen_random(8, 6, 16, 4)))
    costs = {}
    for mode in ("fixed", "derand"):
        out = tmp_path / f"{mode}.json"
        main(["solve", path, "--mode", mode, "--gamma", "0.12", "--out", str(out)])
        costs[mode] = json.loads(out.read_text())["costs"]["total"]
    assert costs["derand"] <= costs["fixed"] + 1e-9


def test_exact_and_cap(tmp_path, random_file):
    out = tmp_path / "e.json"
    assert main(["exact", random_file, "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["subsets_tried"] >= 1
    assert main(["exact", random_file, "--cap", "3"]) == EXIT_CAP


def test_usage_and_missing_files(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["solve", str(tmp_path / "nope.json")]) == EXIT_USAGE
    assert main(["solve", write(tmp_path, {"M": 1})]) == EXIT_USAGE
    assert main(["solve", "x", "--mode", "sideways"]) == EXIT_USAGE


def test_infeasible_exit(tmp_path):
    doc = instance_to_json(gen_random(0, 2, 5, 5))
    doc["M"] = 6
    assert main(["solve", write(tmp_path, doc)]) == EXIT_INFEASIBLE


def test_compare_prints_checks(random_file, capsys):
    assert main(["compare", random_file]) == EXIT_OK
    text = capsys.readouterr().out
    assert "ratio" in text and "FAILS" not in text


def test_gen_writes_loadable_instances(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gen", "star", "--M", "4", "--out", str(out)]) == EXIT_OK
    inst, _, _ = read_instance(str(out))
    assert inst.M == 4 and inst.n_clients == 16
    assert (inst.dist == gen_locality_star(4).instance.dist).all()


@pytest.mark.parametrize(
    "argv,needle",
    [
        (["gapdemo", "star", "--M", "6"], "PASS"),
        (["gapdemo", "cycle", "--k", "4"], "PASS"),
        (["gapdemo", "cdufl", "--f", "10", "--u", "4"], "gap 5"),
    ],
)
def test_gapdemo(argv, needle, capsys):
    assert main(argv) == EXIT_OK
    assert needle in capsys.readouterr().out
