import json

import numpy as np
import pytest

from histent import circuits
from histent.errors import InputError
from histent.history import build_history_vector
from histent.io import FIXTURES, load_input, parse_circuit_file, resolve_input, write_schedule

from conftest import random_schedule


def write(tmp_path, doc, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return p


@pytest.mark.parametrize("name", FIXTURES)
def test_bundled_fixtures_resolve(name):
    assert resolve_input(name).is_file()
    parse_circuit_file(name)


def test_entangler_fixture_matches_library():
    a = build_history_vector(parse_circuit_file("entangler.json"))
    b = build_history_vector(circuits.entangler_schedule())
    assert a.histories == b.histories
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-15)


def test_teleportation_parameters():
    hv = build_history_vector(parse_circuit_file("teleportation.json", {"p": 0.36}))
    assert len(hv) == 8
    assert abs(hv.amplitude(("000", "000", "000")) - 0.6 / 2) < 1e-12


def test_explicit_chi(tmp_path):
    doc = {
        "qubits": 3,
        "initial": ["chi:0.6,0,0,0.8", "bell:00"],
        "steps": [{"unitary": None}, {"unitary": "CNOT 0 1"}, {"unitary": "H 0"}],
    }
    hv = build_history_vector(parse_circuit_file(write(tmp_path, doc)))
    assert abs(hv.amplitude(("100", "110", "010")) - 0.4j) < 1e-12


def test_incomplete_family_names_time(tmp_path):
    doc = {
        "dim": 2,
        "initial": {"amplitudes": [1, 0]},
        "steps": [
            {"measure": "computational"},
            {"measure": [{"label": "0", "projector": [[1, 0], [0, 0]]}]},
        ],
    }
    with pytest.raises(InputError, match="t2"):
        parse_circuit_file(write(tmp_path, doc))


def test_non_unitary_names_step(tmp_path):
    doc = {"dim": 2, "initial": {"amplitudes": [1, 0]}, "steps": [{"unitary": {"matrix": [[1, 1], [0, 1]]}}]}
    with pytest.raises(InputError, match="t1"):
        parse_circuit_file(write(tmp_path, doc))


def test_syntax_error_has_position(tmp_path):
    with pytest.raises(InputError, match="line 2"):
        load_input(write(tmp_path, '{"qubits": 1,\n "steps": [}'))


@pytest.mark.parametrize(
    "doc",
    [
        {"initial": "basis:0", "steps": []},
        {"qubits": 1, "initial": "basis:01", "steps": [{}]},
        {"qubits": 1, "initial": "basis:0"},
        {"qubits": 1, "initial": "bogus:0", "steps": [{}]},
        {"qubits": 2, "initial": "basis:00", "steps": [{"unitary": "CNOT 0 5"}]},
        {"dim": 4, "factor_dims": [3, 2], "initial": {"amplitudes": [1, 0, 0, 0]}, "steps": [{}]},
        {"qubits": 1, "initial": "chi:q", "steps": [{}]},
    ],
)
def test_schema_errors(tmp_path, doc):
    with pytest.raises(InputError):
        parse_circuit_file(write(tmp_path, doc))


def test_missing_file():
    with pytest.raises(InputError):
        load_input("/nonexistent/file.json")


def test_round_trip(tmp_path, rng):
    for k in range(5):
        s = random_schedule(rng, n=3)
        path = tmp_path / f"s{k}.json"
        write_schedule(s, path)
        a = build_history_vector(s)
        b = build_history_vector(parse_circuit_file(path))
        assert a.histories == b.histories
        assert np.max(np.abs(a.amplitudes - b.amplitudes)) <= 1e-15


def test_round_trip_keeps_factorization(tmp_path):
    s = circuits.teleportation_schedule(0.6, 0.8)
    path = tmp_path / "t.json"
    write_schedule(s, path)
    cf = load_input(path)
    assert cf.factorization.factor_dims == (2, 2, 2)
    assert cf.partition().a == (0, 1)
