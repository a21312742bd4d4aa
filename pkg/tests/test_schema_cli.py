import io
import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weaksim import __version__
from weaksim import cli
from weaksim import instances as I
from weaksim.core import Estimate, SchemaError
from weaksim.schema import DRIVER_ALIASES, dumps, normalise, parse_plan, state_from_dict

DATA = I.fixture_dir()
FIXTURES = sorted(DATA.glob("*.json"))
FAST = ["--eps", "0.1", "--delta", "0.01"]


def run(*argv):
    buf = io.StringIO()
    code = cli.main([str(a) for a in argv], stdout=buf)
    return code, [json.loads(line) for line in buf.getvalue().splitlines() if line.strip()]


def test_bundled_fixtures_are_current(tmp_path):
    written = I.write_fixtures(tmp_path)
    assert sorted(p.name for p in written) == [p.name for p in FIXTURES]
    for p in written:
        assert p.read_text() == (DATA / p.name).read_text()


@pytest.mark.parametrize("path", FIXTURES, ids=lambda p: p.stem)
def test_fixture_round_trip(path):
    code, recs = run("check", path)
    assert code == 0 and recs[0]["round_trip"]


def test_schema_errors():
    with pytest.raises(SchemaError):
        normalise({"kind": "nonsense"})
    with pytest.raises(SchemaError):
        state_from_dict({"kind": "product", "factors": [[1, 0], [1]]})
    with pytest.raises(SchemaError):
        parse_plan({"kind": "plan", "driver": "unknown", "n": 2})


def test_old_driver_name_is_accepted():
    doc = json.loads((DATA / "plan_dj6.json").read_text())
    doc["driver"] = next(iter(DRIVER_ALIASES))
    assert parse_plan(doc)["driver"] == DRIVER_ALIASES[doc["driver"]]


def test_dumps_is_canonical():
    assert dumps({"b": 1, "a": [0.5, 2]}) == dumps({"a": [0.5, 2], "b": 1})


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("check", bad)[0] == 2
    assert run("check", tmp_path / "missing.json")[0] == 2
    code, recs = run("simulate", DATA / "plan_out_of_class8.json")
    assert code == 3 and recs[-1]["error"] == "OutOfClass"
    assert run("simulate", DATA / "plan_dj6.json", "--eps", "2")[0] == 4
    assert run("estimate", "overlap", DATA / "product_plus6.json")[0] == 2


def test_verification_failure_exit_code(monkeypatch):
    monkeypatch.setattr(cli, "run_plan", lambda doc, budget, stream, workers=1: Estimate(0.5, 0.1, 0.01, 1))
    code, recs = run("simulate", DATA / "plan_dj6.json", "--verify", *FAST)
    assert code == 5
    assert recs[0]["verified"] is False


def test_simulate_verifies_against_dense():
    code, recs = run("simulate", DATA / "plan_cnot_expx8.json", "--verify", *FAST)
    assert code == 0 and recs[0]["verified"]
    assert recs[0]["driver"] == "cnot-expx"


@pytest.mark.parametrize("kind,files", [
    ("overlap", ["stabilizer_ghz6.json", "product_plus6.json"]),
    ("matel", ["matchgate6.json", "pauli_sum6.json", "product_random6.json"]),
    ("observable", ["stabilizer_random6.json", "observable_zz6.json"]),
])
def test_estimate_commands_verify(kind, files):
    code, recs = run("estimate", kind, *[DATA / f for f in files], "--verify", *FAST)
    assert code == 0 and recs[0]["verified"], recs


def test_reports_are_deterministic_across_workers(tmp_path):
    plan = DATA / "plan_local_qft_sparse_matchgate8.json"
    out = tmp_path / "report.jsonl"
    a = run("simulate", plan, "--seed", "3", *FAST)
    b = run("simulate", plan, "--seed", "3", "--workers", "3", "--out", out, *FAST)
    assert a == b
    assert json.loads(out.read_text()) == a[1][0]
    c = run("simulate", plan, "--seed", "4", *FAST)
    assert c[1][0]["value"] != a[1][0]["value"]


def test_learn_exhaustive(tmp_path):
    table = tmp_path / "table.json"
    code, recs = run("learn", "--oracle", "random-sparse:s=4,seed=2,m=8", "--threshold", "0.5", "--exhaustive",
                     "--verify", "--table-out", table)
    assert code == 0 and recs[0]["verdict"] == "complete and sound"
    doc = json.loads(table.read_text())
    assert doc["kind"] == "fourier_table" and len(doc["entries"]) == 4
    assert run("check", table)[0] == 0


@pytest.mark.parametrize("name", ["simon-parity", "dj", "sparse-five-round", "potts-note"])
def test_demos_run_and_verify(name):
    code, recs = run("demo", name, "--verify", *FAST)
    assert code == 0 and recs
    assert all(r.get("verified", True) for r in recs)


def test_version_and_module_entry():
    out = subprocess.run([sys.executable, "-m", "weaksim", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-3, 9) | st.floats(-2, 2) | st.sampled_from(["product", "x", "0101", "h"]),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(
        st.sampled_from(["kind", "factors", "gates", "n", "terms", "driver", "targets", "gate", "schema"]), inner,
        max_size=4),
    max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(FIXTURES), st.sampled_from(["drop", "replace"]), st.data())
def test_malformed_documents_never_crash(tmp_path_factory, path, how, data):
    doc = json.loads(path.read_text())
    key = data.draw(st.sampled_from(sorted(doc)))
    if how == "drop":
        del doc[key]
    else:
        doc[key] = data.draw(json_values)
    f = tmp_path_factory.mktemp("fuzz") / path.name
    f.write_text(json.dumps(doc))
    code, recs = run("check", f)
    assert code in (0, 2, 4)
    if code == 0 and recs[0]["kind"] in ("plan", "circuit"):
        assert run("simulate", f, "--eps", "0.3", "--delta", "0.1")[0] in (0, 2, 3, 4)
