import json

import pytest

from pebblelab.cli import main, resolve_seed


def test_build_and_schedule(tmp_path, capsys):
    out = tmp_path / "h8.json"
    assert main(["build", "--algo", "strassen", "--n", "8", "--out", str(out), "--dot", str(tmp_path / "h.dot")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["inputs"] == 128
    trace = tmp_path / "t.jsonl"
    assert main(["schedule", "--cdag", str(out), "--strategy", "blocked", "--cache", "24",
                 "--no-recompute", "--out", str(trace)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["recomputed_vertices"] == 0 and stats["io_total"] >= 192
    assert main(["simulate", "--cdag", str(out), "--trace", str(trace), "--no-recompute"]) == 0
    assert json.loads(capsys.readouterr().out)["io_total"] == stats["io_total"]


def test_simulate_corrupt_trace_names_line(tmp_path, capsys):
    out = tmp_path / "h2.json"
    main(["build", "--algo", "strassen", "--n", "2", "--out", str(out)])
    trace = tmp_path / "t.jsonl"
    main(["schedule", "--cdag", str(out), "--strategy", "blocked", "--cache", "5", "--out", str(trace)])
    lines = trace.read_text().splitlines()
    lines[1] = lines[1].replace('"load"', '"store"')
    trace.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["simulate", "--cdag", str(out), "--trace", str(trace)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_simulate_rejects_recompute(tmp_path, capsys):
    out = tmp_path / "h1.json"
    main(["build", "--algo", "strassen", "--n", "1", "--out", str(out)])
    trace = tmp_path / "t.jsonl"
    moves = [("load", "r|input-A|0,0"), ("load", "r|input-B|0,0"), ("compute", "r|product|"),
             ("compute", "r|product|"), ("store", "r|product|")]
    trace.write_text("\n".join([json.dumps({"schema": "sched/1", "cache": 3})]
                               + [json.dumps({"op": o, "v": v}) for o, v in moves]) + "\n")
    assert main(["simulate", "--cdag", str(out), "--trace", str(trace)]) == 0
    assert main(["simulate", "--cdag", str(out), "--trace", str(trace), "--no-recompute"]) == 1
    assert "Recomputation" in capsys.readouterr().err


def test_build_like_equals_strassen(tmp_path):
    from pebblelab.cdag import isomorphic, load
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["build", "--algo", "strassen", "--n", "4", "--out", str(a)])
    main(["build", "--algo", "like", "--n", "4", "--out", str(b)])
    assert isomorphic(load(a), load(b))


def test_usage_errors(tmp_path, capsys):
    assert main(["build", "--algo", "strassen", "--n", "6", "--out", str(tmp_path / "x.json")]) == 2
    assert "n must be a power of 2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["bound"])
    assert exc.value.code == 2
    assert main(["bound", "--formula", "strassen-par", "--n", "4", "--cache", "4", "--procs", "2"]) == 2


def test_bound(capsys):
    assert main(["bound", "--formula", "strassen-seq", "--n", "4", "--cache", "4"]) == 0
    assert capsys.readouterr().out.strip() == "4"
    assert main(["bound", "--formula", "strassen-seq", "--n", "2", "--cache", "16", "--json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["value"] == 12 and rec["regime"] == "trivial-fallback" and rec["params"]["n"] == 2


def test_verify(capsys, tmp_path):
    assert main(["verify", "table1"]) == 1
    assert "127/128 match" in capsys.readouterr().out
    assert main(["verify", "families", "--n", "8", "--level", "2"]) == 0
    assert main(["verify", "corollary-half", "--copies", "2", "--json", str(tmp_path / "v.json")]) == 0
    assert json.loads((tmp_path / "v.json").read_text())["pass"] is True


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv("MMIO_SEED", raising=False)
    assert resolve_seed(None) == 42
    monkeypatch.setenv("MMIO_SEED", "7")
    assert resolve_seed(None) == 7
    assert resolve_seed(3) == 3
