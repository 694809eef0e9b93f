import json

import pytest

from divanneal.cli import main


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_pipeline_smoke(tmp_path, capsys):
    inst, spec, seeds = (str(tmp_path / n) for n in ("inst.txt", "spec.txt", "seeds.txt"))
    assert run(["gen", "--2d", "8", "--seed", "7", "-o", inst], capsys)[0] == 0
    assert run(["spectrum", inst, "--ar", "0.01", "-o", spec], capsys)[0] == 0
    text = (tmp_path / "spec.txt").read_text()
    assert text.startswith("e_min ") and "complete true" in text
    assert run(["diversity", inst, spec, "--R", "0.125", "-o", seeds], capsys)[0] == 0
    assert "D " in (tmp_path / "seeds.txt").read_text()
    code, out = run(["anneal", inst, "--sweeps", "20", "--restarts", "2", "--beta", "4"], capsys)
    assert code == 0
    recs = [json.loads(l) for l in out.out.splitlines()]
    assert len(recs) == 2 and len(recs[0]["config"]) == 64


def test_single_state_diversity(tmp_path, capsys):
    inst = tmp_path / "i.txt"
    inst.write_text("3 2\n0 1 -1.0\n1 2 -1.0\n")
    spec = tmp_path / "s.txt"
    spec.write_text("e_min -2.0\ncutoff -2.0\ncomplete true\na_r 0.001\nbandwidth_mode exact\n"
                    "bandwidth 4.0\nstates 1\n-2.0 +++\n")
    code, out = run(["diversity", str(inst), str(spec), "--R", "0.125"], capsys)
    assert code == 0
    assert "D 1" in out.out


def test_quasi1d_to_stdout(capsys):
    code, out = run(["gen", "--quasi1d", "10", "--r", "2", "--seed", "1"], capsys)
    assert code == 0
    assert "10 17" in out.out


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["spectrum", "x.txt", "--ar", "abc"])
    assert e.value.code != 0
    assert "--ar" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["gen"])
    assert e.value.code != 0
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code != 0
    code, out = run(["spectrum", str(tmp_path / "missing.txt"), "--ar", "0.1"], capsys)
    assert code != 0 and "missing.txt" in out.err


def test_bad_instance_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("2 1\n0 1 two\n")
    code, out = run(["spectrum", str(bad), "--ar", "0.1"], capsys)
    assert code != 0 and "line 2" in out.err


def test_bench_and_report(tmp_path, capsys):
    (tmp_path / "exp.toml").write_text(
        'ensemble = "2d"\nL = 3\ncount = 2\nsweeps = [10, 20]\nrestarts = 3\nbeta = 2.0\n'
        'seed_a_r = 0.05\nsolver_a_r = 0.1\ncluster_min_size = 2\n')
    out = tmp_path / "out"
    code, _ = run(["bench", str(tmp_path / "exp.toml"), "-o", str(out)], capsys)
    assert code == 0
    assert (out / "instance_001" / "summary.csv").exists()
    before = (out / "quantiles.csv").read_text()
    (out / "quantiles.csv").unlink()
    code, _ = run(["report", str(out)], capsys)
    assert code == 0
    assert (out / "quantiles.csv").read_text() == before


def test_report_missing_dir(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["report", str(tmp_path)])
    assert e.value.code != 0
