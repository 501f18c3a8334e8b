import json

import pytest

from dtcsim.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, WORKERS_ENV, main


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_steady_order_parameter(tmp_path, capsys):
    cfg = _write(tmp_path, "s.ini", f"[run]\noutput = {tmp_path / 'out'}\n[model]\nn_spins = 100\n")
    assert main(["steady", cfg]) == EXIT_OK
    rec = json.loads((tmp_path / "out" / "steady.json").read_text())
    assert rec["z_q"] == pytest.approx(0.3536, rel=0.10)
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["files"] == ["steady.json"] and manifest["cells"][0]["status"] == "ok"


@pytest.mark.parametrize("engine", ["oracle", "cumulant", "meanfield"])
def test_steady_other_engines(tmp_path, engine):
    cfg = _write(tmp_path, "s.ini", f"[run]\nengine = {engine}\noutput = {tmp_path / 'o'}\n[model]\nn_spins = 4\n")
    assert main(["steady", cfg]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "steady.json").read_text())["engine"] == engine


def test_config_errors_exit_one(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.ini", "[model]\nn_spins = -2\n")
    assert main(["steady", cfg]) == EXIT_CONFIG
    assert "model.n_spins" in capsys.readouterr().err
    assert main(["correlator"]) == EXIT_CONFIG


def test_validate_passes(capsys):
    assert main(["validate"]) == EXIT_OK
    assert "PASS validation" in capsys.readouterr().out


def test_correlator_with_comparison_and_report(tmp_path):
    out = tmp_path / "c"
    cfg = _write(tmp_path, "c.ini",
                 f"[run]\noutput = {out}\ncompare = oracle\nreport = true\n[model]\nn_spins = 4\n"
                 "[grid]\neta_max = 3\nsamples = 64\n")
    assert main(["correlator", cfg]) == EXIT_OK
    lines = (out / "correlator_compare.csv").read_text().splitlines()
    assert lines[2] == "eta,re_C_exact,re_C_oracle,abs_deviation"
    assert max(float(r.split(",")[3]) for r in lines[3:]) < 1e-8
    fit = json.loads((out / "fit.json").read_text())
    assert fit["rate_unit"] == "f*Gamma"
    files = json.loads((out / "manifest.json").read_text())["files"]
    assert set(files) == {"correlator.csv", "correlator_compare.csv", "fit.json", "correlator.png"}
    assert all((out / f).exists() for f in files)


def test_failed_cell_is_isolated(tmp_path):
    # the oracle refuses N = 7; the N = 3 cell still runs
    out = tmp_path / "s"
    cfg = _write(tmp_path, "s.ini", f"[run]\nengine = oracle\noutput = {out}\n"
                                    "[scan]\nn_spins = 3, 7\ng_over_f = 0.5\n[grid]\neta_max = 3\nsamples = 64\n")
    assert main(["stability-scan", cfg]) == EXIT_NUMERIC
    rows = [r for r in (out / "stability_map.csv").read_text().splitlines() if not r.startswith("#")]
    assert rows[1].split(",")[6] == "ok"
    assert rows[2].split(",")[6] == "failed"


def test_stability_scan_is_byte_identical_across_workers(tmp_path, monkeypatch):
    text = "[scan]\nn_spins = 6, 12\ng_over_f = 0.3, 1.5\n[grid]\nsamples = 256\n"
    a = _write(tmp_path, "a.ini", f"[run]\noutput = {tmp_path / 'a'}\n" + text)
    b = _write(tmp_path, "b.ini", f"[run]\noutput = {tmp_path / 'b'}\n" + text)
    assert main(["stability-scan", a]) == EXIT_OK
    monkeypatch.setenv(WORKERS_ENV, "2")
    assert main(["stability-scan", b]) == EXIT_OK
    assert (tmp_path / "a" / "stability_map.csv").read_bytes() == (tmp_path / "b" / "stability_map.csv").read_bytes()


def test_meanfield_tables(tmp_path):
    out = tmp_path / "m"
    cfg = _write(tmp_path, "m.ini", f"[run]\noutput = {out}\nreport = true\n[model]\nn_spins = 30\n"
                                    "[scan]\nn_spins = 8:12:5\nw_over_f = 1, 10, 20\n")
    assert main(["meanfield", cfg]) == EXIT_OK
    window = (out / "sync_window.csv").read_text().splitlines()
    assert window[-1].startswith("12,") and window[-1].endswith(",1")
    sweep = (out / "sync_sweep.csv").read_text().splitlines()
    assert [r.split(",")[3] for r in sweep[3:]] == ["0", "1", "1"]
    assert (out / "sync_sweep.png").exists()


def test_mi_scan_and_fig3(tmp_path):
    out = tmp_path / "i"
    cfg = _write(tmp_path, "i.ini", f"[run]\noutput = {out}\nreport = true\n[scan]\nn_spins = 8\ng_over_f = 0.5, 2\n")
    assert main(["mi-scan", cfg]) == EXIT_OK
    assert len((out / "mi_scan.csv").read_text().splitlines()) == 6
    out = tmp_path / "f"
    cfg = _write(tmp_path, "f.ini", f"[run]\noutput = {out}\n[model]\nn_spins = 12\n"
                                    "[scan]\ng_over_f = 0.5\ndelta_over_f = 0, 0.1\nn_seeds = 2\n[grid]\nsamples = 256\n")
    assert main(["fig3", cfg]) == EXIT_OK
    rows = (out / "fig3.csv").read_text().splitlines()
    assert rows[2].split(",")[3] == "0.0"
