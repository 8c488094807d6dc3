"""End-to-end command-line pipeline on a tiny custom configuration."""

import csv
import subprocess
import sys

import pytest

from primplan.cli import main

TINY_INI = """
[paths]
radii = 12, inf
start_angles_deg = 0, 0
rotation_step_deg = 90
length_m = 5

[dynamics]
v_min = -3, -3, -3
v_max = 3, 3, 3
a_min = -6, -6, -6
a_max = 6, 6, 6

[discretization]
speed_step = 0.5
sample_step = 0.01
n_stages = 200

[simulator]
n_obs = 0
timeout_s = 30
"""


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    """library + index built through the CLI from a 5-path config."""
    root = tmp_path_factory.mktemp("cli")
    ini = root / "tiny.ini"
    ini.write_text(TINY_INI)
    lib = root / "tiny.pplib"
    idx = root / "tiny.ppidx"
    assert main(["generate-library", "--config", str(ini), "--out", str(lib)]) == 0
    assert main(["build-index", "--library", str(lib), "--config", str(ini),
                 "--out", str(idx)]) == 0
    return root, ini, lib, idx


def test_help_screens():
    for args in (["--help"],
                 ["generate-library", "--help"],
                 ["build-index", "--help"],
                 ["simulate", "--help"],
                 ["benchmark", "--help"],
                 ["inspect", "--help"]):
        with pytest.raises(SystemExit) as exc:
            main(args)
        assert exc.value.code == 0


def test_generate_library_output(tiny, capsys):
    root, ini, lib, idx = tiny
    assert lib.exists() and lib.stat().st_size > 1000
    assert main(["inspect", "--library", str(lib)]) == 0
    out = capsys.readouterr().out
    assert "5" in out  # 1 finite radius x 4 rolls + straight


def test_inspect_pairing_ok(tiny, capsys):
    root, ini, lib, idx = tiny
    assert main(["inspect", "--library", str(lib), "--index", str(idx)]) == 0
    out = capsys.readouterr().out.lower()
    assert "match" in out


def test_simulate_empty_map(tiny, tmp_path, capsys):
    root, ini, lib, idx = tiny
    rc = main(["simulate", "--library", str(lib), "--index", str(idx),
               "--config", str(ini), "--seed", "0", "--out", str(tmp_path)])
    assert rc == 0
    csv_path = tmp_path / "episode.csv"
    assert csv_path.exists()
    with csv_path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["success"] == "1"
    assert float(rows[0]["t_total_s"]) > 10.0


def test_benchmark_single_cell(tiny, tmp_path, capsys):
    root, ini, lib, idx = tiny
    rc = main(["benchmark", "--library", str(lib), "--index", str(idx),
               "--config", str(ini), "--n-obs", "0", "--seeds", "0:2",
               "--out", str(tmp_path), "--format", "csv"])
    assert rc == 0
    with (tmp_path / "episodes.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    with (tmp_path / "summary.csv").open() as fh:
        srows = list(csv.DictReader(fh))
    assert len(srows) == 1 and srows[0]["success_rate"] == "1.0000"


def test_hash_mismatch_is_runtime_error(tiny, tmp_path, capsys):
    root, ini, lib, idx = tiny
    other_ini = tmp_path / "other.ini"
    other_ini.write_text(TINY_INI.replace("length_m = 5", "length_m = 4"))
    other_lib = tmp_path / "other.pplib"
    assert main(["generate-library", "--config", str(other_ini),
                 "--out", str(other_lib)]) == 0
    rc = main(["inspect", "--library", str(other_lib), "--index", str(idx)])
    capt = capsys.readouterr()
    assert rc == 1
    assert "mismatch" in (capt.out + capt.err).lower()

    rc = main(["simulate", "--library", str(other_lib), "--index", str(idx),
               "--config", str(ini)])
    assert rc == 1


def test_malformed_config_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[paths]\nradius = 5\n")  # unknown key
    rc = main(["generate-library", "--config", str(bad),
               "--out", str(tmp_path / "x.pplib")])
    capt = capsys.readouterr()
    assert rc == 2
    assert "radius" in capt.err


def test_missing_file_is_runtime_error(tmp_path, capsys):
    rc = main(["build-index", "--library", str(tmp_path / "missing.pplib")])
    capsys.readouterr()
    assert rc == 1


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--nope"])
    assert exc.value.code == 2


def test_unknown_preset_is_usage_error(tmp_path, capsys):
    rc = main(["generate-library", "--config", "preset:nosuch",
               "--out", str(tmp_path / "x.pplib")])
    capt = capsys.readouterr()
    assert rc == 2
    assert "nosuch" in capt.err


def test_installed_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "primplan.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "generate-library" in proc.stdout
