import math
import os

import numpy as np
import pytest

from wasserdual._csvio import read_csv_rows
from wasserdual.cli import emit_plot_data, main
from wasserdual.duality import DualityReport


def write_config(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture
def two_point_config(tmp_path):
    edges = tmp_path / "edges.txt"
    edges.write_text("0 1 1.0\n")
    return write_config(
        tmp_path,
        f"""
[experiment]
command = wasserstein
seed = 1

[space]
source = edges
edges = {edges}

[measures]
mu = 0.5,0.5
nu = 0.75,0.25

[wasserstein]
p_list = 1,2,inf
""",
    )


def test_wasserstein_summary_row(two_point_config, tmp_path):
    out = str(tmp_path / "out")
    assert main(["wasserstein", "--config", two_point_config, "--out", out]) == 0
    header, rows = read_csv_rows(os.path.join(out, "summary.csv"))
    assert header == ["metric", "value"]
    table = {r[0]: float(r[1]) for r in rows}
    assert table["W_1"] == 0.25
    assert table["W_2"] == 0.5
    assert table["W_inf"] == 1.0
    # detail table holds every summary number
    _, detail = read_csv_rows(os.path.join(out, "wp_values.csv"))
    detail_values = {float(r[1]) for r in detail}
    assert set(table.values()) <= detail_values
    assert os.path.exists(os.path.join(out, "fig_wp_curve.png"))
    assert os.path.exists(os.path.join(out, "manifest.txt"))
    assert os.path.exists(os.path.join(out, "plan_p1.csv"))


def test_empty_p_list_exits_1(two_point_config, tmp_path, capsys):
    out = str(tmp_path / "out2")
    code = main([
        "wasserstein", "--config", two_point_config, "--out", out,
        "--override", "wasserstein.p_list=",
    ])
    assert code == 1
    assert "p_list empty" in capsys.readouterr().err


def test_missing_file_exits_1(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = wasserstein

[space]
source = edges
edges = /nonexistent/edges.txt

[measures]
mu = 0.5,0.5
nu = 0.5,0.5

[wasserstein]
p_list = 1
""",
    )
    assert main(["wasserstein", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "file not found" in capsys.readouterr().err


def test_malformed_number_exits_1(tmp_path, two_point_config, capsys):
    out = str(tmp_path / "out3")
    code = main([
        "wasserstein", "--config", two_point_config, "--out", out,
        "--override", "wasserstein.p_list=1,abc",
    ])
    assert code == 1
    assert "malformed exponent" in capsys.readouterr().err


def test_command_mismatch_exits_1(two_point_config, tmp_path, capsys):
    assert main(["audit", "--config", two_point_config, "--out", str(tmp_path / "o")]) == 1
    assert "command" in capsys.readouterr().err


def test_check_duality_small_torus(tmp_path):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = check-duality
seed = 2

[space]
source = torus
n = 16

[kernel]
type = heat
t = 0.05

[duality]
p_list = 1,2,inf
max_pairs = 8
""",
    )
    out = str(tmp_path / "dual")
    assert main(["check-duality", "--config", cfg, "--out", out]) == 0
    header, rows = read_csv_rows(os.path.join(out, "constants.csv"))
    assert header == ["p", "K_C", "K_G", "ci_halfwidth", "mesh"]
    assert [r[0] for r in rows] == ["1", "2", "inf"]  # inf sorted last
    for r in rows:
        assert abs(float(r[1]) - float(r[2])) <= 0.05
    assert os.path.exists(os.path.join(out, "fig_constants.png"))
    assert os.path.exists(os.path.join(out, "pair_margins.csv"))


def test_check_duality_gap_failure_exits_2(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = check-duality

[space]
source = torus
n = 12

[kernel]
type = heat
t = 0.05

[duality]
p_list = 2
max_pairs = 6

[tolerances]
duality_gap = -1
""",
    )
    code = main(["check-duality", "--config", cfg, "--out", str(tmp_path / "d2")])
    assert code == 2
    assert "constants.csv" in capsys.readouterr().err


def test_byte_identical_reruns(tmp_path):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = check-duality
seed = 5

[space]
source = torus
n = 12

[kernel]
type = walk
steps = 2
laziness = 0.5

[duality]
p_list = 1,2
max_pairs = 5
""",
    )
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert main(["check-duality", "--config", cfg, "--out", out_a]) == 0
    assert main(["check-duality", "--config", cfg, "--out", out_b]) == 0
    for name in ("constants.csv", "pair_margins.csv", "fn_margins.csv", "summary.csv"):
        with open(os.path.join(out_a, name), "rb") as fa, open(os.path.join(out_b, name), "rb") as fb:
            assert fa.read() == fb.read()


def test_hopf_lax_command(tmp_path):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = hopf-lax

[space]
source = path
n = 60

[hopf-lax]
p = 2.0
t_list = 0.05,0.1
field = sample:sin
sigma = 1e-3
""",
    )
    out = str(tmp_path / "hl")
    assert main(["hopf-lax", "--config", cfg, "--out", out]) == 0
    header, rows = read_csv_rows(os.path.join(out, "hopf_lax_fields.csv"))
    assert header[0] == "index" and len(rows) == 60
    assert os.path.exists(os.path.join(out, "fig_hopf_lax.png"))


def test_simulate_heisenberg_command(tmp_path):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = simulate-heisenberg

[sde]
t = 0.5
steps = 100
samples = 3000
seed = 11
start = 0,0,0
""",
    )
    out = str(tmp_path / "heis")
    assert main(["simulate-heisenberg", "--config", cfg, "--out", out]) == 0
    header, rows = read_csv_rows(os.path.join(out, "cloud.csv"))
    assert header == ["sample", "x1", "x2", "z12"]
    assert len(rows) == 3000
    assert os.path.exists(os.path.join(out, "fig_cloud.png"))


def test_heisenberg_missing_seed_exits_1(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = simulate-heisenberg

[sde]
t = 0.5
steps = 10
samples = 10
""",
    )
    assert main(["simulate-heisenberg", "--config", cfg, "--out", str(tmp_path / "x")]) == 1
    assert "seed" in capsys.readouterr().err


def test_seed_flag_overrides(tmp_path):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = simulate-heisenberg

[sde]
t = 0.5
steps = 50
samples = 200
seed = 1
start = 0,0,0
""",
    )
    out1 = str(tmp_path / "s1")
    out2 = str(tmp_path / "s2")
    assert main(["simulate-heisenberg", "--config", cfg, "--out", out1]) == 0
    assert main(["simulate-heisenberg", "--config", cfg, "--out", out2, "--override", "sde.seed=2"]) == 0
    with open(os.path.join(out1, "cloud.csv")) as f1, open(os.path.join(out2, "cloud.csv")) as f2:
        assert f1.read() != f2.read()


def test_audit_command(tmp_path):
    cfg = write_config(
        tmp_path,
        """
[experiment]
command = audit

[space]
source = torus
n = 12

[kernel]
type = walk
steps = 3
laziness = 0.5

[duality]
p_list = 1,2,4,8
max_pairs = 5
""",
    )
    out = str(tmp_path / "audit")
    assert main(["audit", "--config", cfg, "--out", out]) == 0
    header, rows = read_csv_rows(os.path.join(out, "monotonicity.csv"))
    assert header[:3] == ["x", "y", "d"] and header[-1] == "W_inf"
    for r in rows:
        values = [float(v) for v in r[3:]]
        assert all(b >= a - 1e-10 for a, b in zip(values[:-1], values[1:-1]))
    assert os.path.exists(os.path.join(out, "fig_monotonicity.png"))


def test_emit_plot_data_identity_row(tmp_path):
    rep = DualityReport(
        p=1.0, q=math.inf, K_C=1.0, K_G=1.0, mesh=0.25,
        pair_margins=np.zeros(1), fn_margin_min=0.0,
        reconstruction_error=0.0, gap_tol=0.05,
    )
    path = str(tmp_path / "constants.csv")
    emit_plot_data([rep], path)
    header, rows = read_csv_rows(path)
    assert rows == [["1", "1", "1", "0", "0.25"]]


def test_emit_plot_data_empty(tmp_path):
    path = str(tmp_path / "constants.csv")
    emit_plot_data([], path)
    header, rows = read_csv_rows(path)
    assert header == ["p", "K_C", "K_G", "ci_halfwidth", "mesh"]
    assert rows == []
