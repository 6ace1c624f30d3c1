import json
import math
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from conftest import crandn
from linphase.coherence import CoherenceStructure, MagnitudePhaseData, extract_phase_data
from linphase.harness.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from linphase.harness.config import ConfigError, ExperimentConfig, GaussParams, load_config
from linphase.harness.experiments import (
    _gauss_item,
    run_gauss_sweep,
    run_solve,
    solve_instance,
    trial_seed,
)
from linphase.harness.io import (
    FormatError,
    format_db,
    read_coherence_json,
    read_matrix_csv,
    read_measurements_csv,
    read_table,
    read_vector_csv,
    write_coherence_json,
    write_matrix_csv,
    write_measurements_csv,
    write_vector_csv,
)
from linphase.metrics import epsilon_c
from linphase.solvers import NonconvexSettings

# -- configuration ---------------------------------------------------------------------------------

def test_defaults():
    c = ExperimentConfig("gauss-sweep")
    assert c.trials == 500 and c.gauss.n == 20 and c.gauss.m1 == 20 and c.gauss.m2 == list(range(1, 31))
    assert ExperimentConfig("antenna").trials == 10


@pytest.mark.parametrize("doc", [
    {"kind": "gauss-sweep", "trials": 0},
    {"kind": "antenna", "trials": 0},
    {"kind": "gauss-sweep", "trials": 2.5},
    {"kind": "nope"},
    {"trials": 3},
    {"kind": "gauss-sweep", "methods": ["linear-pc", "linear-pc"]},
    {"kind": "gauss-sweep", "methods": ["magic"]},
    {"kind": "gauss-sweep", "methods": []},
    {"kind": "gauss-sweep", "gauss": {"m2": [0]}},
    {"kind": "gauss-sweep", "gauss": {"m2": [3, 3]}},
    {"kind": "gauss-sweep", "gaus": {}},
    {"kind": "gauss-sweep", "solver": {"max_iter": 3}},
    {"kind": "antenna", "antenna": {"coherent_channels": 4}},
    {"kind": "antenna", "antenna": {"snr_db": "loud"}},
    {"kind": "gauss-sweep", "workers": 0},
    [],
])
def test_invalid_configs(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_config_file_roundtrip_and_inf(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"kind": "antenna", "seed": 3, "antenna": {"snr_db": "inf", "samples_per_set": 50}}))
    c = load_config(p)
    assert c.antenna.snr_db == math.inf and c.antenna.samples_per_set == 50 and c.seed == 3
    (tmp_path / "bad.json").write_text('{"kind": "antenna",\n "seed": }')
    with pytest.raises(ConfigError, match="bad.json:2"):
        load_config(tmp_path / "bad.json")


def test_workers_env_override(monkeypatch):
    c = ExperimentConfig("gauss-sweep", workers=3)
    monkeypatch.delenv("LINPHASE_WORKERS", raising=False)
    assert c.effective_workers() == 3
    monkeypatch.setenv("LINPHASE_WORKERS", "2")
    assert c.effective_workers() == 2
    monkeypatch.setenv("LINPHASE_WORKERS", "zero")
    with pytest.raises(ConfigError):
        c.effective_workers()


# -- file formats ------------------------------------------------------------------------------------

def test_vector_and_matrix_roundtrip(tmp_path, rng):
    v, M = crandn(rng, 7), crandn(rng, 4, 3)
    write_vector_csv(tmp_path / "v.csv", v)
    write_matrix_csv(tmp_path / "M.csv", M)
    np.testing.assert_array_equal(read_vector_csv(tmp_path / "v.csv"), v)
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "M.csv"), M)


def test_measurement_and_coherence_roundtrip(tmp_path, rng):
    s = CoherenceStructure.from_groups([[0], [1, 3], [2, 4]])
    data = extract_phase_data(crandn(rng, 5), s)
    write_measurements_csv(tmp_path / "m.csv", data)
    write_coherence_json(tmp_path / "c.json", s)
    back = read_measurements_csv(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.magnitudes, data.magnitudes)
    np.testing.assert_array_equal(back.phase_diffs, data.phase_diffs)
    assert read_coherence_json(tmp_path / "c.json").to_lists() == s.to_lists()
    (tmp_path / "plain.json").write_text("[[0], [1, 3], [2, 4]]")
    assert read_coherence_json(tmp_path / "plain.json", 5).to_lists() == s.to_lists()


def test_magnitudes_only_file(tmp_path):
    (tmp_path / "m.csv").write_text("index,magnitude\n0,1.5\n1,2\n")
    d = read_measurements_csv(tmp_path / "m.csv")
    np.testing.assert_array_equal(d.phase_diffs, [0, 0])


def test_truncated_matrix_names_record(tmp_path, rng):
    write_matrix_csv(tmp_path / "M.csv", crandn(rng, 3, 3))
    lines = (tmp_path / "M.csv").read_text().splitlines()
    (tmp_path / "M.csv").write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(FormatError, match=r"first missing entry \(2, 1\)"):
        read_matrix_csv(tmp_path / "M.csv")
    (tmp_path / "cut.csv").write_text("\n".join(lines[:5]) + "\n3,0,1.0\n")
    with pytest.raises(FormatError, match="cut.csv:6"):
        read_matrix_csv(tmp_path / "cut.csv")


@pytest.mark.parametrize("text,pattern", [
    ("idx,re,im\n0,1,2\n", ":1: header"),
    ("index,re,im\n0,1,x\n", ":2: field 'im'"),
    ("index,re,im\n0,1,2\n0,1,2\n", ":3: duplicate"),
    ("index,re,im\n1,1,2\n", "first missing 0"),
    ("index,re,im\n0,nan,2\n", "not finite"),
    ("", "empty file"),
])
def test_vector_format_errors(tmp_path, text, pattern):
    (tmp_path / "v.csv").write_text(text)
    with pytest.raises(FormatError, match=pattern):
        read_vector_csv(tmp_path / "v.csv")


def test_coherence_format_errors(tmp_path):
    for text in ('{"groups": [[0, 1], [1]]}', '[[0, "a"]]', '{"groups": 3}', "[[0]"):
        (tmp_path / "c.json").write_text(text)
        with pytest.raises(FormatError):
            read_coherence_json(tmp_path / "c.json")


def test_format_db_floor():
    assert format_db(-math.inf) == "-400.0000"
    assert format_db(-12.345678) == "-12.3457"


# -- solve mode -----------------------------------------------------------------------------------------

def write_instance(tmp_path, A, b, s):
    write_matrix_csv(tmp_path / "A.csv", A)
    write_measurements_csv(tmp_path / "m.csv", extract_phase_data(b, s))
    write_coherence_json(tmp_path / "c.json", s)
    write_vector_csv(tmp_path / "ref.csv", b)


@pytest.mark.parametrize("method", ["linear-pc", "linear-pc-refined", "nonconvex-augmented", "nonconvex-incoherent"])
def test_solve_roundtrip_matches_memory(tmp_path, rng, method):
    n = 4
    s = CoherenceStructure.stacked_sets(n, 3 * n)
    A, z = crandn(rng, s.m, n), crandn(rng, n)
    b = A @ z
    write_instance(tmp_path, A, b, s)
    settings = NonconvexSettings(max_iterations=200)
    disk = run_solve(tmp_path / "A.csv", tmp_path / "m.csv", tmp_path / "c.json", method,
                     tmp_path / "ref.csv", tmp_path / "out", settings)
    mem = solve_instance(A, extract_phase_data(b, s), s, method, settings)
    np.testing.assert_array_equal(disk.z, mem.z)
    np.testing.assert_array_equal(read_vector_csv(tmp_path / "out" / "solution.csv"), mem.z)
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["n"] == n and report["m"] == s.m and report["method"] == method


INDEPENDENT_WRITER = textwrap.dedent("""
    import cmath, csv, json, random, sys
    out, n, pairs, seed = sys.argv[1], 6, 12, 77
    rnd = random.Random(seed)
    cg = lambda: complex(rnd.gauss(0, 1), rnd.gauss(0, 1))
    m = n + 2 * pairs
    A = [[cg() for _ in range(n)] for _ in range(m)]
    z = [cg() for _ in range(n)]
    b = [sum(A[i][k] * z[k] for k in range(n)) for i in range(m)]
    groups = [[i] for i in range(n)] + [[n + p, n + pairs + p] for p in range(pairs)]
    diff = [0.0] * m
    for g in groups:
        for k in g[1:]:
            diff[k] = cmath.phase(b[k] / b[g[0]])
    with open(out + "/A.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        for i in range(m):
            for k in range(n):
                w.writerow([i, k, repr(A[i][k].real), repr(A[i][k].imag)])
    with open(out + "/m.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "magnitude", "phase_diff"])
        for i in range(m):
            w.writerow([i, repr(abs(b[i])), repr(diff[i])])
    with open(out + "/ref.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re", "im"])
        for i in range(m):
            w.writerow([i, repr(b[i].real), repr(b[i].imag)])
    json.dump(groups, open(out + "/c.json", "w"))
""")


def test_cross_implementation_instance(tmp_path, capsys):
    (tmp_path / "writer.py").write_text(INDEPENDENT_WRITER)
    subprocess.run([sys.executable, str(tmp_path / "writer.py"), str(tmp_path)], check=True)
    code = main(["solve", "--operator", str(tmp_path / "A.csv"), "--magnitudes", str(tmp_path / "m.csv"),
                 "--coherence", str(tmp_path / "c.json"), "--reference", str(tmp_path / "ref.csv"),
                 "--method", "linear-pc", "--out", str(tmp_path / "out")])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["epsilon_c"] < -90
    z = read_vector_csv(tmp_path / "out" / "solution.csv")
    b = read_vector_csv(tmp_path / "ref.csv")
    assert epsilon_c(read_matrix_csv(tmp_path / "A.csv") @ z, b) < -90


# -- CLI exit codes -------------------------------------------------------------------------------------

def test_cli_gauss_sweep_ok(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "gauss-sweep", "trials": 2, "gauss": {"n": 4, "m1": 4, "m2": [1, 4]}}))
    assert main(["gauss-sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = read_table(tmp_path / "o" / "summary.csv")
    assert {r["m2"] for r in rows} == {"1", "4"}
    assert len(read_table(tmp_path / "o" / "trials.csv")) == 2 * 2 * 3


def test_cli_config_errors(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "gauss-sweep", "trials": 0}))
    assert main(["gauss-sweep", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    cfg.write_text(json.dumps({"kind": "antenna"}))
    assert main(["gauss-sweep", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["antenna", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_cli_format_error_exit(tmp_path, rng, capsys):
    s = CoherenceStructure.incoherent(3)
    write_instance(tmp_path, crandn(rng, 3, 2), crandn(rng, 3), s)
    (tmp_path / "c.json").write_text("[[0], [1]]")
    code = main(["solve", "--operator", str(tmp_path / "A.csv"), "--magnitudes", str(tmp_path / "m.csv"),
                 "--coherence", str(tmp_path / "c.json")])
    assert code == EXIT_CONFIG


def test_cli_numerical_failure_exit(tmp_path, capsys):
    big = np.full((3, 2), 1e308, dtype=complex)  # products overflow inside the solver
    s = CoherenceStructure.incoherent(3)
    write_matrix_csv(tmp_path / "A.csv", big)
    write_measurements_csv(tmp_path / "m.csv", MagnitudePhaseData(np.full(3, 1e308), np.zeros(3)))
    write_coherence_json(tmp_path / "c.json", s)
    code = main(["solve", "--operator", str(tmp_path / "A.csv"), "--magnitudes", str(tmp_path / "m.csv"),
                 "--coherence", str(tmp_path / "c.json"), "--method", "nonconvex-incoherent",
                 "--out", str(tmp_path / "o")])
    assert code == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


# -- sweep determinism and seeding ------------------------------------------------------------------------


def tiny():
    return ExperimentConfig("gauss-sweep", seed=11, trials=3, gauss=GaussParams(5, 5, [2, 4, 7]),
                            solver=NonconvexSettings(max_iterations=300))


def test_trial_seed_scheme():
    assert trial_seed(2020, 3, 4) == trial_seed(2020, 3, 4)
    assert len({trial_seed(2020, m2, t) for m2 in range(5) for t in range(50)}) == 250
    assert trial_seed(2020, 1, 2) != trial_seed(2021, 1, 2)


def test_sweep_outputs_byte_identical(tmp_path):
    c = tiny()
    run_gauss_sweep(c, tmp_path / "a")
    run_gauss_sweep(c, tmp_path / "b")
    for name in ("trials.csv", "summary.csv", "config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_trial_order_independence():
    c = tiny()
    items = [(5, 5, m2, t, c.seed, tuple(c.methods), c.solver) for m2 in (2, 7) for t in range(3)]
    forward = [_gauss_item(it) for it in items]
    backward = [_gauss_item(it) for it in reversed(items)][::-1]
    strip = lambda recs: [(r.m2, r.trial, r.seed, r.method, r.epsilon_c, r.epsilon_m, r.iterations, r.flag)
                          for r in recs]
    assert [strip(a) for a in forward] == [strip(b) for b in backward]


def test_worker_count_does_not_change_results():
    c = tiny()
    one = run_gauss_sweep(c, workers=1)
    two = run_gauss_sweep(c, workers=2)
    key = lambda r: (r.m2, r.trial, r.method, r.epsilon_c, r.epsilon_m, r.iterations, r.flag)
    assert [key(r) for r in one.records] == [key(r) for r in two.records]


def test_summary_columns():
    res = run_gauss_sweep(tiny())
    row = next(r for r in res.summary if r["m2"] == 4 and r["method"] == "linear-pc")
    assert (row["m"], row["n"], row["q"]) == (13, 5, 9)
    assert row["ratio_m_n"] == pytest.approx(13 / 5)
    assert row["ratio_m_unknowns"] == pytest.approx(13 / 13)
    assert row["rate"] == 1.0


@pytest.mark.slow
def test_linear_pc_curve_monotone_binomial(linear_sweep):
    """Two-proportion test at the 1% level finds no significant decrease."""
    result, _ = linear_sweep
    rows = sorted((r for r in result.summary if r["method"] == "linear-pc"), key=lambda r: r["m2"])
    for a, b in zip(rows, rows[1:]):
        pooled = (a["successes"] + b["successes"]) / (a["trials"] + b["trials"])
        if pooled in (0.0, 1.0):
            assert a["rate"] == b["rate"]
            continue
        se = math.sqrt(pooled * (1 - pooled) * (1 / a["trials"] + 1 / b["trials"]))
        assert (a["rate"] - b["rate"]) / se < 2.576
