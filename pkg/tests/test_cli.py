import json

import pytest

from telescopy import cli, fisher as fz
from telescopy.tables import read_csv
from telescopy.validation import run_checks


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1])


def test_fisher_default(capsys, tmp_path):
    out = tmp_path / "f.csv"
    code, summary = run(capsys, "fisher", "--out", str(out))
    assert code == 0
    assert summary["max_rel_diff"] < 1e-6
    prov, header, rows = read_csv(str(out))
    assert header[:2] == ["pair", "method"]
    assert len(rows) == 6
    # GJC classical at g=0.5, delta=0: F_aa = eps / (M C (1 - u^2))
    assert float(rows[0][2]) == pytest.approx(0.01 / (3 * 3 * 0.75), rel=1e-12)
    assert prov["seed"] == "0"


def test_schedule_required(capsys):
    code, summary = run(capsys, "fisher", "--override", "scheme=local_quantum")
    assert code == 2
    assert "schedule required" in summary["message"]


def test_bad_tau_is_config_error(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"scheme": "gjc_quantum", "schedule": [0.5, 1.5]}))
    code, summary = run(capsys, "fisher", "--config", str(path))
    assert code == 2 and summary["field"] == "schedule[1]"


def test_optimize_examples(capsys):
    code, s = run(capsys, "optimize", "--override", "variant=hard_final", "--override", "d=5")
    assert code == 0 and s["gamma_d"] == pytest.approx(6 / 14, abs=1e-10) and s["converged"]
    code, s = run(capsys, "optimize", "--override", "budget=1", "--override", "m=5")
    assert code == 0 and s["converged"] is False


def test_reproduce_small(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, s = run(capsys, "reproduce", "ratio-vs-D", "--override", "ds=[1,2,5]", "--out", str(out))
    assert code == 0 and s["ansatz_below_optimized"]
    _, header, rows = read_csv(str(out))
    assert header == ["x", "series", "value"] and len(rows) == 6
    code, s = run(capsys, "reproduce", "tau-profile", "--override", "ms=[3]", "--override", "d=12")
    assert code == 0 and s["m3_nondecreasing"]
    code, s = run(capsys, "reproduce", "nonsense")
    assert code == 2


def test_montecarlo(capsys):
    code, s = run(capsys, "montecarlo", "--override", "scheme=gjc_quantum", "--override", "schedule=[0.3,0.5]",
                  "--override", "samples=100000", "--threads", "2")
    assert code == 0 and s["all_within_4se"]


def test_determinism_bytes(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["montecarlo", "--override", "samples=50000", "--seed", "4"]
    run(capsys, *args, "--out", str(a))
    run(capsys, *args, "--out", str(b), "--threads", "1")
    assert a.read_bytes() == b.read_bytes()


def test_validate_passes(capsys):
    code, s = run(capsys, "validate")
    assert code == 0 and s["failed"] == []


def test_tampered_prefactor_detected():
    def broken(settings, m, eps, g, y=None, **kw):
        f = fz.fisher_closed_form(settings, m, eps, g, y, **kw)
        return f.scaled(1.01) if settings.scheme.value == "w_state" else f

    results = dict((name, ok) for name, ok, _ in run_checks(seed=0, closed_form=broken))
    assert results["analytic vs numeric Fisher"] is False
    assert all(ok for name, ok in results.items() if name != "analytic vs numeric Fisher")
