"""Verification suite: report structure, pass behavior, failure signaling."""
from __future__ import annotations

import io
import json
from contextlib import redirect_stderr, redirect_stdout
import numpy as np

from sumpaths.circuits import build_epr_circuit, save_circuit
from sumpaths.cli import main
from sumpaths.corpus import random_circuit
from sumpaths.verify import verify_circuit


def test_epr_report_is_complete_and_tight():
    report = verify_circuit(build_epr_circuit(np.eye(2), np.eye(2)))
    names = [check.name for check in report.checks]
    for expected in (
        "norm_preservation",
        "pathsum_completeness",
        "oracle_equivalence",
        "telescoping",
        "zero_hit_layers",
        "two_form_equivalence",
        "hermitian_pairing",
        "lambda_bound",
        "density_reconstruction",
        "density_pathsum",
        "no_signaling",
    ):
        assert expected in names
    assert report.passed
    assert all(check.max_error < 1e-10 for check in report.checks)


def test_three_particle_report_has_closure_check():
    circuit = random_circuit(np.random.default_rng(5), 3, 3)
    report = verify_circuit(circuit)
    names = [check.name for check in report.checks]
    assert "three_closure" in names and "general_subsystem" in names
    assert report.passed


def test_four_particle_report_passes():
    circuit = random_circuit(np.random.default_rng(7), 4, 3)
    report = verify_circuit(circuit)
    assert report.passed
    assert "general_subsystem" in [check.name for check in report.checks]


def test_impossible_tolerance_fails_and_exits_one(tmp_path):
    path = tmp_path / "c.json"
    save_circuit(random_circuit(np.random.default_rng(11), 2, 4), str(path))
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(["verify", "--circuit", str(path), "--tol", "1e-18"])
    assert code == 1
    assert json.loads(out.getvalue())["pass"] is False


def test_report_json_shape():
    report = verify_circuit(build_epr_circuit(np.eye(2), np.eye(2)))
    raw = report.to_json()
    assert raw["schema"] == 1
    assert set(raw) == {"schema", "circuit", "checks", "pass"}
    assert all(set(c) == {"name", "max_error", "tolerance", "pass"} for c in raw["checks"])
    timed = report.to_json(with_timings=True)
    assert all("timing_ms" in c for c in timed["checks"])
