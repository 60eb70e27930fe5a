"""Corpus generator determinism and the checked-in corpus files."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from sumpaths.circuits import circuit_digest, dumps_canonical, unitarity_defect, validate_circuit
from sumpaths.corpus import (
    GENERATOR_VERSION,
    random_circuit,
    random_single,
    shipped_corpus,
)

CORPUS_DIR = Path(__file__).resolve().parent.parent / "corpus"


def test_random_single_is_unitary():
    rng = np.random.default_rng(1)
    for _ in range(50):
        assert unitarity_defect(random_single(rng)) < 1e-12


def test_random_circuit_is_reproducible():
    one = random_circuit(np.random.default_rng(9), 3, 4)
    two = random_circuit(np.random.default_rng(9), 3, 4)
    assert dumps_canonical(one) == dumps_canonical(two)


def test_corpus_spans_the_required_grid():
    rows = shipped_corpus()
    assert len(rows) >= 50
    seen = {(c.particles, c.n) for _, _, c in rows}
    assert {(2, n) for n in range(1, 9)} <= seen
    assert {(3, n) for n in range(1, 6)} <= seen
    assert {(4, n) for n in range(1, 5)} <= seen


def test_checked_in_corpus_matches_generator():
    manifest = json.loads((CORPUS_DIR / "manifest.json").read_text())
    assert manifest["generator_version"] == GENERATOR_VERSION
    rows = {name: circuit for name, _, circuit in shipped_corpus()}
    assert len(manifest["circuits"]) == len(rows)
    for entry in manifest["circuits"]:
        name = entry["file"].removesuffix(".json")
        regenerated = rows[name]
        on_disk = (CORPUS_DIR / entry["file"]).read_text()
        assert on_disk == dumps_canonical(regenerated)
        assert entry["digest"] == circuit_digest(regenerated)
        assert circuit_digest(validate_circuit(json.loads(on_disk))) == entry["digest"]


def test_corpus_contains_interaction_free_layers():
    # the generator must leave some layers without phase gates so the
    # exact-zero-hit property is actually exercised
    gateless = 0
    for _, _, circuit in shipped_corpus():
        gateless += sum(1 for layer in circuit.layers if not layer.phases)
    assert gateless > 10
