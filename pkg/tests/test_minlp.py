import math

import numpy as np
import pytest

from lpconc import InvalidData, InvalidParameter
from lpconc.engine import StrategyParams, run_strategy
from lpconc.minlp import ModelDocument, engine_assignment, export_minlp, required_big_m
from lpconc.optimizer import saa_objective
from lpconc.stochastic import GbmParams, sample_gbm_paths

W = 1e5
PARAMS = StrategyParams(alpha=2.0, gas_cost=109.8, trade_fee=0.0005)


def _paths(S, T, sigma=0.02, seed=0):
    return sample_gbm_paths(GbmParams(sigma, 1350.0), S, T, seed)


@pytest.mark.parametrize("S, T", [(1, 1), (2, 2), (3, 6)])
def test_template_counts(S, T):
    doc = export_minlp(_paths(S, T), 1e-4, (1.01, 4.0), PARAMS, W)
    assert len(doc.binaries) == 4 * T * S
    assert len(doc.variables) == (20 * T - 4) * S + 3
    assert len(doc.constraints) == (64 * T - 29) * S + 2
    names = [v.name for v in doc.variables] + doc.binaries
    assert len(set(names)) == len(names)
    assert {"alpha", "ainv", "amult"} <= set(names)


def test_round_trip_is_identical():
    doc = export_minlp(_paths(2, 3), np.array([1e-4, 2e-4, 3e-4]), (1.01, 4.0), PARAMS, W, seed=7)
    text = doc.to_text()
    again = ModelDocument.parse(text)
    assert again == doc
    assert again.to_text() == text
    assert doc.params["seed"] == "7"


def test_engine_policy_is_feasible_and_objective_matches():
    paths = _paths(3, 6, sigma=0.05, seed=2)
    for alpha in (1.02, 1.05, 1.6, 3.5):
        params = PARAMS.with_alpha(alpha)
        runs = [run_strategy(p, 2e-4, params, W) for p in paths]
        assert any(r.reallocation_count for r in runs) or alpha > 1.1
        doc = export_minlp(paths, 2e-4, (1.01, 4.0), PARAMS, W)
        assignment = engine_assignment(runs, paths, params)
        violations = [v for v in doc.evaluate(assignment) if v[1] > 1e-9]
        assert violations == []
        assert doc.objective_value(assignment) == pytest.approx(
            saa_objective(alpha, paths, 2e-4, params, W), rel=1e-12
        )


def test_violations_are_reported():
    paths = _paths(1, 3, sigma=0.05, seed=2)
    params = PARAMS.with_alpha(1.05)
    runs = [run_strategy(p, 2e-4, params, W) for p in paths]
    doc = export_minlp(paths, 2e-4, (1.01, 4.0), PARAMS, W)
    assignment = engine_assignment(runs, paths, params)
    assignment["L[0,0]"] *= 1.01
    flagged = {name for name, v in doc.evaluate(assignment) if v > 1e-6}
    assert {"init_L[0]", "def_Lil[0,0]"} <= flagged
    assignment["zl[0,1]"] = 0.5
    assert ("binary:zl[0,1]", 0.5) in doc.evaluate(assignment)


def test_degenerate_flat_model():
    paths = np.full((1, 2), math.sqrt(1350.0))
    doc = export_minlp(paths, 0.0, (1.01, 4.0), PARAMS, W)
    for alpha in (1.01, 2.0, 4.0):
        params = PARAMS.with_alpha(alpha)
        a = engine_assignment([run_strategy(paths[0], 0.0, params, W)], paths, params)
        assert not [v for v in doc.evaluate(a) if v[1] > 1e-12]
        assert doc.objective_value(a) == pytest.approx(W, rel=1e-14)


def test_big_m_validation():
    paths = _paths(2, 3)
    need = required_big_m(paths, 1e-4, (1.01, 4.0), PARAMS, W)
    assert need > 0.0
    doc = export_minlp(paths, 1e-4, (1.01, 4.0), PARAMS, W)
    assert float(doc.params["big_m"]) == pytest.approx(4 * need)
    export_minlp(paths, 1e-4, (1.01, 4.0), PARAMS, W, big_m=need)
    with pytest.raises(InvalidParameter):
        export_minlp(paths, 1e-4, (1.01, 4.0), PARAMS, W, big_m=0.5 * need)
    with pytest.raises(InvalidParameter):
        export_minlp(paths, 1e-4, (1.0, 4.0), PARAMS, W)


def test_parse_rejects_garbage():
    with pytest.raises(InvalidData):
        ModelDocument.parse("hello\n")
    with pytest.raises(InvalidData):
        ModelDocument.parse("MODEL lpconc-saa 1\nFOO bar\n")
    with pytest.raises(InvalidData):
        ModelDocument.parse("MODEL lpconc-saa 1\nCON c: 1 x\nEND\n")
