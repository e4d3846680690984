import json

import numpy as np
from pytest import mark

from csgrav.services.reporting import CheckCollector, dumps, format_float, write_history_csv
from csgrav.services.suites import SuiteOutcome


@mark.parametrize(("value", "text"), [
    (0.1, "0.10000000000000001"),
    (-2.0, "-2"),
    (float("inf"), '"Infinity"'),
    (float("-inf"), '"-Infinity"'),
    (float("nan"), '"NaN"'),
])
def test_format_float(value, text):
    assert format_float(value) == text


def test_dumps_sorts_keys_and_normalizes_numpy():
    text = dumps({"b": np.float64(1.5), "a": [np.int64(3), np.bool_(True), None], "c": {}})
    assert json.loads(text) == {"a": [3, True, None], "b": 1.5, "c": {}}
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')


def test_check_collector_comparisons():
    tolerances = {"small": 1e-9, "large": 10.0}
    checks = CheckCollector(tolerances.__getitem__)
    assert checks.add("small", "residual vanishes", 1e-12).status == "PASS"
    assert checks.add("large", "reduction", 5.0, comparison="ge").status == "FAIL"
    explicit = checks.add("custom", "explicit tolerance", 0.5, tolerance=1.0)
    assert explicit.status == "PASS" and explicit.tolerance == 1.0
    keyed = checks.add("small_2", "shared tolerance", 1e-8, key="small")
    assert keyed.status == "FAIL" and keyed.tolerance == 1e-9
    assert not SuiteOutcome(checks.records, {}).passed
    assert SuiteOutcome(checks.records[:1], {}).passed


def test_zero_tolerance_passes_only_exact_zero():
    checks = CheckCollector(lambda name: 0.0)
    assert checks.add("exact", "exact", 0.0).status == "PASS"
    assert checks.add("rounded", "rounded", 1e-17).status == "FAIL"


def test_history_csv(tmp_path):
    path = tmp_path / "nested" / "history.csv"
    write_history_csv(
        [{"iter": 0, "objective": 1.0, "step": 0.0, "action_pg": 0.25, "action_cs": None}], str(path)
    )
    lines = path.read_text().splitlines()
    assert lines == ["iter,objective,step,action_pg,action_cs", "0,1,0,0.25,"]
