"""Smoke test for the tsem Python bindings.

Builds the extension with cargo unless TSEM_LIB points at a built library,
then exercises loading, simulation, checking and equivalence testing.
"""

import json
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[3]
FIXTURES = ROOT / "crates" / "core" / "fixtures"


def import_tsem():
    lib = os.environ.get("TSEM_LIB")
    if lib is None:
        subprocess.run(["cargo", "build", "--release", "-p", "tsem-py"], cwd=ROOT, check=True)
        lib = ROOT / "target" / "release" / "libtsem_py.so"
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(tmp, "tsem.so"))
    sys.path.insert(0, tmp)
    import tsem

    return tsem


def main():
    tsem = import_tsem()

    rocks = tsem.Model.load(str(FIXTURES / "rocks.model.json"))
    scenario = (FIXTURES / "rocks.scenario.json").read_text()
    assert rocks.exogenous == ["U_ST", "U_BT"], rocks.exogenous
    assert not rocks.is_delayed

    states = rocks.simulate(scenario, 4)
    assert len(states) == 4 and list(states[0]) == ["ST", "BT", "BS"], states
    prefix, loop = rocks.periodic(scenario, intervene="BT@0:=1")
    assert prefix[1]["BS"] == 1 and loop[0]["BS"] == 0, (prefix, loop)
    assert rocks.check(scenario, 0, "[BT@0:=1] X (BS=1)") is True

    try:
        rocks.check(scenario, 0, "G (")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed formula accepted")

    delayed = tsem.Model.load(str(FIXTURES / "rocks_delayed.model.json"))
    assert delayed.is_delayed
    compiled = json.loads(delayed.compile_delays())
    assert compiled["kind"] == "onestep"

    coarse = tsem.Model.load(str(FIXTURES / "deadline_coarse.model.json"))
    fine = tsem.Model.load(str(FIXTURES / "deadline_fine.model.json"))
    cx = tsem.equivalence_counterexample(coarse, fine, ["Start", "Pass"], samples=100, seed=1)
    assert cx is not None and cx["direction"] in ("a->b", "b->a"), cx
    assert tsem.equivalence_counterexample(coarse, fine, ["Start", "Pass"], rescale=3) is None

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
