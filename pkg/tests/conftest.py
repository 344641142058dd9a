import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from svbias.synth import SubgroupScoreSpec, generate  # noqa: E402
from svbias.trials import SubgroupKey, assign_subgroups  # noqa: E402


def make_specs(params, n_target=400, n_nontarget=400, seed0=0, n_speakers=6):
    """params: list of (nationality, gender, target_mean) with nontarget N(0, 1)."""
    return [
        SubgroupScoreSpec(
            SubgroupKey((("nationality", nat), ("gender", g))),
            tm, 1.0, 0.0, 1.0, n_target, n_nontarget, seed0 + i, n_speakers,
        )
        for i, (nat, g, tm) in enumerate(params)
    ]


def synthetic_trialset(specs, attributes=("nationality", "gender")):
    trials, meta = generate(specs)
    return assign_subgroups(trials, meta, attributes), meta


@pytest.fixture
def two_group_files(tmp_path):
    """Trial + metadata files for a synthetic two-subgroup run."""
    from svbias.trials import write_metadata, write_trials

    specs = make_specs([("usa", "m", 2.0), ("india", "f", 1.0)], n_target=500, n_nontarget=500)
    trials, meta = generate(specs)
    scores = tmp_path / "trials.txt"
    metadata = tmp_path / "meta.csv"
    write_trials(trials.records, scores)
    write_metadata(meta, metadata, ["nationality", "gender"])
    return scores, metadata


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, ok, detail)."""

    def record(number, ok, detail=""):
        _ACCEPTANCE.append((number, request.node.name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_ACCEPTANCE, key=lambda r: (str(r[0]), r[1])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number} {name}: {detail}")
