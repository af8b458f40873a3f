import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from careflow.eventlog import DemographicRecord, EventInstance, EventLog, Trace

HOUR_MS = 3_600_000
T0 = 1_700_000_000_000


def make_trace(case_id, names, start=T0, gap_ms=HOUR_MS, outcome=None, age=50,
               insurance="Private", prior=1, admit=None):
    """Trace from event names with evenly spaced timestamps."""
    instances = [
        EventInstance(name, start + i * gap_ms) for i, name in enumerate(names)
    ]
    if outcome is None:
        outcome = 1 if names[-1] == "DEATH" else 0
    return Trace(
        case_id=case_id,
        instances=instances,
        demographics=DemographicRecord(age=age, insurance=insurance),
        outcome=outcome,
        admit_timestamp=start if admit is None else admit,
        prior_admissions=prior,
    )


def make_log(traces_names, **kwargs):
    """EventLog from a list of event-name sequences."""
    traces = [
        make_trace(f"c{i}", names, **kwargs) for i, names in enumerate(traces_names)
    ]
    return EventLog(traces=traces)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criteria pass/fail lines past output capture."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synth_log():
    from careflow.synth import CohortConfig, generate_log

    return generate_log(CohortConfig(n_patients=150, seed=11))


@pytest.fixture(scope="session")
def full_synth_log():
    from careflow.synth import CohortConfig, generate_log

    return generate_log(CohortConfig(n_patients=1017, seed=7))
