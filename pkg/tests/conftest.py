import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


_ENSEMBLES = {}


def cached_traces(config):
    """Traces of an ensemble, computed once per test session."""
    from infobandit.harness import run_traces

    if config not in _ENSEMBLES:
        _ENSEMBLES[config] = run_traces(config)
    return _ENSEMBLES[config]


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
