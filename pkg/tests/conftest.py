import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from covertlink.harness.ota import random_psdu
from covertlink.ofdm import modulate

settings.register_profile(
    "covertlink",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("covertlink")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_packet(rng, mcs=7, octets=100):
    """A modulated packet carrying a random PSDU with a valid FCS."""
    bits = random_psdu(rng, octets)
    return modulate(bits, mcs), bits


def padded(x, lead=80, tail=80):
    return np.r_[np.zeros(lead), np.asarray(x), np.zeros(tail)]


# acceptance criteria report one line each; the lines are repeated in the
# terminal summary so they survive output capturing
_CRITERIA = {}


def record_criterion(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    _CRITERIA[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
