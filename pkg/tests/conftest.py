import numpy as np
import hypothesis.strategies as st
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def h2(p):
    p = np.asarray(p, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.where((p <= 0) | (p >= 1), 0.0, out)


@st.composite
def pmf_arrays(draw, k, min_mass=0.0):
    w = draw(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=k, max_size=k))
    w = np.asarray(w) + 1e-3 + min_mass
    return w / w.sum()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
