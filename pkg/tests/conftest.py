import numpy as np
import pytest
from hypothesis import settings

from wasscov._grid import quantile_grid
from wasscov.estimation import QuantileEnsemble

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion (printed in the summary)."""

    def _report(number, name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


@pytest.fixture
def tgrid():
    return quantile_grid(1000)


def random_ensemble(rng, n, p, tgrid, shapes=True):
    """Random quantile ensemble; with ``shapes`` each cell mixes three base shapes."""
    t = tgrid
    bases = np.stack([t - 0.5, np.sign(t - 0.5) * np.abs(2 * t - 1) ** 1.5 / 2, np.sin(np.pi * (t - 0.5)) / 2])
    mu = rng.normal(size=(n, p)) @ np.triu(rng.normal(size=(p, p)))
    sigma = np.exp(rng.normal(scale=0.4, size=(n, p)))
    if shapes:
        w = rng.dirichlet(np.ones(3), size=(n, p))
        shape = np.einsum("ijk,km->ijm", w, bases)
    else:
        shape = np.broadcast_to(bases[0], (n, p, t.size))
    return QuantileEnsemble(mu[..., None] + sigma[..., None] * shape, t)
