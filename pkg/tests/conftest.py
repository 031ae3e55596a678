import numpy as np
import pytest
from scipy import stats

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def chisquare_pvalue(samples, support_lo, probs, min_expected=5.0):
    """Goodness-of-fit p-value of integer ``samples`` against ``probs`` on
    ``[support_lo, support_lo + len(probs))``.  Bins with small expected
    counts are pooled into one."""
    samples = np.asarray(samples)
    probs = np.asarray(probs, dtype=float)
    counts = np.bincount(samples - support_lo, minlength=probs.size)
    assert counts.size == probs.size, "samples outside the support"
    assert counts[probs == 0].sum() == 0, "samples where the pmf is zero"
    counts, probs = counts[probs > 0], probs[probs > 0]
    expected = probs * samples.size
    big = expected >= min_expected
    obs = list(counts[big])
    exp = list(expected[big])
    if (~big).any():
        obs.append(counts[~big].sum())
        exp.append(expected[~big].sum())
    obs, exp = np.array(obs, float), np.array(exp, float)
    exp *= obs.sum() / exp.sum()
    return stats.chisquare(obs, exp).pvalue


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
