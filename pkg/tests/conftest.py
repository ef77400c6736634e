import sys

import pytest

from lader import synthbench

CLI = [sys.executable, "-m", "lader.cli"]

BENCH_SPEC = synthbench.SynthSpec(n_topics=8, docs_per_topic=50, queries_per_topic=10,
                                  dim=16, click_noise=0.1, seed=7)


@pytest.fixture(scope="session")
def bench():
    """The reference synthetic benchmark used across acceptance-style tests."""
    return synthbench.generate(BENCH_SPEC)


@pytest.fixture(scope="session")
def small_synth():
    """A smaller, faster corpus for plumbing tests."""
    return synthbench.generate(synthbench.SynthSpec(
        n_topics=4, docs_per_topic=12, queries_per_topic=6, dim=8,
        click_noise=0.1, seed=3))
