import pytest

from mpbap.oracle import enumerate_optimum, micro_instance
from mpbap.search import SolveOptions, solve

MICRO_SEEDS = range(60)


@pytest.fixture(scope="session")
def micro_suite():
    """(instance, enumerated optimum) for every micro seed."""
    out = []
    for seed in MICRO_SEEDS:
        inst = micro_instance(seed)
        out.append((inst, enumerate_optimum(inst).cost))
    return out


@pytest.fixture(scope="session")
def micro_solves(micro_suite):
    """Lazily solved micro suite, cached per cut policy."""
    cache = {}

    def get(policy):
        if policy not in cache:
            opts = SolveOptions(cut_policy=policy, time_limit=60.0)
            cache[policy] = [solve(inst, opts) for inst, _ in micro_suite]
        return cache[policy]

    return get
