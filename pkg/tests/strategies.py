"""Hypothesis strategies shared by the test modules."""

from hypothesis import strategies as st

from sdpfit.generators import RandomProfile, gen_random


def random_instances(kind="congestion", mode="general", players=(1, 4), resources=(1, 3), strategies=3, zero_weight=0.0):
    """Hypothesis strategy: a seeded random instance with a drawn shape."""
    return st.builds(
        lambda seed, n, m, grid: gen_random(
            seed,
            RandomProfile(
                players=n,
                resources=m,
                max_strategies=strategies,
                max_strategy_size=2,
                kind=kind,
                mode=mode,
                grid=0.5 if grid else None,
                zero_weight_prob=zero_weight,
            ),
        ),
        st.integers(0, 2**32 - 1),
        st.integers(*players),
        st.integers(*resources),
        st.booleans(),
    )
