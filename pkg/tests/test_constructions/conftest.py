import pytest

from steinbias.utils import confirm_dc_type


@pytest.fixture
def build(suite):
    """Construct an experiment of class ``cls`` from raw toml-style keys, validated like the loader does."""

    def make(cls, name="demo", **raw):
        config = confirm_dc_type(raw, cls.config)
        is_valid, reason = config.validate()
        assert is_valid, reason
        return cls(name, config, suite)

    return make


@pytest.fixture
def exercise(rng):
    def run(construction, size):
        construction.prepare(rng)
        moments = construction.moments(rng)
        draws = construction.draws(construction.sample(rng, size))
        return moments, draws

    return run
