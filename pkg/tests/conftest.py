import dataclasses

import numpy as np
import pytest

from isac_ot.aibot import prepare
from isac_ot.scenario import ScenarioConfig, build_scenario, desk_config


def tiny_config(bs, uavs, **kw) -> ScenarioConfig:
    """Explicit geometry; ``uavs`` lists K cooperative positions then the target."""
    bs = tuple(tuple(map(float, p)) for p in bs)
    uavs = tuple(tuple(map(float, p)) for p in uavs)
    base = dict(M=len(bs), K=len(uavs) - 1, bs_positions=bs, uav_positions=uavs,
                sample_count=kw.pop("sample_count", 500), rng_seed=kw.pop("rng_seed", 3))
    base.update(kw)
    return ScenarioConfig(**base)


def tiny_scenario(bs, uavs, theta2=1.0, **kw):
    sc = build_scenario(tiny_config(bs, uavs, **kw))
    return sc.with_theta2(theta2) if theta2 is not None else prepare(sc)


@pytest.fixture(scope="session")
def desk():
    return build_scenario(desk_config())


@pytest.fixture(scope="session")
def desk_prepared(desk):
    return prepare(desk)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def replace(cfg, **kw):
    return dataclasses.replace(cfg, **kw)
