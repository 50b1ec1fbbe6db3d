import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("rfnet", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rfnet")

ACCEPTANCE_LINES = []   # filled by test_acceptance.py, echoed in the terminal summary


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_wifi():
    """Three small Wi-Fi environments, three classes, four observations each."""
    from rfnet.signal_sim import RadioConfig, build_dataset, default_class_specs

    radio = RadioConfig.wifi(K=16, L=8, Nr=2)
    return build_dataset(radio, 3, default_class_specs(3), obs_per_env_per_class=4, master_seed=3)


@pytest.fixture(scope="session")
def default_benchmark():
    """The default desk-scale Wi-Fi benchmark split 16/4 by environment and z-scored on the training side."""
    from rfnet.signal_sim import RadioConfig, build_dataset, normalize_dataset

    radio = RadioConfig.wifi()
    ds = build_dataset(radio, 20, master_seed=0)
    train, (test,), _ = normalize_dataset(ds.subset(range(16)), [ds.subset(range(16, 20))])
    return radio, train, test


@pytest.fixture(scope="session")
def toy_data():
    """Four environments shaped for the toy network (8 x 4 x 1), three classes, six observations each."""
    from rfnet.signal_sim import RadioConfig, build_dataset, default_class_specs, normalize_dataset

    ds = build_dataset(RadioConfig.wifi(K=8, L=4, Nr=1), 4, default_class_specs(3), obs_per_env_per_class=6,
                       master_seed=11)
    return normalize_dataset(ds)[0]


@pytest.fixture(scope="session")
def trained(default_benchmark):
    """``trained(method, seed)``: a TrainResult on the 16 benchmark training environments, cached per session.

    ``trained.seconds[(method, seed)]`` records the wall-clock training time.
    """
    import time

    from rfnet.baselines import train_method
    from rfnet.base_network import BaseNetConfig
    from rfnet.meta import TrainConfig

    radio, train, _ = default_benchmark
    cache = {}

    def get(method, seed):
        if (method, seed) not in cache:
            t0 = time.perf_counter()
            cache[method, seed] = train_method(method, train, BaseNetConfig.for_radio(radio), TrainConfig(), seed)
            get.seconds[method, seed] = time.perf_counter() - t0
        return cache[method, seed]

    get.seconds = {}
    return get
