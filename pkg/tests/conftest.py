import pytest

from capvm import corpus
from capvm.capsule import CapsuleManager
from capvm.client import Client, ClientConfig
from capvm.device import Device, DeviceConfig, LoopbackTransport
from capvm.hostapi import HostEnv

TEMP_SENSOR = {"label": "temperature", "waveform": {"kind": "constant", "value": 20.0}}


def make_env(**kw) -> HostEnv:
    return HostEnv(rng_seed=kw.pop("rng_seed", 42), **kw)


def make_manager(**kw) -> CapsuleManager:
    env = kw.pop("env", None) or make_env()
    return CapsuleManager(env, **kw)


def make_device(**kw) -> Device:
    preloads = kw.pop("preloads", ())
    cfg = DeviceConfig(sensors=kw.pop("sensors", [dict(TEMP_SENSOR)]),
                       rng_seed=kw.pop("rng_seed", 42), **kw)
    return Device(cfg, preloads)


def make_client(dev: Device, **kw) -> Client:
    return Client(LoopbackTransport(dev), ClientConfig(**kw))


@pytest.fixture
def manager():
    return make_manager()


@pytest.fixture
def device():
    return make_device()


@pytest.fixture
def loop_client(device):
    return make_client(device)


@pytest.fixture(scope="session")
def corpus_bytes():
    return {name: corpus.load(name) for name in corpus.ENTRIES}
