"""Device server: routing, control verbs, failure mapping, liveness."""

import json
import random

import pytest

from capvm import coap, corpus, secure
from capvm.client import RequestTimeout
from capvm.device import ConfigError, DeviceConfig, RouteTarget, route
from conftest import TEMP_SENSOR, make_client, make_device

GK = b"\x01" * 16  # DeviceConfig default gatekeeper key


# ---------------------------------------------------------------- route

def test_route_examples():
    prefixes = {"vm1": object()}
    t = route(["vm1", "sensor1", "temp"], prefixes)
    assert t == RouteTarget("capsule", "vm1", "sensor1/temp")
    assert route(["vm-control", "vm1"], prefixes).kind == "control"
    assert route([], prefixes).kind == "not_found"
    assert route(["nope"], prefixes).kind == "not_found"
    assert route(["vm1"], prefixes) == RouteTarget("capsule", "vm1", "")


def test_reserved_prefix_never_routes_to_capsules():
    assert route(["vm-control"], {"vm-control": object()}).kind == "control"


# ------------------------------------------------------------- transport

def test_envelope_failures_map_to_401(device):
    sealed = secure.seal(device.config.psk, 9, 1, coap.encode(coap.request(coap.GET, "/")))
    tampered = bytearray(sealed)
    tampered[-5] ^= 1
    reply_raw = device.process_datagram(bytes(tampered))
    reply = _open(device, reply_raw)
    assert reply.code == coap.UNAUTHORIZED

    # replay of a previously accepted envelope
    ok = device.process_datagram(sealed)
    assert _open(device, ok).code in (coap.NOT_FOUND,)
    replayed = device.process_datagram(sealed)
    assert _open(device, replayed).code == coap.UNAUTHORIZED


def test_wrong_key_maps_to_401(device):
    sealed = secure.seal(b"\x99" * 16, 9, 1, b"whatever")
    assert _open(device, device.process_datagram(sealed)).code == coap.UNAUTHORIZED


def test_coap_decode_error_maps_to_400(device):
    sealed = secure.seal(device.config.psk, 9, 1, b"\x00\x01")
    assert _open(device, device.process_datagram(sealed)).code == coap.BAD_REQUEST


def _open(device, raw):
    w = secure.ReplayWindow()
    _, _, body = secure.open_envelope(device.config.psk, w, raw)
    return coap.decode(body)


def test_con_gets_ack_non_gets_non(device, loop_client):
    reply = loop_client.request(coap.GET, "/vm-control", mtype=coap.CON)
    assert reply.mtype == coap.ACK
    reply = loop_client.request(coap.GET, "/vm-control", mtype=coap.NON)
    assert reply.mtype == coap.NON


def test_token_echoed(device, loop_client):
    reply = loop_client.get("/vm-control")
    assert reply.token != b""


# ---------------------------------------------------------- vm-control

def test_control_deploy_update_delete_list(loop_client):
    r = loop_client.deploy("vm1", corpus.load_stamped("sensor_v1"))
    assert r.code == coap.CREATED
    assert json.loads(r.payload)["version"] == 1

    listing = loop_client.list_capsules()
    assert listing[0]["id"] == "vm1"

    r = loop_client.update("vm1", corpus.load_stamped("sensor_v2"))
    assert r.code == coap.CHANGED
    assert json.loads(r.payload)["version"] == 2

    r = loop_client.delete("vm1")
    assert r.code == coap.DELETED
    assert loop_client.list_capsules() == []
    assert loop_client.delete("vm1").code == coap.NOT_FOUND


def test_control_run_ephemeral(loop_client):
    r = loop_client.run_ephemeral(corpus.load_stamped("fib_eph"), b"10")
    assert r.code == coap.CONTENT
    assert r.payload == b"55"


def test_unstamped_upload_rejected(loop_client):
    r = loop_client.request(coap.PUT, "/vm-control/vm1", corpus.load("sensor_v1"))
    assert r.code == coap.UNAUTHORIZED
    assert loop_client.list_capsules() == []


def test_wrong_key_stamp_rejected(loop_client):
    pkg = secure.gate_stamp(b"\x42" * 16, corpus.load("sensor_v1"))
    r = loop_client.request(coap.PUT, "/vm-control/vm1", pkg)
    assert r.code == coap.UNAUTHORIZED


def test_budget_exceeded_maps_to_413():
    dev = make_device(ram_budget=20_000)
    client = make_client(dev)
    r = client.deploy("vm1", corpus.load_stamped("sensor_v1"))
    assert r.code == coap.REQUEST_TOO_LARGE


def test_init_failure_maps_to_500(loop_client):
    r = loop_client.deploy("bad", corpus.load_stamped("adv_badinit"))
    assert r.code == coap.INTERNAL_ERROR
    assert r.payload == b"InitFailed"


def test_reserved_prefix_deploy_rejected(loop_client):
    r = loop_client.request(coap.PUT, "/vm-control/well-known",
                            corpus.load_stamped("kv"))
    assert r.code == coap.BAD_REQUEST


def test_control_bad_verbs(loop_client):
    assert loop_client.request(coap.POST, "/vm-control").code == \
        coap.METHOD_NOT_ALLOWED
    assert loop_client.request(coap.PUT, "/vm-control").code == coap.BAD_REQUEST
    assert loop_client.request(coap.PUT, "/vm-control/a/b", b"").code == \
        coap.BAD_REQUEST


# ------------------------------------------------------- capsule serving

def test_get_through_capsule(loop_client):
    loop_client.deploy("vm1", corpus.load_stamped("sensor_v1"))
    r = loop_client.get("/vm1/sensor1/temp")
    assert r.code == coap.CONTENT
    assert r.payload == b"20.03"  # 20.0 plus first rng draw mod 10 = 3 centi


def test_capsule_404_vs_device_404(loop_client):
    loop_client.deploy("vm1", corpus.load_stamped("sensor_v1"))
    assert loop_client.get("/vm1/nothing").code == coap.NOT_FOUND
    assert loop_client.get("/ghost/x").code == coap.NOT_FOUND


def test_trap_and_fuel_map_to_500_and_keep_serving(loop_client):
    loop_client.deploy("mal", corpus.load_stamped("adv_spin_handler"))
    assert loop_client.get("/mal/spin").code == coap.INTERNAL_ERROR
    assert loop_client.get("/mal/oob").code == coap.INTERNAL_ERROR
    assert loop_client.get("/mal/empty").code == coap.INTERNAL_ERROR
    r = loop_client.get("/mal/ok")
    assert (r.code, r.payload) == (coap.CONTENT, b"alive")


def test_method_not_allowed_into_capsule(loop_client):
    loop_client.deploy("vm1", corpus.load_stamped("kv"))
    r = loop_client.request(0x07, "/vm1/x")  # unknown method code
    assert r.code == coap.METHOD_NOT_ALLOWED


# ---------------------------------------------------------------- config

def test_config_validation():
    with pytest.raises(ConfigError):
        DeviceConfig(ram_budget=0).validate()
    with pytest.raises(ConfigError):
        DeviceConfig(page_size_bytes=1000).validate()
    with pytest.raises(ConfigError):
        DeviceConfig(psk=b"short").validate()
    with pytest.raises(ConfigError):
        DeviceConfig.from_dict({"nonsense": 1})


def test_config_from_dict_roundtrip(tmp_path):
    cfg_json = {
        "device_id": "dev7", "sender_id": 7, "listen": "127.0.0.1:0",
        "psk_hex": "aa" * 16, "gatekeeper_key_hex": "bb" * 16,
        "ram_budget": 131072, "rng_seed": 3,
        "sensors": [TEMP_SENSOR], "page_size_bytes": 32768,
    }
    path = tmp_path / "dev.json"
    path.write_text(json.dumps(cfg_json))
    cfg = DeviceConfig.from_file(str(path))
    assert cfg.device_id == "dev7"
    assert cfg.psk == b"\xaa" * 16
    assert cfg.ram_budget == 131072


def test_preload_deploys_at_boot():
    dev = make_device(preloads=[("vm1", corpus.load_stamped("sensor_v1"))])
    client = make_client(dev)
    assert client.list_capsules()[0]["id"] == "vm1"


def test_preload_requires_valid_stamp():
    with pytest.raises(secure.BadStamp):
        make_device(preloads=[("vm1", b"\x00\x00\x00\x00" + b"junk" * 5)])


# -------------------------------------------------------------- liveness

def test_garbage_datagrams_never_crash_or_mutate(loop_client, device):
    loop_client.deploy("vm1", corpus.load_stamped("kv"))
    loop_client.put("/vm1/note", b"precious")
    rng = random.Random(1234)
    for _ in range(2000):
        blob = rng.randbytes(rng.randrange(0, 120))
        device.process_datagram(blob)  # must not raise
    r = loop_client.get("/vm1/note")
    assert r.payload == b"precious"
    assert loop_client.list_capsules()[0]["version"] == 1


def test_every_opened_request_gets_exactly_one_response(device, loop_client):
    loop_client.deploy("vm1", corpus.load_stamped("kv"))
    paths = ["/vm-control", "/vm1", "/vm1/count", "/vm1/nope", "/missing", "/"]
    for path in paths:
        reply = loop_client.get(path)
        assert reply.code in (coap.CONTENT, coap.NOT_FOUND)


# ------------------------------------------------------------ client side

def test_seq_persistence_across_client_instances(tmp_path, device):
    seq_file = str(tmp_path / "seq.json")
    c1 = make_client(device, seq_path=seq_file)
    c1.get("/vm-control")
    c2 = make_client(device, seq_path=seq_file)
    c2.get("/vm-control")  # fresh client, persisted seq: no self-replay
    first = json.load(open(seq_file))["next_seq"]
    c2.get("/vm-control")
    assert json.load(open(seq_file))["next_seq"] > first


def test_idempotent_reads(loop_client):
    loop_client.deploy("vm1", corpus.load_stamped("kv"))
    before = loop_client.list_capsules()
    loop_client.get("/vm1")
    loop_client.get("/vm1/nope")
    assert loop_client.list_capsules() == before


def test_client_timeout():
    class DeafTransport:
        def send(self, datagram, timeout=0.0):
            return None

    from capvm.client import Client, ClientConfig
    client = Client(DeafTransport(), ClientConfig(retries=2, timeout=0.01))
    with pytest.raises(RequestTimeout):
        client.get("/x")
