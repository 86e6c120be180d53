import socket
import threading

import pytest

from boulescope import protocol
from boulescope.device import DeviceEmulator
from boulescope.sensor import EnvironmentConfig


def run_conversation(device, requests):
    """Drive handle_connection over a socketpair; returns raw reply lines."""
    client, server = socket.socketpair()

    def serve():
        # close the server side on exit so the client sees EOF
        with server, server.makefile("rb") as sr, server.makefile("wb") as sw:
            device.handle_connection(sr, sw)

    with client:
        worker = threading.Thread(target=serve, daemon=True)
        worker.start()
        cw = client.makefile("wb")
        for line in requests:
            cw.write(line)
        cw.flush()
        client.shutdown(socket.SHUT_WR)
        cr = client.makefile("rb")
        lines = cr.readlines()
        worker.join(timeout=5)
    return lines


def zero_noise_device(scene=None, **kwargs):
    return DeviceEmulator(
        scene or {"P1-1": 3.0}, EnvironmentConfig.noiseless(), **kwargs
    )


def test_first_frame_is_hello():
    lines = run_conversation(zero_noise_device(), [])
    assert len(lines) == 1
    msg = protocol.decode(lines[0])
    assert isinstance(msg, protocol.Hello)
    assert msg.device_id == "jack-01"


def test_zero_noise_report():
    lines = run_conversation(
        zero_noise_device(),
        [protocol.encode(protocol.MeasureRequest("q1", "P1-1"))],
    )
    report = protocol.decode(lines[1])
    assert isinstance(report, protocol.MeasurementReport)
    assert report.request_id == "q1"
    assert report.distance_cm == 3.0
    assert report.environment == "indoor"


def test_out_of_range_scene_yields_device_error():
    device = zero_noise_device({"P1-1": 450.0})
    lines = run_conversation(
        device, [protocol.encode(protocol.MeasureRequest("q1", "P1-1"))]
    )
    err = protocol.decode(lines[1])
    assert isinstance(err, protocol.DeviceError)
    assert err.code == "out_of_range"
    assert err.request_id == "q1"


def test_unknown_boule_yields_malformed():
    lines = run_conversation(
        zero_noise_device(), [protocol.encode(protocol.MeasureRequest("q1", "ghost"))]
    )
    err = protocol.decode(lines[1])
    assert isinstance(err, protocol.DeviceError)
    assert err.code == "malformed"


def test_requests_answered_in_arrival_order():
    device = zero_noise_device({"P1-1": 3.0, "P1-2": 7.5})
    requests = [
        protocol.encode(protocol.MeasureRequest(f"q{i}", "P1-1" if i % 2 else "P1-2"))
        for i in range(6)
    ]
    lines = run_conversation(device, requests)
    ids = [protocol.decode(line).request_id for line in lines[1:]]
    assert ids == [f"q{i}" for i in range(6)]


def test_undecodable_frames_are_dropped_not_answered():
    device = zero_noise_device()
    lines = run_conversation(
        device,
        [
            b"garbage\n",
            b'{"type":"warp"}\n',
            protocol.encode(protocol.Hello("x", "y")),
            protocol.encode(protocol.MeasureRequest("q1", "P1-1")),
        ],
    )
    # hello + single report; nothing for the junk
    assert len(lines) == 2
    assert protocol.decode(lines[1]).request_id == "q1"


def test_reply_stream_deterministic_per_seed():
    scene = {"P1-1": 3.0, "P2-1": 15.0}
    requests = [
        protocol.encode(protocol.MeasureRequest(f"q{i}", bid))
        for i, bid in enumerate(["P1-1", "P2-1", "P1-1", "P2-1"])
    ]

    def stream(seed):
        device = DeviceEmulator(scene, EnvironmentConfig.indoor(), seed=seed)
        return b"".join(run_conversation(device, list(requests)))

    assert stream(42) == stream(42)
    assert stream(42) != stream(43)


def test_scene_edit_changes_later_readings():
    device = zero_noise_device({"P1-1": 3.0})
    lines = run_conversation(
        device, [protocol.encode(protocol.MeasureRequest("q1", "P1-1"))]
    )
    assert protocol.decode(lines[1]).distance_cm == 3.0
    device.set_distance("P1-1", 25.4)
    lines = run_conversation(
        device, [protocol.encode(protocol.MeasureRequest("q2", "P1-1"))]
    )
    assert protocol.decode(lines[1]).distance_cm == 25.4


def test_tcp_round_trip():
    device = zero_noise_device({"P1-1": 3.0})
    host, port = device.start()
    try:
        with socket.create_connection((host, port), timeout=5) as conn:
            r, w = conn.makefile("rb"), conn.makefile("wb")
            hello = protocol.decode(r.readline())
            assert isinstance(hello, protocol.Hello)
            w.write(protocol.encode(protocol.MeasureRequest("q1", "P1-1")))
            w.flush()
            report = protocol.decode(r.readline())
            assert report.distance_cm == 3.0
    finally:
        device.stop()


def test_tcp_serves_connections_sequentially():
    device = zero_noise_device({"P1-1": 3.0})
    host, port = device.start()
    try:
        for attempt in range(3):
            with socket.create_connection((host, port), timeout=5) as conn:
                r, w = conn.makefile("rb"), conn.makefile("wb")
                assert isinstance(protocol.decode(r.readline()), protocol.Hello)
                w.write(protocol.encode(protocol.MeasureRequest(f"q{attempt}", "P1-1")))
                w.flush()
                assert protocol.decode(r.readline()).request_id == f"q{attempt}"
    finally:
        device.stop()


def test_rejects_empty_scene():
    with pytest.raises(ValueError):
        DeviceEmulator({}, EnvironmentConfig.noiseless())


def test_rejects_out_of_band_latency():
    with pytest.raises(ValueError):
        DeviceEmulator({"P1-1": 3.0}, EnvironmentConfig.noiseless(), latency_ms=9000)
