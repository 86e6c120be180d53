import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boulescope.protocol import (
    DeviceError,
    Hello,
    MalformedError,
    MeasureRequest,
    MeasurementReport,
    UnknownMessageError,
    decode,
    encode,
)


def test_hello_encodes_byte_exactly():
    wire = encode(Hello("jack-01", "emu-1.0"))
    assert wire == b'{"type":"hello","device_id":"jack-01","firmware":"emu-1.0"}\n'


def test_report_two_decimal_distance():
    wire = encode(MeasurementReport("r1", "P1-1", 3.0, 174.7, "indoor"))
    assert b'"distance_cm":3.00' in wire
    assert b'"echo_duration_us":174.7' in wire
    assert wire.endswith(b"\n")
    assert wire.count(b"\n") == 1


def test_request_encoding():
    wire = encode(MeasureRequest("q7", "P2-3"))
    assert wire == b'{"type":"measure_request","request_id":"q7","boule_id":"P2-3"}\n'


def test_device_error_encoding():
    wire = encode(DeviceError("q7", "out_of_range", "reading 1.98 cm below 2 cm"))
    assert wire.startswith(b'{"type":"device_error","request_id":"q7","code":"out_of_range"')


def test_device_error_rejects_unknown_code():
    with pytest.raises(ValueError):
        DeviceError("q1", "warp", "nope")


def test_decode_tolerates_field_reordering():
    msg = decode(b'{"firmware":"emu-1.0","device_id":"jack-01","type":"hello"}')
    assert msg == Hello("jack-01", "emu-1.0")


def test_decode_unknown_type():
    with pytest.raises(UnknownMessageError):
        decode(b'{"type":"warp"}')


def test_decode_missing_field():
    with pytest.raises(MalformedError):
        decode(b'{"type":"hello","device_id":"jack-01"}')


def test_decode_truncated_line():
    with pytest.raises(MalformedError):
        decode(b'{"type":"hello","device_id":"ja')


def test_decode_non_json():
    with pytest.raises(MalformedError):
        decode(b"not json at all")


def test_decode_wrong_field_type():
    with pytest.raises(MalformedError):
        decode(b'{"type":"measure_request","request_id":5,"boule_id":"P1-1"}')
    with pytest.raises(MalformedError):
        decode(
            b'{"type":"measurement_report","request_id":"r","boule_id":"b",'
            b'"distance_cm":"3.00","echo_duration_us":1.0,"environment":"indoor"}'
        )


def test_decode_rejects_non_object():
    with pytest.raises(MalformedError):
        decode(b"[1,2,3]")


text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=0, max_size=40
)
two_dp = st.integers(min_value=200, max_value=40000).map(lambda k: k / 100)
one_dp = st.integers(min_value=1, max_value=300000).map(lambda k: k / 10)

messages = st.one_of(
    st.builds(Hello, text, text),
    st.builds(MeasureRequest, text, text),
    st.builds(
        MeasurementReport,
        text,
        text,
        two_dp,
        one_dp,
        st.sampled_from(["indoor", "outdoor"]),
    ),
    st.builds(DeviceError, text, st.sampled_from(["out_of_range", "busy", "malformed"]), text),
)


@given(messages)
@settings(max_examples=400)
def test_round_trip_identity(msg):
    assert decode(encode(msg)) == msg


@given(messages)
@settings(max_examples=200)
def test_no_interior_linefeed(msg):
    wire = encode(msg)
    assert wire.endswith(b"\n")
    assert b"\n" not in wire[:-1]


@given(st.lists(messages, min_size=1, max_size=8))
@settings(max_examples=100)
def test_stream_framing_reconstructs_sequence(msgs):
    stream = b"".join(encode(m) for m in msgs)
    lines = stream.split(b"\n")
    assert lines[-1] == b""
    assert [decode(line) for line in lines[:-1]] == msgs
