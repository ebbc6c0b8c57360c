from __future__ import annotations

import time

import pytest

from schoolsense.directory import UnknownResource
from schoolsense.domain import Reading
from schoolsense.mappers.bus import (
    BusMapper,
    BusMessage,
    InProcessBus,
    LineClient,
    LineServer,
    MalformedPayload,
    MalformedTopic,
    decode_line,
    encode_line,
    format_bus_message,
    parse_address,
    parse_bus_message,
)

NOW = 1_506_931_200_000


def test_parse_stamped_and_unstamped(directory):
    r = parse_bus_message(BusMessage("R1/temperature", "20"), NOW, directory)
    assert r == Reading("R1.temperature", "R1", "temperature", 20.0, NOW)
    r = parse_bus_message(BusMessage("R1/temperature", " 21.25@1506931230000 "), NOW, directory)
    assert r.value == 21.25
    assert r.timestamp == 1506931230000


@pytest.mark.parametrize("topic", ["R1", "R1/temperature/x", "/temperature", "R1/"])
def test_malformed_topics(directory, topic):
    with pytest.raises(MalformedTopic):
        parse_bus_message(BusMessage(topic, "20"), NOW, directory)


@pytest.mark.parametrize("payload", ["warm", "", "nan", "inf", "20@soon", "20@0", "20@-5"])
def test_malformed_payloads(directory, payload):
    with pytest.raises(MalformedPayload):
        parse_bus_message(BusMessage("R1/temperature", payload), NOW, directory)


def test_unknown_resource(directory):
    with pytest.raises(UnknownResource):
        parse_bus_message(BusMessage("R9/temperature", "20"), NOW, directory)


def test_format_is_the_inverse_of_parse(directory):
    reading = Reading("R1.humidity", "R1", "humidity", 48.0, NOW)
    msg = format_bus_message(reading)
    assert msg == BusMessage("R1/humidity", f"48@{NOW}")
    assert parse_bus_message(msg, 1, directory) == reading
    assert decode_line(encode_line(msg)) == msg


def test_mapper_counts_rejections_and_forwards(directory):
    got: list[Reading] = []
    mapper = BusMapper(directory, got.append, clock=lambda: NOW)
    assert mapper.handle(BusMessage("R1/temperature", "20")) is not None
    assert mapper.handle(BusMessage("R1/temperature", "oops")) is None
    assert mapper.handle(BusMessage("R9/temperature", "20")) is None
    assert mapper.handle_line("no-tab-here\n") is None
    assert [r.value for r in got] == [20.0]
    assert mapper.counters.received == 4
    assert mapper.counters.forwarded == 1
    assert mapper.counters.rejected == 3


def test_in_process_bus_fans_out(directory):
    got: list[Reading] = []
    bus = InProcessBus()
    bus.subscribe(BusMapper(directory, got.append, clock=lambda: NOW).handle)
    bus.publish(BusMessage("WX/rain", "0.4"))
    assert got[0].resource_id == "WX.rain"
    assert bus.published == 1


def test_parse_address():
    assert parse_address("127.0.0.1:1883") == ("127.0.0.1", 1883)
    assert parse_address(":9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        parse_address("localhost")


def test_line_server_receives_client_lines(directory):
    got: list[Reading] = []
    mapper = BusMapper(directory, got.append, clock=lambda: NOW)
    server = LineServer(("127.0.0.1", 0), mapper)
    server.start()
    try:
        with LineClient(("127.0.0.1", server.port)) as client:
            client.send(BusMessage("R1/temperature", f"20@{NOW}"))
            client.send_reading(Reading("R2.temperature", "R2", "temperature", 19.5, NOW + 1))
            client.send(BusMessage("R1/temperature", "garbage"))
        deadline = time.monotonic() + 5
        while mapper.counters.received < 3 and time.monotonic() < deadline:
            time.sleep(0.01)
    finally:
        server.stop()
    assert [(r.resource_id, r.value) for r in got] == [
        ("R1.temperature", 20.0),
        ("R2.temperature", 19.5),
    ]
    assert mapper.counters.rejected == 1
