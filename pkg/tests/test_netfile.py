import json

import pytest
from hypothesis import given, settings

from tfa import generators
from tfa.calculus import with_line_shaping
from tfa.model import AffineForm, DuplicatePathNode, Flow, InvalidSpec, Node, UnknownNode, build_network
from tfa.netfile import dump_network, dumps_network, load_network, loads_network, parse_network, save_network

from strategies import networks


def _doc():
    return {
        "nodes": [{"id": "A", "rate_bps": 1e7, "latency_s": 0.001}, {"id": "B", "rate_bps": 1e7, "latency_s": 0.001}],
        "flows": [{"id": "f", "rate_bps": 1e6, "burst_bits": 1000, "path": ["A", "B"]}],
    }


def test_parse_minimal(tandem):
    assert parse_network(_doc()) == tandem


def test_shipped_files(networks_dir, twelve_port, tandem):
    assert load_network(networks_dir / "twelve_port.json") == twelve_port
    assert load_network(networks_dir / "tandem.json") == tandem
    assert load_network(networks_dir / "ring5.json") == generators.ring(5)


@pytest.mark.parametrize(
    "mutate, exc, needle",
    [
        (lambda d: d["nodes"][0].update(colour="red"), InvalidSpec, "unknown key"),
        (lambda d: d.update(extra=1), InvalidSpec, "unknown key"),
        (lambda d: d["flows"][0].pop("burst_bits"), InvalidSpec, "missing key"),
        (lambda d: d["flows"][0].update(rate_bps="fast"), InvalidSpec, "must be a number"),
        (lambda d: d["flows"][0].update(rate_bps=True), InvalidSpec, "must be a number"),
        (lambda d: d["flows"][0].update(path=["A", "Z"]), UnknownNode, "flow f"),
        (lambda d: d["flows"][0].update(path=["A", "B", "A"]), DuplicatePathNode, "flow f"),
        (lambda d: d["flows"][0].update(path=["A", ["B", "C"]]), InvalidSpec, "multicast"),
        (lambda d: d["nodes"][0].update(extra_delay_bounds={}), InvalidSpec, "must be a list"),
    ],
)
def test_strict_parse(mutate, exc, needle):
    doc = _doc()
    mutate(doc)
    with pytest.raises(exc, match=needle):
        parse_network(doc)


def test_error_carries_line_number():
    doc = _doc()
    doc["flows"][0]["path"] = ["A", "Z"]
    text = json.dumps(doc, indent=2)
    with pytest.raises(UnknownNode) as info:
        loads_network(text)
    line = text.splitlines()[info.value.line - 1]
    assert '"id": "f"' in line
    assert f"line {info.value.line}" in str(info.value)


def test_malformed_json_line():
    with pytest.raises(InvalidSpec) as info:
        loads_network('{\n  "nodes": [,\n}')
    assert info.value.line == 2


def test_extra_forms_round_trip():
    transit = AffineForm(5e-4, {(("A", "B"), "f"): 2e-7})
    flat = AffineForm(3e-4, {}, 1e-7)
    net = build_network(
        [Node("A", 1e7, 1e-3, extra_delay_bounds=(flat,)), Node("B", 1e7, 1e-3, extra_delay_bounds=(transit,))],
        [Flow("f", 1e6, 1000.0, ("A", "B"))],
    )
    text = dumps_network(net)
    assert loads_network(text) == net
    assert dump_network(net)["nodes"][0]["extra_delay_bounds"][0]["coefficients"] == 1e-7


def test_optional_node_fields_round_trip(tmp_path):
    net = build_network(
        [Node("A", 1e7, 0.0, packetization=1e-5, line_rate=1e8, max_packet=1500.0)],
        [Flow("f", 1e5, 1.0, ("A",))],
    )
    save_network(net, tmp_path / "n.json")
    assert load_network(tmp_path / "n.json") == net


def test_shaped_ring_round_trip():
    net = with_line_shaping(generators.ring(6), 1e7, 1000.0)
    assert loads_network(dumps_network(net)) == net


@settings(max_examples=50, deadline=None)
@given(networks(extra_form_prob=0.5))
def test_round_trip(net):
    assert loads_network(dumps_network(net)) == net
    assert dumps_network(loads_network(dumps_network(net))) == dumps_network(net)
