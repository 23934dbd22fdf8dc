"""JSON network description files.

Grammar (unknown keys are rejected at every level)::

    {
      "nodes": [
        {"id": str, "rate_bps": num, "latency_s": num,
         "packetization_s": num?, "line_rate_bps": num?, "max_packet_bits": num?,
         "extra_delay_bounds": [
            {"constant_s": num,
             "coefficients": num | [{"edge": "tail>head", "flow": str, "value": num}, ...],
             "default_coefficient": num?}
         ]?}
      ],
      "flows": [
        {"id": str, "rate_bps": num, "burst_bits": num, "path": [node id, ...]}
      ]
    }

A numeric ``coefficients`` applies that coefficient to every transit pair
entering the node. Paths are unicast node sequences; trees are rejected.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any

from tfa.model import AffineForm, Flow, InvalidSpec, Network, NetworkError, Node, build_network, edge_label, parse_edge

_NODE_KEYS = {"id", "rate_bps", "latency_s", "packetization_s", "line_rate_bps", "max_packet_bits", "extra_delay_bounds"}
_NODE_REQUIRED = {"id", "rate_bps", "latency_s"}
_FLOW_KEYS = {"id", "rate_bps", "burst_bits", "path"}
_FORM_KEYS = {"constant_s", "coefficients", "default_coefficient"}
_COEF_KEYS = {"edge", "flow", "value"}


def _keys(obj: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise InvalidSpec("expected an object", where=where)
    unknown = set(obj) - allowed
    if unknown:
        raise InvalidSpec(f"unknown key(s) {sorted(unknown)}", where=where)
    missing = required - set(obj)
    if missing:
        raise InvalidSpec(f"missing key(s) {sorted(missing)}", where=where)


def _num(obj: dict, key: str, where: str, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidSpec(f"{key} must be a number", where=where)
    return float(v)


def _str(v: Any, what: str, where: str) -> str:
    if not isinstance(v, str) or not v:
        raise InvalidSpec(f"{what} must be a non-empty string", where=where)
    return v


def _parse_form(obj: Any, where: str) -> AffineForm:
    _keys(obj, _FORM_KEYS, {"constant_s", "coefficients"}, where)
    constant = _num(obj, "constant_s", where)
    coefs = obj["coefficients"]
    default = _num(obj, "default_coefficient", where, 0.0)
    if isinstance(coefs, (int, float)) and not isinstance(coefs, bool):
        if "default_coefficient" in obj:
            raise InvalidSpec("give either a numeric coefficients or default_coefficient, not both", where=where)
        return AffineForm(constant, {}, float(coefs))
    if not isinstance(coefs, list):
        raise InvalidSpec("coefficients must be a number or a list", where=where)
    table = {}
    for k, entry in enumerate(coefs):
        w = f"{where}.coefficients[{k}]"
        _keys(entry, _COEF_KEYS, _COEF_KEYS, w)
        edge = parse_edge(_str(entry["edge"], "edge", w))
        flow = _str(entry["flow"], "flow", w)
        if (edge, flow) in table:
            raise InvalidSpec("duplicate coefficient entry", where=w)
        table[(edge, flow)] = _num(entry, "value", w)
    return AffineForm(constant, table, default)


def _parse_node(obj: Any, where: str) -> Node:
    _keys(obj, _NODE_KEYS, _NODE_REQUIRED, where)
    forms = obj.get("extra_delay_bounds", [])
    if not isinstance(forms, list):
        raise InvalidSpec("extra_delay_bounds must be a list", where=where)
    return Node(
        id=_str(obj["id"], "id", where),
        rate=_num(obj, "rate_bps", where),
        latency=_num(obj, "latency_s", where),
        packetization=_num(obj, "packetization_s", where),
        extra_delay_bounds=tuple(_parse_form(f, f"{where}.extra_delay_bounds[{k}]") for k, f in enumerate(forms)),
        line_rate=_num(obj, "line_rate_bps", where),
        max_packet=_num(obj, "max_packet_bits", where),
    )


def _parse_flow(obj: Any, where: str) -> Flow:
    _keys(obj, _FLOW_KEYS, _FLOW_KEYS, where)
    path = obj["path"]
    if not isinstance(path, list):
        raise InvalidSpec("path must be a list of node ids", where=where)
    if any(isinstance(p, (list, dict)) for p in path):
        raise InvalidSpec("multicast paths are not supported; give one node sequence per flow", where=where)
    return Flow(
        id=_str(obj["id"], "id", where),
        rate=_num(obj, "rate_bps", where),
        burst=_num(obj, "burst_bits", where),
        path=tuple(_str(p, "path element", where) for p in path),
    )


def parse_network(doc: Any) -> Network:
    """Build a Network from an already-decoded JSON document."""
    _keys(doc, {"nodes", "flows"}, {"nodes", "flows"}, "document")
    if not isinstance(doc["nodes"], list) or not isinstance(doc["flows"], list):
        raise InvalidSpec("nodes and flows must be lists", where="document")
    nodes = [_parse_node(n, f"nodes[{k}]") for k, n in enumerate(doc["nodes"])]
    flows = [_parse_flow(f, f"flows[{k}]") for k, f in enumerate(doc["flows"])]
    return build_network(nodes, flows)


def _locate(text: str, err: NetworkError) -> int | None:
    """Best-effort line number of the entity an error refers to."""
    where = err.where or ""
    m = re.match(r"(nodes|flows)\[(\d+)\]", where) or re.match(r"(node|flow) (\S+)", where)
    if not m:
        return None
    section = "flows" if m.group(1).startswith("flow") else "nodes"
    start = text.find(f'"{section}"')
    if start < 0:
        return None
    if m.group(1) in ("nodes", "flows"):
        hits = list(re.finditer(r'"id"\s*:', text[start:]))
        k = int(m.group(2))
        if k >= len(hits):
            return None
        pos = start + hits[k].start()
    else:
        hit = re.search(r'"id"\s*:\s*"' + re.escape(m.group(2)) + '"', text[start:])
        if not hit:
            return None
        pos = start + hit.start()
    return text.count("\n", 0, pos) + 1


def loads_network(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"malformed JSON: {exc.msg}", line=exc.lineno) from None
    try:
        return parse_network(doc)
    except NetworkError as err:
        if err.line is None:
            err.line = _locate(text, err)
        raise


def load_network(path: str | Path) -> Network:
    return loads_network(Path(path).read_text())


def dump_network(net: Network) -> dict:
    nodes = []
    for node in net.nodes.values():
        entry: dict[str, Any] = {"id": node.id, "rate_bps": node.rate, "latency_s": node.latency}
        if node.packetization is not None:
            entry["packetization_s"] = node.packetization
        if node.line_rate is not None:
            entry["line_rate_bps"] = node.line_rate
        if node.max_packet is not None:
            entry["max_packet_bits"] = node.max_packet
        if node.extra_delay_bounds:
            forms = []
            for form in node.extra_delay_bounds:
                if not form.coefficients:
                    forms.append({"constant_s": form.constant, "coefficients": form.default_coefficient})
                    continue
                item: dict[str, Any] = {
                    "constant_s": form.constant,
                    "coefficients": [
                        {"edge": edge_label(e), "flow": f, "value": v} for (e, f), v in form.coefficients.items()
                    ],
                }
                if form.default_coefficient:
                    item["default_coefficient"] = form.default_coefficient
                forms.append(item)
            entry["extra_delay_bounds"] = forms
        nodes.append(entry)
    flows = [
        {"id": f.id, "rate_bps": f.rate, "burst_bits": f.burst, "path": list(f.path)} for f in net.flows.values()
    ]
    return {"nodes": nodes, "flows": flows}


def dumps_network(net: Network) -> str:
    return json.dumps(dump_network(net), indent=2) + "\n"


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(dumps_network(net))
