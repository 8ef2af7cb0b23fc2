"""GraphML serialization of witnesses.

The writer is canonical: fixed key declarations, nodes sorted by id, edges
sorted by their content, stable metadata order.  Reading is therefore the
writer's inverse on its own output, byte for byte on a rewrite.  Documents
from other producers are normalized on read: GraphML key ids are resolved
through their declarations, unknown data keys are preserved as extras and
ignored semantically.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from ..logic.parser import ExprSyntaxError, parse_expression
from ..logic import ast as A
from .model import (
    GuardType,
    SourceCodeGuard,
    Transition,
    Witness,
    WitnessFormatError,
    WitnessState,
)

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"

WITNESS_TYPE = "witness-type"
PRODUCER = "producer"
PROGRAMFILE = "programfile"
PROGRAMHASH = "programhash"
CREATIONTIME = "creationtime"
ENTRY = "entry"
INVARIANT = "invariant"
INVARIANT_SCOPE = "invariant.scope"
STARTLINE = "startline"
ENDLINE = "endline"
ENTERLOOPHEAD = "enterLoopHead"
CONTROL = "control"
ENTERFUNCTION = "enterFunction"

CONDITION_TRUE = "condition-true"
CONDITION_FALSE = "condition-false"

# attr.name -> (element kind, attr.type)
_KEY_TABLE = {
    WITNESS_TYPE: ("graph", "string"),
    PRODUCER: ("graph", "string"),
    PROGRAMFILE: ("graph", "string"),
    PROGRAMHASH: ("graph", "string"),
    CREATIONTIME: ("graph", "string"),
    ENTRY: ("node", "boolean"),
    INVARIANT: ("node", "string"),
    INVARIANT_SCOPE: ("node", "string"),
    STARTLINE: ("edge", "int"),
    ENDLINE: ("edge", "int"),
    ENTERLOOPHEAD: ("edge", "boolean"),
    CONTROL: ("edge", "string"),
    ENTERFUNCTION: ("edge", "string"),
}

_GRAPH_KEY_ORDER = [WITNESS_TYPE, PRODUCER, PROGRAMFILE, PROGRAMHASH, CREATIONTIME]

# Transitions whose guard spans every line carry no line keys.
FULL_SPAN_START = 1
FULL_SPAN_END = 2**31 - 1
FULL_SPAN = (FULL_SPAN_START, FULL_SPAN_END)


def _data(parent: ET.Element, key: str, value: str) -> None:
    el = ET.SubElement(parent, "data")
    el.set("key", key)
    el.text = value


def write_graphml(w: Witness) -> str:
    """Serialize a witness into canonical GraphML text."""
    root = ET.Element("graphml")
    root.set("xmlns", GRAPHML_NS)
    for name, (kind, attr_type) in _KEY_TABLE.items():
        key_el = ET.SubElement(root, "key")
        key_el.set("id", name)
        key_el.set("attr.name", name)
        key_el.set("attr.type", attr_type)
        key_el.set("for", kind)
        if attr_type == "boolean":
            default = ET.SubElement(key_el, "default")
            default.text = "false"
    graph = ET.SubElement(root, "graph")
    graph.set("edgedefault", "directed")
    emitted = set()
    for key in _GRAPH_KEY_ORDER:
        if key in w.metadata:
            _data(graph, key, w.metadata[key])
            emitted.add(key)
    for key in sorted(w.metadata):
        if key not in emitted:
            _data(graph, key, w.metadata[key])

    for state_id in sorted(w.states):
        state = w.states[state_id]
        node = ET.SubElement(graph, "node")
        node.set("id", state_id)
        if state_id == w.initial:
            _data(node, ENTRY, "true")
        if state.invariant is not None:
            _data(node, INVARIANT, A.to_source(state.invariant))
            if state.scope is not None:
                _data(node, INVARIANT_SCOPE, state.scope)
        for key, value in sorted(state.extras):
            _data(node, key, value)

    def transition_sort_key(t: Transition):
        g = t.guard
        return (t.source, t.target, g.startline, g.endline, g.guard_type.value, g.function or "", t.extras)

    for t in sorted(w.transitions, key=transition_sort_key):
        edge = ET.SubElement(graph, "edge")
        edge.set("source", t.source)
        edge.set("target", t.target)
        g = t.guard
        if g.guard_type is GuardType.ENTER_LOOP_HEAD:
            _data(edge, ENTERLOOPHEAD, "true")
        elif g.guard_type is GuardType.THEN:
            _data(edge, CONTROL, CONDITION_TRUE)
        elif g.guard_type is GuardType.ELSE:
            _data(edge, CONTROL, CONDITION_FALSE)
        elif g.guard_type is GuardType.ENTER_FUNC:
            _data(edge, ENTERFUNCTION, g.function or "")
        if (g.startline, g.endline) != FULL_SPAN:
            _data(edge, STARTLINE, str(g.startline))
            _data(edge, ENDLINE, str(g.endline))
        for key, value in sorted(t.extras):
            _data(edge, key, value)

    ET.indent(root, space="  ")
    body = ET.tostring(root, encoding="unicode")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + body + "\n"


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def read_graphml(document: str) -> Witness:
    """Parse a GraphML witness document.

    Raises :class:`WitnessFormatError` for malformed XML, a missing or
    ambiguous initial state, dangling transition endpoints, or an invariant
    that does not parse (reported with its state id).
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise WitnessFormatError(f"not well-formed XML: {exc}") from None
    if _strip_ns(root.tag) != "graphml":
        raise WitnessFormatError(f"expected a graphml document, found <{_strip_ns(root.tag)}>")

    # Normalization: resolve data key ids through the key declarations.
    key_names: dict[str, str] = {}
    graph_el = None
    for child in root:
        tag = _strip_ns(child.tag)
        if tag == "key":
            key_id = child.get("id", "")
            key_names[key_id] = child.get("attr.name", key_id)
        elif tag == "graph" and graph_el is None:
            graph_el = child
    if graph_el is None:
        raise WitnessFormatError("document contains no graph element")

    def data_of(el: ET.Element) -> list[tuple[str, str]]:
        out = []
        for d in el:
            if _strip_ns(d.tag) != "data":
                continue
            raw_key = d.get("key", "")
            out.append((key_names.get(raw_key, raw_key), (d.text or "").strip()))
        return out

    metadata: dict[str, str] = {}
    states: dict[str, WitnessState] = {}
    initials: list[str] = []
    transitions: list[Transition] = []

    for name, value in data_of(graph_el):
        metadata[name] = value

    for el in graph_el:
        tag = _strip_ns(el.tag)
        if tag == "node":
            state_id = el.get("id")
            if not state_id:
                raise WitnessFormatError("node without an id")
            invariant = None
            scope = None
            extras: list[tuple[str, str]] = []
            for name, value in data_of(el):
                if name == ENTRY:
                    if value == "true":
                        initials.append(state_id)
                elif name == INVARIANT:
                    try:
                        invariant = parse_expression(value)
                    except ExprSyntaxError as exc:
                        raise WitnessFormatError(
                            f"state {state_id!r}: unparseable invariant {value!r}: {exc}"
                        ) from None
                elif name == INVARIANT_SCOPE:
                    scope = value
                else:
                    extras.append((name, value))
            states[state_id] = WitnessState(state_id, invariant, scope, tuple(sorted(extras)))
        elif tag == "edge":
            source = el.get("source", "")
            target = el.get("target", "")
            startline = endline = None
            guard_type: GuardType | None = None
            function = None
            extras = []
            for name, value in data_of(el):
                if name == STARTLINE:
                    startline = int(value)
                elif name == ENDLINE:
                    endline = int(value)
                elif name == ENTERLOOPHEAD and value == "true":
                    if guard_type is None:
                        guard_type = GuardType.ENTER_LOOP_HEAD
                    else:
                        extras.append((name, value))
                elif name == CONTROL:
                    if guard_type is None:
                        guard_type = GuardType.THEN if value == CONDITION_TRUE else GuardType.ELSE
                    else:
                        extras.append((name, value))
                elif name == ENTERFUNCTION:
                    if guard_type is None:
                        guard_type = GuardType.ENTER_FUNC
                        function = value
                    else:
                        extras.append((name, value))
                else:
                    extras.append((name, value))
            if startline is None and endline is None:
                startline, endline = FULL_SPAN
            elif startline is None:
                startline = endline
            elif endline is None:
                endline = startline
            guard = SourceCodeGuard(startline, endline, guard_type or GuardType.OTHERWISE, function)
            transitions.append(Transition(source, target, guard, tuple(sorted(extras))))

    if not states:
        raise WitnessFormatError("missing initial state: the graph has no nodes")
    if not initials:
        raise WitnessFormatError("missing initial state: no node carries entry=true")
    if len(initials) > 1:
        raise WitnessFormatError(f"multiple initial states: {initials}")
    for t in transitions:
        for endpoint in (t.source, t.target):
            if endpoint not in states:
                raise WitnessFormatError(f"dangling transition endpoint {endpoint!r}")
    return Witness(states=states, initial=initials[0], transitions=tuple(transitions), metadata=metadata)
