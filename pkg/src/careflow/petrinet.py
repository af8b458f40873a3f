"""Petri nets: firing semantics, trace replay, PNML and DOT interchange.

Replay is total: events whose visible transition is not enabled trigger a
bounded breadth-first search over hidden-transition firings, and if that
fails the transition is force-fired by inserting the missing tokens (which
are counted as nonconformance). Replay of a trace therefore never raises.

Replay bookkeeping rules (shared with the brute-force test oracle):
  - initial-marking tokens do not count as place entries;
  - firing a transition registers an entry for each output place (count
    incremented by the arc weight, entry time set to the event timestamp);
  - tokens inserted by forced firing are not entries;
  - an event with no matching visible transition is skipped and adds 1 to
    missing_tokens;
  - hidden firings triggered on behalf of an event carry that event's
    timestamp in the firing timeline;
  - full-trace replay (cutoff=None) ends with a completion step that fires
    the shortest hidden sequence adding a token to the sink, if one exists.
"""

from dataclasses import dataclass, field
from xml.etree import ElementTree as ET

HIDDEN_SEARCH_HORIZON = 5  # max hidden firings inserted before one event
MAX_HIDDEN_SEARCH_STATES = 10_000  # worst-case bound on markings explored


@dataclass
class Marking:
    tokens: dict = field(default_factory=dict)

    def count(self, place):
        return self.tokens.get(place, 0)

    def copy(self):
        return Marking(dict(self.tokens))

    def as_dict(self):
        return {p: c for p, c in self.tokens.items() if c > 0}

    def __eq__(self, other):
        return self.as_dict() == other.as_dict()


class PetriNet:
    """Workflow net with visible (labeled) and hidden (unlabeled) transitions."""

    def __init__(self, places, transitions, arcs, initial_marking=None,
                 source_place=None, sink_place=None):
        self.places = list(places)
        self.transitions = dict(transitions)  # id -> label or None
        self.arcs = [(s, t, int(w)) for s, t, w in arcs]
        self.source_place = source_place
        self.sink_place = sink_place

        place_set = set(self.places)
        trans_set = set(self.transitions)
        if place_set & trans_set:
            raise ValueError("place and transition ids overlap")
        self.inputs = {t: [] for t in self.transitions}   # t -> [(place, w)]
        self.outputs = {t: [] for t in self.transitions}
        self._place_out = {p: [] for p in self.places}
        self._place_in = {p: [] for p in self.places}
        for src, tgt, w in self.arcs:
            if w <= 0:
                raise ValueError(f"arc {src}->{tgt} has non-positive weight")
            if src in place_set and tgt in trans_set:
                self.inputs[tgt].append((src, w))
                self._place_out[src].append(tgt)
            elif src in trans_set and tgt in place_set:
                self.outputs[src].append((tgt, w))
                self._place_in[tgt].append(src)
            else:
                raise ValueError(f"arc {src}->{tgt} is not place<->transition")

        self.label_to_transition = {}
        for tid, label in self.transitions.items():
            if label is None:
                continue
            if label in self.label_to_transition:
                raise ValueError(f"duplicate visible label {label!r}")
            self.label_to_transition[label] = tid
        self.hidden_transitions = sorted(
            t for t, label in self.transitions.items() if label is None
        )
        # place -> hidden transitions consuming it, and the relaxed
        # place-to-place adjacency through hidden transitions (used to prune
        # provably hopeless hidden searches).
        self.hidden_consumers = {p: [] for p in self.places}
        self.hidden_adjacent = {p: set() for p in self.places}
        for h in self.hidden_transitions:
            for p, _ in self.inputs[h]:
                self.hidden_consumers[p].append(h)
                for q, _ in self.outputs[h]:
                    self.hidden_adjacent[p].add(q)
        for p in self.places:
            self.hidden_consumers[p].sort()

        if initial_marking is None:
            initial_marking = Marking({self.source_place: 1} if self.source_place else {})
        self.initial_marking = initial_marking
        if self.source_place is None:
            for p in self.places:
                if not self._place_in[p]:
                    self.source_place = p
                    break
        if self.sink_place is None:
            for p in self.places:
                if not self._place_out[p]:
                    self.sink_place = p
                    break

    def visible_labels(self):
        return [l for l in self.transitions.values() if l is not None]


@dataclass
class ReplayResult:
    final_marking: Marking
    firing_timeline: list  # of (transition id, timestamp)
    place_entry_times: dict  # place -> last entry timestamp
    place_entry_counts: dict  # place -> total tokens entered
    place_entry_history: dict  # place -> [entry timestamps]
    missing_tokens: int
    remaining_tokens: int


def is_enabled(net, marking, transition):
    if transition not in net.transitions:
        raise KeyError(f"unknown transition {transition!r}")
    return all(marking.count(p) >= w for p, w in net.inputs[transition])


def fire(net, marking, transition):
    """Return the marking after firing; raises if the transition is disabled."""
    if not is_enabled(net, marking, transition):
        raise ValueError(f"transition {transition!r} is not enabled")
    out = marking.copy()
    for p, w in net.inputs[transition]:
        out.tokens[p] = out.count(p) - w
    for p, w in net.outputs[transition]:
        out.tokens[p] = out.count(p) + w
    return out


def _hidden_reachable(net, marking, horizon):
    """Places a token could reach through <= horizon hidden firings.

    Relaxed (per-token) reachability; a superset of what firing semantics
    allow, so it is safe as a prune: if a needed place is not in this set,
    no hidden sequence can mark it.
    """
    reached = set(marking.as_dict())
    frontier = reached
    for _ in range(horizon):
        nxt = set()
        for p in frontier:
            nxt |= net.hidden_adjacent[p] - reached
        if not nxt:
            break
        reached |= nxt
        frontier = nxt
    return reached


def _search_hidden(net, marking, goal, needed_places,
                   horizon=HIDDEN_SEARCH_HORIZON):
    """Shortest hidden-firing sequence whose result satisfies `goal`, or None.

    Breadth-first; ties broken by expanding hidden transitions in sorted id
    order, so the returned sequence is the lexicographically first among the
    shortest. Exploration stops (reporting failure) after
    MAX_HIDDEN_SEARCH_STATES distinct markings, which bounds replay cost on
    degenerate nets; the limit is unreachable on small nets, where at most
    |hidden|^horizon markings exist.
    """
    if any(p not in _hidden_reachable(net, marking, horizon) for p in needed_places):
        return None
    frontier = [(marking, [])]
    seen = {tuple(sorted(marking.as_dict().items()))}
    for _ in range(horizon):
        next_frontier = []
        for m, seq in frontier:
            candidates = set()
            for p in m.as_dict():
                candidates.update(net.hidden_consumers[p])
            for h in sorted(candidates):
                if not is_enabled(net, m, h):
                    continue
                m2 = fire(net, m, h)
                key = tuple(sorted(m2.as_dict().items()))
                if key in seen:
                    continue
                seen.add(key)
                seq2 = seq + [h]
                if goal(m2):
                    return seq2
                if len(seen) > MAX_HIDDEN_SEARCH_STATES:
                    return None
                next_frontier.append((m2, seq2))
        frontier = next_frontier
        if not frontier:
            break
    return None


def _find_hidden_path(net, marking, target, horizon=HIDDEN_SEARCH_HORIZON):
    needed = [p for p, w in net.inputs[target] if marking.count(p) < w]
    return _search_hidden(
        net, marking, lambda m: is_enabled(net, m, target), needed, horizon
    )


def replay_trace(net, trace, cutoff=None):
    """Replay a trace's events (timestamp <= cutoff) through the net."""
    events = trace.instances if hasattr(trace, "instances") else list(trace)
    marking = net.initial_marking.copy()
    timeline = []
    entry_times = {}
    entry_counts = {}
    entry_history = {}
    missing = 0

    def record_fire(tid, ts):
        nonlocal marking
        marking = fire(net, marking, tid)
        timeline.append((tid, ts))
        for p, w in net.outputs[tid]:
            entry_counts[p] = entry_counts.get(p, 0) + w
            entry_times[p] = ts
            entry_history.setdefault(p, []).append(ts)

    for ev in events:
        ts = ev.timestamp
        if cutoff is not None and ts > cutoff:
            continue
        tid = net.label_to_transition.get(ev.event_name)
        if tid is None:
            missing += 1
            continue
        if not is_enabled(net, marking, tid):
            path = _find_hidden_path(net, marking, tid)
            if path is not None:
                for h in path:
                    record_fire(h, ts)
            else:
                for p, w in net.inputs[tid]:
                    deficit = w - marking.count(p)
                    if deficit > 0:
                        marking.tokens[p] = marking.count(p) + deficit
                        missing += deficit
        record_fire(tid, ts)

    remaining = 0
    if cutoff is None:
        # Completion step: route one token into the sink through hidden
        # transitions if possible, using the last event timestamp.
        if events and net.sink_place is not None:
            last_ts = events[-1].timestamp
            before = marking.count(net.sink_place)
            path = _search_hidden(
                net, marking,
                lambda m: m.count(net.sink_place) > before,
                [net.sink_place],
            )
            if path is not None:
                for h in path:
                    record_fire(h, last_ts)
        remaining = sum(
            c for p, c in marking.as_dict().items() if p != net.sink_place
        )
    return ReplayResult(
        final_marking=marking,
        firing_timeline=timeline,
        place_entry_times=entry_times,
        place_entry_counts=entry_counts,
        place_entry_history=entry_history,
        missing_tokens=missing,
        remaining_tokens=remaining,
    )


# ---------------------------------------------------------------------------
# PNML interchange (places, transitions with optional name label, weighted
# arcs, initial marking).

def _strip_ns(tag):
    return tag.rsplit("}", 1)[-1]


def _child(elem, tag):
    for c in elem:
        if _strip_ns(c.tag) == tag:
            return c
    return None


def _text_of(elem, tag):
    c = _child(elem, tag)
    if c is None:
        return None
    t = _child(c, "text")
    return t.text if t is not None else None


def parse_pnml(stream):
    try:
        root = ET.parse(stream).getroot()
    except ET.ParseError as exc:
        raise ValueError(f"malformed PNML: {exc}") from None
    places = []
    transitions = {}
    arcs = []
    marking = {}
    for elem in root.iter():
        tag = _strip_ns(elem.tag)
        if tag == "place":
            pid = elem.get("id")
            places.append(pid)
            m = _text_of(elem, "initialMarking")
            if m is not None and int(m) > 0:
                marking[pid] = int(m)
        elif tag == "transition":
            transitions[elem.get("id")] = _text_of(elem, "name")
        elif tag == "arc":
            w = _text_of(elem, "inscription")
            arcs.append((elem.get("source"), elem.get("target"), int(w) if w else 1))
    node_ids = set(places) | set(transitions)
    for src, tgt, _ in arcs:
        if src not in node_ids or tgt not in node_ids:
            raise ValueError(f"dangling arc reference {src!r}->{tgt!r}")
    return PetriNet(places, transitions, arcs, Marking(marking))


def to_pnml(net):
    """Serialize to a PNML string; parse_pnml(to_pnml(n)) == n structurally."""
    root = ET.Element("pnml")
    netel = ET.SubElement(root, "net", id="net1",
                          type="http://www.pnml.org/version-2009/grammar/ptnet")
    page = ET.SubElement(netel, "page", id="page1")
    for p in net.places:
        pe = ET.SubElement(page, "place", id=p)
        count = net.initial_marking.count(p)
        if count > 0:
            me = ET.SubElement(pe, "initialMarking")
            ET.SubElement(me, "text").text = str(count)
    for tid, label in net.transitions.items():
        te = ET.SubElement(page, "transition", id=tid)
        if label is not None:
            ne = ET.SubElement(te, "name")
            ET.SubElement(ne, "text").text = label
    for i, (src, tgt, w) in enumerate(net.arcs):
        ae = ET.SubElement(page, "arc", id=f"a{i}", source=src, target=tgt)
        if w != 1:
            ie = ET.SubElement(ae, "inscription")
            ET.SubElement(ie, "text").text = str(w)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


def structurally_equal(a, b):
    return (
        a.places == b.places
        and a.transitions == b.transitions
        and sorted(a.arcs) == sorted(b.arcs)
        and a.initial_marking == b.initial_marking
    )


# ---------------------------------------------------------------------------
# DOT rendering: circles for places (source yellow, sink green), rectangles
# for visible transitions, filled black rectangles for hidden transitions.

def _dot_quote(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(net, marking=None):
    lines = ["digraph petrinet {", "  rankdir=LR;"]
    for p in net.places:
        attrs = ["shape=circle"]
        if p == net.source_place:
            attrs += ["style=filled", "fillcolor=yellow"]
        elif p == net.sink_place:
            attrs += ["style=filled", "fillcolor=green"]
        label = p
        if marking is not None and marking.count(p) > 0:
            label = f"{p}\\n{'•' * min(marking.count(p), 5)}"
        attrs.append(f"label={_dot_quote(label)}")
        lines.append(f"  {_dot_quote(p)} [{', '.join(attrs)}];")
    for tid, tlabel in net.transitions.items():
        if tlabel is None:
            lines.append(
                f"  {_dot_quote(tid)} [shape=box, style=filled, "
                f'fillcolor=black, label=""];'
            )
        else:
            lines.append(f"  {_dot_quote(tid)} [shape=box, label={_dot_quote(tlabel)}];")
    for src, tgt, w in net.arcs:
        attr = f" [label={_dot_quote(str(w))}]" if w != 1 else ""
        lines.append(f"  {_dot_quote(src)} -> {_dot_quote(tgt)}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"
