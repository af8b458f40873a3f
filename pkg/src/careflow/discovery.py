"""Directly-follows graph mining and translation to a workflow Petri net.

The translation gives every activity a dedicated input and output place
(`p_in__A`, `p_out__A`) joined by its visible transition, and one hidden
transition per retained directly-follows edge routing `p_out__A` to
`p_in__B`. Start and end activities are wired to a single source and sink
place through hidden start/end transitions. Exclusive choices in the log
therefore replay without missing tokens, and the place naming encodes which
event each place belongs to (used later for feature grouping).
"""

from dataclasses import dataclass, field


@dataclass
class DirectlyFollowsGraph:
    activities: dict = field(default_factory=dict)   # name -> frequency
    edges: dict = field(default_factory=dict)        # (a, b) -> frequency
    starts: dict = field(default_factory=dict)       # name -> frequency
    ends: dict = field(default_factory=dict)         # name -> frequency


def build_dfg(log):
    if not log.traces:
        raise ValueError("cannot build a directly-follows graph from an empty log")
    dfg = DirectlyFollowsGraph()
    for trace in log.traces:
        names = [e.event_name for e in trace.instances]
        for name in names:
            dfg.activities[name] = dfg.activities.get(name, 0) + 1
        dfg.starts[names[0]] = dfg.starts.get(names[0], 0) + 1
        dfg.ends[names[-1]] = dfg.ends.get(names[-1], 0) + 1
        for a, b in zip(names, names[1:]):
            dfg.edges[(a, b)] = dfg.edges.get((a, b), 0) + 1
    return dfg


def place_event(place_id):
    """Activity a discovered place belongs to, or None for source/sink."""
    for prefix in ("p_in__", "p_out__"):
        if place_id.startswith(prefix):
            return place_id[len(prefix):]
    return None


def dfg_to_petrinet(dfg, edge_threshold=0.0):
    """Translate a DFG into a workflow net, dropping infrequent edges.

    Edges with frequency < edge_threshold * max edge frequency are removed;
    start/end wiring is always kept.
    """
    from .petrinet import Marking, PetriNet

    if not dfg.activities:
        raise ValueError("directly-follows graph has no activities")
    max_freq = max(dfg.edges.values()) if dfg.edges else 0
    kept_edges = [
        (a, b) for (a, b), f in dfg.edges.items()
        if max_freq == 0 or f >= edge_threshold * max_freq
    ]

    places = ["source"]
    transitions = {}
    arcs = []
    for act in dfg.activities:
        tid = f"t__{act}"
        places += [f"p_in__{act}", f"p_out__{act}"]
        transitions[tid] = act
        arcs.append((f"p_in__{act}", tid, 1))
        arcs.append((tid, f"p_out__{act}", 1))
    places.append("sink")

    for s in dfg.starts:
        h = f"h_start__{s}"
        transitions[h] = None
        arcs.append(("source", h, 1))
        arcs.append((h, f"p_in__{s}", 1))
    for e in dfg.ends:
        h = f"h_end__{e}"
        transitions[h] = None
        arcs.append((f"p_out__{e}", h, 1))
        arcs.append((h, "sink", 1))
    for a, b in kept_edges:
        h = f"h_edge__{a}__{b}"
        transitions[h] = None
        arcs.append((f"p_out__{a}", h, 1))
        arcs.append((h, f"p_in__{b}", 1))

    return PetriNet(
        places,
        transitions,
        arcs,
        Marking({"source": 1}),
        source_place="source",
        sink_place="sink",
    )


def discover(log, edge_threshold=0.0):
    return dfg_to_petrinet(build_dfg(log), edge_threshold)
