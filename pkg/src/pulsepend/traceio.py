"""Reading and writing hybrid arcs and run manifests.

Two trace formats share one row convention:

* basic runs:    t, j, q1, q2, sigma, event_flag
* adaptive runs: t, j, q1, q2, sigma1, sigma2, I, event_flag, jump_kind

event_flag marks a row's role at jump boundaries: 0 for an ordinary
flow sample, 1 for the last sample before a jump (pre-jump state), 2
for the first sample after one (post-jump state).  A zero-length
segment that is both post- and pre-jump emits two rows with the same
time, flag 2 first.  jump_kind names the jump the row participates in
(0 none, 1 torque, 2 adapt): upcoming for flag-1 rows, just taken for
flag-2 rows.

Floats are written with repr, which round-trips binary values exactly,
so write -> read -> write reproduces a file byte for byte.  JSON traces
additionally carry the sampled derivatives, preserving the cubic
interpolation quality of the original arc; CSV traces reload with
linear interpolation only.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .hybrid_core import FlowSegment, HybridArc, JumpRecord

_BASIC_HEADER = ("t", "j", "q1", "q2", "sigma", "event_flag")
_ADAPTIVE_HEADER = ("t", "j", "q1", "q2", "sigma1", "sigma2", "I", "event_flag", "jump_kind")
_KIND_CODE = {"torque": 1, "adapt": 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}

FLAG_FLOW = 0
FLAG_PRE_JUMP = 1
FLAG_POST_JUMP = 2


def _fmt(x: float) -> str:
    return repr(float(x))


def _state_cells(state, names) -> list[str]:
    cells = []
    for name, value in zip(names, state):
        if name.startswith("sigma"):
            cells.append(str(int(round(float(value)))))
        else:
            cells.append(_fmt(value))
    return cells


def arc_csv_lines(arc: HybridArc) -> list[str]:
    """Render an arc as CSV lines (header first, no trailing newline)."""
    names = arc.state_names
    if names == ("q1", "q2", "sigma"):
        header = _BASIC_HEADER
        with_kind = False
    elif names == ("q1", "q2", "sigma1", "sigma2", "I"):
        header = _ADAPTIVE_HEADER
        with_kind = True
    else:
        raise ConfigError("no CSV layout for state names %r" % (names,))

    lines = [",".join(header)]
    n_seg = len(arc.segments)
    for k, seg in enumerate(arc.segments):
        has_prev = k > 0
        has_next = k < n_seg - 1
        kind_prev = _KIND_CODE.get(arc.jumps[k - 1].label, 0) if has_prev else 0
        kind_next = _KIND_CODE.get(arc.jumps[k].label, 0) if has_next else 0
        n = len(seg.times)
        for i in range(n):
            roles = []
            if i == 0 and has_prev:
                roles.append((FLAG_POST_JUMP, kind_prev))
            if i == n - 1 and has_next:
                roles.append((FLAG_PRE_JUMP, kind_next))
            if not roles:
                roles.append((FLAG_FLOW, 0))
            for flag, kind in roles:
                cells = [_fmt(seg.times[i]), str(seg.j)]
                cells += _state_cells(seg.states[i], names)
                cells.append(str(flag))
                if with_kind:
                    cells.append(str(kind))
                lines.append(",".join(cells))
    return lines


def write_arc_csv(arc: HybridArc, path) -> None:
    Path(path).write_text("\n".join(arc_csv_lines(arc)) + "\n")


def read_arc_csv(path) -> HybridArc:
    """Rebuild an arc from a CSV trace (linear interpolation between rows)."""
    text = Path(path).read_text().strip().splitlines()
    header = tuple(text[0].split(","))
    if header == _BASIC_HEADER:
        names = ("q1", "q2", "sigma")
        with_kind = False
    elif header == _ADAPTIVE_HEADER:
        names = ("q1", "q2", "sigma1", "sigma2", "I")
        with_kind = True
    else:
        raise ConfigError("unrecognized trace header %r" % (text[0],))
    dim = len(names)

    rows = []
    for line in text[1:]:
        cells = line.split(",")
        t = float(cells[0])
        j = int(cells[1])
        state = np.array([float(c) for c in cells[2:2 + dim]])
        flag = int(cells[2 + dim])
        kind = int(cells[3 + dim]) if with_kind else (1 if flag == FLAG_PRE_JUMP else 0)
        rows.append((t, j, state, flag, kind))

    segments: list[FlowSegment] = []
    jumps: list[JumpRecord] = []
    k = 0
    pending_pre: tuple[float, np.ndarray, int] | None = None
    while k < len(rows):
        j = rows[k][1]
        group = []
        while k < len(rows) and rows[k][1] == j:
            group.append(rows[k])
            k += 1
        # a duplicated time at the group edges is the two-role zero-length case
        times, states = [], []
        for t, _, state, flag, kind in group:
            if times and t == times[-1]:
                continue
            times.append(t)
            states.append(state)
        seg = FlowSegment(j, np.array(times), np.array(states), None)
        segments.append(seg)
        if pending_pre is not None:
            t_pre, x_pre, kind_pre = pending_pre
            jumps.append(JumpRecord(time=t_pre, index=j - 1,
                                    label=_CODE_KIND.get(kind_pre, "torque"),
                                    pre_state=x_pre, post_state=seg.states[0].copy()))
            pending_pre = None
        last = group[-1]
        if last[3] == FLAG_PRE_JUMP:
            pending_pre = (last[0], last[2].copy(), last[4])

    metadata = {"source": str(path), "interpolation": "linear"}
    return HybridArc(segments, jumps, names, metadata)


def arc_to_dict(arc: HybridArc) -> dict:
    return {
        "state_names": list(arc.state_names),
        "metadata": arc.metadata,
        "segments": [
            {
                "j": seg.j,
                "times": [float(t) for t in seg.times],
                "states": [[float(v) for v in row] for row in seg.states],
                "derivs": None if seg.derivs is None
                else [[float(v) for v in row] for row in seg.derivs],
            }
            for seg in arc.segments
        ],
        "jumps": [
            {
                "time": rec.time,
                "index": rec.index,
                "label": rec.label,
                "pre_state": [float(v) for v in rec.pre_state],
                "post_state": [float(v) for v in rec.post_state],
                "selected": rec.selected,
            }
            for rec in arc.jumps
        ],
    }


def arc_from_dict(payload: dict) -> HybridArc:
    segments = [
        FlowSegment(part["j"], np.array(part["times"]), np.array(part["states"]),
                    None if part.get("derivs") is None else np.array(part["derivs"]))
        for part in payload["segments"]
    ]
    jumps = [
        JumpRecord(time=part["time"], index=part["index"], label=part["label"],
                   pre_state=np.array(part["pre_state"]),
                   post_state=np.array(part["post_state"]),
                   selected=bool(part.get("selected", False)))
        for part in payload["jumps"]
    ]
    return HybridArc(segments, jumps, tuple(payload["state_names"]),
                     dict(payload.get("metadata", {})))


def dump_json(payload, path) -> None:
    """Write deterministic JSON: sorted keys, stable float text, newline end."""
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_arc_json(arc: HybridArc, path) -> None:
    dump_json(arc_to_dict(arc), path)


def read_arc_json(path) -> HybridArc:
    return arc_from_dict(json.loads(Path(path).read_text()))


def write_manifest(path, payload: dict) -> None:
    """Run manifest: the fully resolved configuration, no wall-clock data."""
    dump_json(payload, path)
