"""Vectorize the watershed ridge network into a planar boundary graph.

The graph has junction nodes, arcs carrying ordered ridge-pixel chains, and
faces (one per watershed basin plus one outer face). The image frame is
closed with synthetic border arcs on a virtual half-pixel ring just outside
the raster, so every arc separates two distinct faces and the outer face is a
first-class citizen.

Conventions (used consistently across the package):
  * positions are (row, col); angles are measured counterclockwise from the
    +col axis as the image is normally displayed (row 0 on top);
  * "left"/"right" of an arc are relative to walking its chain from node_i
    to node_j in that display;
  * incident darts at a node are stored in counterclockwise order.

Faces are recovered by walking the rotation system (next dart = the
counterclockwise successor of the reversed dart), which keeps the face on the
walker's left; each traced walk is then matched to a basin by probing pixels
on its left side. Walks of nested components that sample the same basin merge
into one face, so faces may have holes.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from skimage.morphology import thin as _guo_hall_thin

from .errors import RidgeTopologyError
from .watershed import WatershedResult

_N4 = ((-1, 0), (0, -1), (0, 1), (1, 0))
_N8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


# --------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class Node:
    id: int
    pos: tuple[float, float]              # (row, col); virtual nodes off-grid
    incident: tuple[tuple[int, bool], ...] = ()  # darts leaving, CCW order
    kind: str = "junction"                # junction | anchor | loop | corner

    @property
    def incident_arc_ids(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.incident)

    @property
    def degree(self) -> int:
        return len(self.incident)


@dataclass(frozen=True)
class Arc:
    id: int
    node_i: int
    node_j: int
    chain: np.ndarray                      # (k, 2) float positions, i -> j
    left_face: int = -1
    right_face: int = -1
    is_frame: bool = False

    def __post_init__(self):
        self.chain.setflags(write=False)


@dataclass(frozen=True)
class Face:
    id: int
    basin_id: int                          # 0 for the outer face
    pixel_count: int
    arc_ids: tuple[int, ...]


@dataclass(frozen=True)
class BoundaryGraph:
    width: int
    height: int
    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]
    faces: tuple[Face, ...]
    outer_face_id: int
    basin_labels: np.ndarray | None = None  # present when built from a raster

    def face_of_basin(self, basin_id: int) -> Face:
        for f in self.faces:
            if f.basin_id == basin_id:
                return f
        raise KeyError(f"no face for basin {basin_id}")

    def num_components(self) -> int:
        parent = list(range(len(self.nodes)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for arc in self.arcs:
            a, b = find(arc.node_i), find(arc.node_j)
            if a != b:
                parent[a] = b
        return len({find(i) for i in range(len(self.nodes))})


# dart helpers: a dart is (arc_id, forward); forward walks chain i -> j

def dart_tail(g: BoundaryGraph, dart) -> int:
    arc = g.arcs[dart[0]]
    return arc.node_i if dart[1] else arc.node_j


def dart_head(g: BoundaryGraph, dart) -> int:
    arc = g.arcs[dart[0]]
    return arc.node_j if dart[1] else arc.node_i


def dart_twin(dart) -> tuple[int, bool]:
    return (dart[0], not dart[1])


def dart_points(g: BoundaryGraph, dart) -> np.ndarray:
    """Chain points in traversal order of the dart."""
    chain = g.arcs[dart[0]].chain
    return chain if dart[1] else chain[::-1]


def next_face_dart(g: BoundaryGraph, dart) -> tuple[int, bool]:
    """Successor of ``dart`` on the face to its left.

    With darts sorted counterclockwise, stepping to the clockwise
    predecessor of the reversed dart keeps the same face on the left.
    """
    node = g.nodes[dart_head(g, dart)]
    twin = dart_twin(dart)
    idx = node.incident.index(twin)
    return node.incident[(idx - 1) % len(node.incident)]


def face_walks_from_rotation(g: BoundaryGraph) -> list[list[tuple[int, bool]]]:
    """Trace all face walks of the rotation system (each dart used once)."""
    walks = []
    seen = set()
    for arc in g.arcs:
        for fwd in (True, False):
            d = (arc.id, fwd)
            if d in seen:
                continue
            walk = []
            cur = d
            while cur not in seen:
                seen.add(cur)
                walk.append(cur)
                cur = next_face_dart(g, cur)
            walks.append(walk)
    return walks


# --------------------------------------------------------------------------
# skeleton cleanup


def _skeletonize_ridges(ridge_mask: np.ndarray) -> set[tuple[int, int]]:
    skel = _guo_hall_thin(np.asarray(ridge_mask, dtype=bool))
    # defensively break any remaining 2x2 blocks (they would trace as
    # zero-area faces); removing one corner of a full block is always safe
    changed = True
    while changed:
        changed = False
        block = skel[:-1, :-1] & skel[:-1, 1:] & skel[1:, :-1] & skel[1:, 1:]
        for r, c in np.argwhere(block):
            skel[r + 1, c + 1] = False
            changed = True
    return {(int(r), int(c)) for r, c in np.argwhere(skel)}


def _on_border(p, h, w) -> bool:
    return p[0] in (0, h - 1) or p[1] in (0, w - 1)


def _drop_border_runs(skel: set, h: int, w: int) -> set:
    """Remove border skeleton pixels that have border skeleton 8-neighbors.

    Isolated border contacts stay and become anchor nodes; runs hugging the
    frame cannot be embedded next to the synthetic border arcs.
    """
    doomed = set()
    for p in skel:
        if not _on_border(p, h, w):
            continue
        for dr, dc in _N8:
            q = (p[0] + dr, p[1] + dc)
            if q in skel and _on_border(q, h, w):
                doomed.add(p)
                break
    return skel - doomed


def _reduced_adjacency(skel: set) -> dict:
    """8-adjacency minus diagonal steps that have an orthogonal 2-step path."""
    adj = {}
    for p in skel:
        nbrs = []
        for dr, dc in _N8:
            q = (p[0] + dr, p[1] + dc)
            if q not in skel:
                continue
            if dr != 0 and dc != 0:
                if (p[0], q[1]) in skel or (q[0], p[1]) in skel:
                    continue  # the corner is covered by two axis steps
            nbrs.append(q)
        adj[p] = nbrs
    return adj


def _prune_spurs(skel: set, h: int, w: int) -> set:
    """Iteratively delete interior endpoints; dangling chains separate nothing."""
    skel = set(skel)
    while True:
        adj = _reduced_adjacency(skel)
        removable = [p for p in skel
                     if len(adj[p]) <= 1 and not _on_border(p, h, w)]
        removable += [p for p in skel
                      if len(adj[p]) == 0 and _on_border(p, h, w)]
        if not removable:
            return skel
        skel -= set(removable)


# --------------------------------------------------------------------------
# frame ring geometry (half a pixel outside the raster)


def _ring_perimeter(h: int, w: int) -> float:
    return 2.0 * (w + h)


def _ring_pos(t: float, h: int, w: int) -> tuple[float, float]:
    t = t % _ring_perimeter(h, w)
    if t <= w:
        return (-0.5, -0.5 + t)
    t -= w
    if t <= h:
        return (-0.5 + t, w - 0.5)
    t -= h
    if t <= w:
        return (h - 0.5, w - 0.5 - t)
    t -= w
    return (h - 0.5 - t, -0.5)


_CORNER_T = {  # corner pixel -> ring parameter
    "nw": lambda h, w: 0.0,
    "ne": lambda h, w: float(w),
    "se": lambda h, w: float(w + h),
    "sw": lambda h, w: float(2 * w + h),
}


def _anchor_ring_t(p, h, w) -> float:
    r, c = p
    if (r, c) == (0, 0):
        return 0.0
    if (r, c) == (0, w - 1):
        return float(w)
    if (r, c) == (h - 1, w - 1):
        return float(w + h)
    if (r, c) == (h - 1, 0):
        return float(2 * w + h)
    if r == 0:
        return c + 0.5
    if c == w - 1:
        return w + r + 0.5
    if r == h - 1:
        return 2 * w + h - c - 0.5
    if c == 0:
        return 2 * (w + h) - r - 0.5
    raise ValueError(f"{p} is not a border pixel")


def _frame_chain(t1: float, t2: float, pos1, pos2, h: int, w: int) -> np.ndarray:
    """Ring path between two frame nodes at parameters t1 < t2 (cyclically)."""
    per = _ring_perimeter(h, w)
    if t2 <= t1:
        t2 += per
    points = [pos1]
    t = math.floor(t1) + 1.0
    while t < t2 - 0.25:
        if t > t1 + 0.25:
            points.append(_ring_pos(t, h, w))
        t += 1.0
    points.append(pos2)
    return np.asarray(points, dtype=np.float64)


# --------------------------------------------------------------------------
# graph extraction


def extract_graph(ws: WatershedResult) -> BoundaryGraph:
    """Build the boundary graph of a watershed partition.

    Raises :class:`RidgeTopologyError` when the ridge network cannot be
    embedded consistently (reported with pixel coordinates).
    """
    if ws.num_basins < 1:
        raise ValueError("watershed must contain at least one basin")
    h, w = ws.basin_labels.shape

    skel = _skeletonize_ridges(ws.ridge_mask)
    skel = _drop_border_runs(skel, h, w)
    skel = _prune_spurs(skel, h, w)
    adj = _reduced_adjacency(skel)

    # node pixels: junctions, border contacts, one artificial pixel per
    # junction-free cycle
    node_pixels = {p for p in skel if len(adj[p]) >= 3 or _on_border(p, h, w)}
    node_pixels |= _cycle_representatives(skel, adj, node_pixels)

    chains = _trace_chains(skel, adj, node_pixels)

    # assemble nodes: skeleton nodes in scan order, then frame corners
    nodes: list[dict] = []
    index_of: dict[tuple[int, int], int] = {}
    for p in sorted(node_pixels):
        kind = "anchor" if _on_border(p, h, w) else (
            "junction" if len(adj[p]) >= 3 else "loop")
        index_of[p] = len(nodes)
        nodes.append({"pos": (float(p[0]), float(p[1])), "kind": kind, "t": None})

    anchors = [(p, _anchor_ring_t(p, h, w)) for p in sorted(node_pixels)
               if _on_border(p, h, w)]
    taken_t = {t for _, t in anchors}
    frame_nodes: list[tuple[float, int]] = [(t, index_of[p]) for p, t in anchors]
    for name in ("nw", "ne", "se", "sw"):
        t = _CORNER_T[name](h, w)
        if t not in taken_t:
            idx = len(nodes)
            nodes.append({"pos": _ring_pos(t, h, w), "kind": "corner", "t": t})
            frame_nodes.append((t, idx))
    frame_nodes.sort()

    arcs: list[dict] = []
    for chain in chains:
        arcs.append({
            "i": index_of[chain[0]],
            "j": index_of[chain[-1]],
            "chain": np.asarray(chain, dtype=np.float64),
            "frame": False,
        })
    for k, (t1, n1) in enumerate(frame_nodes):
        t2, n2 = frame_nodes[(k + 1) % len(frame_nodes)]
        pos1 = np.asarray(nodes[n1]["pos"])
        pos2 = np.asarray(nodes[n2]["pos"])
        arcs.append({
            "i": n1, "j": n2,
            "chain": _frame_chain(t1, t2, pos1, pos2, h, w),
            "frame": True,
        })

    return _assemble(nodes, arcs, ws, h, w)


def _cycle_representatives(skel, adj, node_pixels) -> set:
    """Smallest pixel of every connected component without a node pixel."""
    reps = set()
    seen = set()
    for start in sorted(skel):
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        has_node = False
        while stack:
            p = stack.pop()
            comp.append(p)
            if p in node_pixels:
                has_node = True
            for q in adj[p]:
                if q not in seen:
                    seen.add(q)
                    stack.append(q)
        if not has_node and comp:
            reps.add(min(comp))
    return reps


def _trace_chains(skel, adj, node_pixels) -> list[list[tuple[int, int]]]:
    """Maximal chains between node pixels (self-loops included)."""
    chains = []
    visited = set()

    def edge_key(a, b):
        return (a, b) if a <= b else (b, a)

    for p in sorted(node_pixels):
        for q in adj[p]:
            if edge_key(p, q) in visited:
                continue
            visited.add(edge_key(p, q))
            chain = [p, q]
            prev, cur = p, q
            while cur not in node_pixels:
                nbrs = [x for x in adj[cur] if x != prev]
                if len(nbrs) != 1:
                    raise RidgeTopologyError(
                        "chain pixel with unexpected branching", [cur])
                nxt = nbrs[0]
                visited.add(edge_key(cur, nxt))
                chain.append(nxt)
                prev, cur = cur, nxt
            chains.append(chain)
    # every skeleton pixel must be covered (pure cycles got a representative)
    covered = {p for ch in chains for p in ch}
    stray = set(skel) - covered - set(node_pixels)
    if stray:
        raise RidgeTopologyError("skeleton pixels not covered by any chain",
                                 sorted(stray))
    return chains


def _departure_angle(chain: np.ndarray, from_start: bool) -> float:
    p0 = chain[0] if from_start else chain[-1]
    p1 = chain[1] if from_start else chain[-2]
    # counterclockwise from +col axis, row axis points down the display
    return math.atan2(-(p1[0] - p0[0]), p1[1] - p0[1])


def _assemble(nodes: list[dict], arcs: list[dict], ws, h: int, w: int) -> BoundaryGraph:
    # rotation system: darts leaving each node, counterclockwise
    incident: list[list] = [[] for _ in nodes]
    for aid, arc in enumerate(arcs):
        incident[arc["i"]].append(((aid, True), _departure_angle(arc["chain"], True)))
        incident[arc["j"]].append(((aid, False), _departure_angle(arc["chain"], False)))
    rotations = []
    for nid, entries in enumerate(incident):
        entries.sort(key=lambda e: (e[1], e[0]))
        angles = [e[1] for e in entries]
        if len(set(angles)) != len(angles):
            raise RidgeTopologyError("coincident departure angles at node",
                                     [tuple(map(int, nodes[nid]["pos"]))])
        rotations.append(tuple(e[0] for e in entries))

    node_objs = tuple(Node(id=i, pos=tuple(n["pos"]), incident=rotations[i],
                           kind=n["kind"]) for i, n in enumerate(nodes))
    arc_objs = tuple(Arc(id=i, node_i=a["i"], node_j=a["j"], chain=a["chain"],
                         is_frame=a["frame"]) for i, a in enumerate(arcs))
    skeleton = BoundaryGraph(width=w, height=h, nodes=node_objs, arcs=arc_objs,
                             faces=(), outer_face_id=-1,
                             basin_labels=ws.basin_labels)

    walks = face_walks_from_rotation(skeleton)
    walk_basin = [_classify_walk(skeleton, walk, ws.basin_labels) for walk in walks]

    # merge walks by basin (OUTER is basin 0); nested components give one
    # face several boundary walks
    by_basin: dict[int, list[int]] = {}
    for wi, b in enumerate(walk_basin):
        by_basin.setdefault(b, []).append(wi)
    missing = set(range(1, ws.num_basins + 1)) - set(by_basin)
    if missing:
        raise RidgeTopologyError(
            f"basins {sorted(missing)} have no boundary walk", [])
    if 0 not in by_basin:
        raise RidgeTopologyError("no walk traces the outer face", [])

    counts = np.bincount(ws.basin_labels.ravel(),
                         minlength=ws.num_basins + 1)
    face_objs = []
    face_of_walk = {}
    for basin in sorted(by_basin):
        face_id = len(face_objs)
        arcs_here = sorted({d[0] for wi in by_basin[basin] for d in walks[wi]})
        face_objs.append(Face(id=face_id, basin_id=basin,
                              pixel_count=int(counts[basin]) if basin else 0,
                              arc_ids=tuple(arcs_here)))
        for wi in by_basin[basin]:
            face_of_walk[wi] = face_id
    outer_face_id = face_of_walk[by_basin[0][0]]

    dart_face = {}
    for wi, walk in enumerate(walks):
        for d in walk:
            dart_face[d] = face_of_walk[wi]
    final_arcs = []
    for arc in arc_objs:
        left = dart_face[(arc.id, True)]
        right = dart_face[(arc.id, False)]
        if left == right:
            raise RidgeTopologyError(
                f"arc {arc.id} has the same face on both sides",
                [tuple(map(int, arc.chain[0]))])
        final_arcs.append(Arc(id=arc.id, node_i=arc.node_i, node_j=arc.node_j,
                              chain=arc.chain, left_face=left, right_face=right,
                              is_frame=arc.is_frame))

    g = BoundaryGraph(width=w, height=h, nodes=node_objs,
                      arcs=tuple(final_arcs), faces=tuple(face_objs),
                      outer_face_id=outer_face_id,
                      basin_labels=ws.basin_labels)
    _check_euler(g)
    return g


def _classify_walk(g: BoundaryGraph, walk, basin_labels: np.ndarray) -> int:
    """Majority basin on the left of the walk; 0 means the outer side."""
    h, w = basin_labels.shape
    votes: Counter = Counter()
    for dart in walk:
        pts = dart_points(g, dart)
        for a, b in zip(pts[:-1], pts[1:]):
            dr, dc = b[0] - a[0], b[1] - a[1]
            norm = math.hypot(dr, dc)
            if norm == 0:
                continue
            # left of (dr, dc) in display coordinates
            lr, lc = -dc / norm, dr / norm
            for k in (1, 2, 3):
                rr = int(np.rint(a[0] + k * lr))
                cc = int(np.rint(a[1] + k * lc))
                if not (0 <= rr < h and 0 <= cc < w):
                    votes[0] += 1
                    break
                if basin_labels[rr, cc] > 0:
                    votes[int(basin_labels[rr, cc])] += 1
                    break
    if not votes:
        raise RidgeTopologyError("face walk encloses no pixels",
                                 [tuple(map(int, dart_points(g, walk[0])[0]))])
    winner, n = votes.most_common(1)[0]
    if n * 2 <= sum(votes.values()):
        raise RidgeTopologyError(
            f"ambiguous face (votes {dict(votes)})",
            [tuple(map(int, dart_points(g, walk[0])[0]))])
    return winner


def _check_euler(g: BoundaryGraph) -> None:
    v, e, f = len(g.nodes), len(g.arcs), len(g.faces)
    c = g.num_components()
    if v - e + f != 1 + c:
        raise RidgeTopologyError(
            f"Euler check failed: V={v} E={e} F={f} C={c}", [])


# --------------------------------------------------------------------------
# node states


@dataclass(frozen=True)
class NodeState:
    index: int
    in_dart: tuple[int, bool] | None   # traversal arriving at the node
    out_dart: tuple[int, bool] | None  # traversal leaving the node
    beta_deg: float | None             # turning angle; 180 = straight through


@dataclass(frozen=True)
class NodeStateTable:
    states: tuple[tuple[NodeState, ...], ...]  # indexed by node id

    def num_states(self, node_id: int) -> int:
        return len(self.states[node_id])


def _outward_tangent(g: BoundaryGraph, node: Node, dart, window: int,
                     beta_source: str, response=None) -> np.ndarray:
    """Unit vector pointing away from ``node`` along the dart's arc."""
    pts = dart_points(g, dart)
    m = min(window, len(pts) - 1)
    p0 = np.asarray(node.pos, dtype=np.float64)
    vec = (pts[1:m + 1] - p0).sum(axis=0)
    norm = np.hypot(*vec)
    if norm == 0:
        raise RidgeTopologyError("degenerate tangent at node",
                                 [tuple(map(int, node.pos))])
    geom = vec / norm
    if beta_source == "geometry" or g.arcs[dart[0]].is_frame:
        return geom
    if response is None:
        raise ValueError("beta_source='filter' requires an oriented response")
    # undirected line orientation from the filter bank, averaged with the
    # doubled-angle trick, then signed to point away from the node
    acc = np.zeros(2)
    h, w = response.argmax_orientation.shape
    for p in pts[1:m + 1]:
        r, c = int(np.rint(p[0])), int(np.rint(p[1]))
        if 0 <= r < h and 0 <= c < w:
            t = 2.0 * np.deg2rad(float(response.argmax_orientation[r, c]))
            acc += (np.cos(t), np.sin(t))
    if np.hypot(*acc) < 1e-12:
        return geom
    phi = 0.5 * math.atan2(acc[1], acc[0])
    direction = np.array([-math.sin(phi), math.cos(phi)])  # (row, col)
    if float(direction @ geom) < 0:
        direction = -direction
    return direction


def enumerate_node_states(g: BoundaryGraph, window: int = 5,
                          beta_source: str = "geometry",
                          response=None) -> NodeStateTable:
    """State 0 plus two directed pairings per unordered pair of arc-ends.

    A node with L arc-ends gets 2 * C(L, 2) + 1 states. The turning angle of
    a pairing is the unsigned angle between the two outward tangents, so a
    straight pass-through scores 180 degrees.
    """
    if beta_source not in ("geometry", "filter"):
        raise ValueError(f"beta_source must be 'geometry' or 'filter', "
                         f"got {beta_source!r}")
    all_states = []
    for node in g.nodes:
        if node.degree < 2:
            raise RidgeTopologyError("node of degree < 2",
                                     [tuple(map(int, node.pos))])
        tangents = [_outward_tangent(g, node, d, window, beta_source, response)
                    for d in node.incident]
        states = [NodeState(index=0, in_dart=None, out_dart=None, beta_deg=None)]
        for x in range(node.degree):
            for y in range(x + 1, node.degree):
                cosb = float(np.clip(tangents[x] @ tangents[y], -1.0, 1.0))
                beta = math.degrees(math.acos(cosb))
                dx, dy = node.incident[x], node.incident[y]
                # incoming = twin of the outgoing dart stored at this node
                states.append(NodeState(index=len(states),
                                        in_dart=dart_twin(dx), out_dart=dy,
                                        beta_deg=beta))
                states.append(NodeState(index=len(states),
                                        in_dart=dart_twin(dy), out_dart=dx,
                                        beta_deg=beta))
        all_states.append(tuple(states))
    return NodeStateTable(states=tuple(all_states))


# --------------------------------------------------------------------------
# debug serialization


def graph_to_json(g: BoundaryGraph) -> str:
    """Stable-keyed JSON dump of the graph (chains included)."""
    doc = {
        "width": g.width,
        "height": g.height,
        "outer_face": g.outer_face_id,
        "nodes": [{
            "id": n.id,
            "pos": [n.pos[0], n.pos[1]],
            "kind": n.kind,
            "incident": [[a, int(fwd)] for a, fwd in n.incident],
        } for n in g.nodes],
        "arcs": [{
            "id": a.id,
            "i": a.node_i,
            "j": a.node_j,
            "left": a.left_face,
            "right": a.right_face,
            "frame": a.is_frame,
            "chain": [[float(r), float(c)] for r, c in a.chain],
        } for a in g.arcs],
        "faces": [{
            "id": f.id,
            "basin": f.basin_id,
            "pixels": f.pixel_count,
            "arcs": list(f.arc_ids),
        } for f in g.faces],
    }
    return json.dumps(doc, indent=1)


def graph_from_json(text: str) -> BoundaryGraph:
    doc = json.loads(text)
    nodes = tuple(Node(id=n["id"], pos=(n["pos"][0], n["pos"][1]),
                       incident=tuple((a, bool(f)) for a, f in n["incident"]),
                       kind=n["kind"]) for n in doc["nodes"])
    arcs = tuple(Arc(id=a["id"], node_i=a["i"], node_j=a["j"],
                     chain=np.asarray(a["chain"], dtype=np.float64),
                     left_face=a["left"], right_face=a["right"],
                     is_frame=a["frame"]) for a in doc["arcs"])
    faces = tuple(Face(id=f["id"], basin_id=f["basin"], pixel_count=f["pixels"],
                       arc_ids=tuple(f["arcs"])) for f in doc["faces"])
    return BoundaryGraph(width=doc["width"], height=doc["height"], nodes=nodes,
                         arcs=arcs, faces=faces, outer_face_id=doc["outer_face"])
