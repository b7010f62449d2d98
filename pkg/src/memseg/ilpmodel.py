"""The 0-1 program: variables, topological constraints, objective.

Per arc there are three binaries (two directions plus "off"), per node one
binary per state, per face an on/off pair. The constraints encode, in order:

  EdgeActivation           exactly one of the three arc states;
  NodeActivation           exactly one node state;
  RegionActivation         exactly one of face on/off;
  ClosedLoop               an active node has exactly two active directed
                           edges attached, an inactive node none;
  NodeEdgeCorrespondence   an active state forces its designated directed
                           pair, and the pair may not co-activate otherwise;
  Clockwise                an active directed edge has the foreground face on
                           its right, an inactive arc equal classes;
  MembraneContinuity       a background face keeps at least two of its
                           bounding arcs off, so background stays contiguous;
  OuterFaceFix             the outer face is pinned to background, breaking
                           the global foreground/background symmetry.

Coefficients are all in {-2, -1, 1, 2}; self-loop arcs contribute twice at
their node, which is where the 2s come from.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Weights
from .plangraph import BoundaryGraph, NodeStateTable
from .priors import PriorTable

CONSTRAINT_TAGS = ("EdgeActivation", "NodeActivation", "RegionActivation",
                   "ClosedLoop", "NodeEdgeCorrespondence", "Clockwise",
                   "MembraneContinuity", "OuterFaceFix")


@dataclass(frozen=True)
class VarId:
    index: int
    kind: str        # edge_dir | edge_off | node_state | region_on | region_off
    owner: int       # arc, node, or face id
    detail: int = 0  # direction (1 fwd / 0 rev) or state index
    name: str = ""


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, int], ...]  # (variable index, integer coefficient)
    lo: int
    hi: int
    tag: str
    owner: int = -1

    def value(self, x) -> int:
        return int(sum(c * int(x[i]) for i, c in self.terms))

    def violated(self, x) -> bool:
        v = self.value(x)
        return v < self.lo or v > self.hi


@dataclass(frozen=True)
class IlpModel:
    num_vars: int
    variables: tuple[VarId, ...]
    constraints: tuple[LinearConstraint, ...]
    objective: np.ndarray
    weights: Weights
    arc_base: tuple[int, ...]    # index of e_fwd; rev/off follow
    node_base: tuple[int, ...]
    node_num_states: tuple[int, ...]
    face_base: tuple[int, ...]   # index of r; r0 follows
    outer_face_id: int

    def __post_init__(self):
        self.objective.setflags(write=False)

    def edge_var(self, arc_id: int, forward: bool) -> int:
        return self.arc_base[arc_id] + (0 if forward else 1)

    def edge_off_var(self, arc_id: int) -> int:
        return self.arc_base[arc_id] + 2

    def node_state_var(self, node_id: int, state: int) -> int:
        return self.node_base[node_id] + state

    def region_var(self, face_id: int, on: bool = True) -> int:
        return self.face_base[face_id] + (0 if on else 1)


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[tuple[int, int], ...]  # (constraint index, actual value)
    objective: float

    @property
    def feasible(self) -> bool:
        return not self.violations

    def violated_tags(self, model: IlpModel) -> set[str]:
        return {model.constraints[i].tag for i, _ in self.violations}


def _dart_var(model: IlpModel, dart) -> int:
    return model.edge_var(dart[0], dart[1])


def build_variables(g: BoundaryGraph, ns: NodeStateTable):
    variables: list[VarId] = []
    arc_base = []
    for arc in g.arcs:
        arc_base.append(len(variables))
        i, j, k = arc.node_i, arc.node_j, arc.id
        variables.append(VarId(len(variables), "edge_dir", k, 1, f"e_{i}_{j}_a{k}"))
        variables.append(VarId(len(variables), "edge_dir", k, 0, f"e_{j}_{i}_a{k}"))
        variables.append(VarId(len(variables), "edge_off", k, 0, f"e0_a{k}"))
    node_base = []
    node_num_states = []
    for node in g.nodes:
        node_base.append(len(variables))
        p = ns.num_states(node.id)
        node_num_states.append(p)
        for c in range(p):
            variables.append(VarId(len(variables), "node_state", node.id, c,
                                   f"n_{node.id}_{c}"))
    face_base = []
    for face in g.faces:
        face_base.append(len(variables))
        variables.append(VarId(len(variables), "region_on", face.id, 1,
                               f"r_{face.id}"))
        variables.append(VarId(len(variables), "region_off", face.id, 0,
                               f"r0_{face.id}"))
    return variables, tuple(arc_base), tuple(node_base), tuple(node_num_states), \
        tuple(face_base)


def build_constraints(g: BoundaryGraph, ns: NodeStateTable,
                      model: IlpModel) -> tuple[LinearConstraint, ...]:
    cons: list[LinearConstraint] = []
    for arc in g.arcs:
        cons.append(LinearConstraint(
            terms=((model.edge_var(arc.id, True), 1),
                   (model.edge_var(arc.id, False), 1),
                   (model.edge_off_var(arc.id), 1)),
            lo=1, hi=1, tag="EdgeActivation", owner=arc.id))
    for node in g.nodes:
        terms = tuple((model.node_state_var(node.id, c), 1)
                      for c in range(ns.num_states(node.id)))
        cons.append(LinearConstraint(terms=terms, lo=1, hi=1,
                                     tag="NodeActivation", owner=node.id))
    for face in g.faces:
        cons.append(LinearConstraint(
            terms=((model.region_var(face.id, True), 1),
                   (model.region_var(face.id, False), 1)),
            lo=1, hi=1, tag="RegionActivation", owner=face.id))
    for node in g.nodes:
        coeffs: dict[int, int] = {model.node_state_var(node.id, 0): 2}
        for dart in node.incident:  # both directions of every attached end
            for fwd in (True, False):
                v = model.edge_var(dart[0], fwd)
                coeffs[v] = coeffs.get(v, 0) + 1
        cons.append(LinearConstraint(terms=tuple(sorted(coeffs.items())),
                                     lo=2, hi=2, tag="ClosedLoop",
                                     owner=node.id))
    for node in g.nodes:
        for state in ns.states[node.id][1:]:
            coeffs = {model.node_state_var(node.id, state.index): -2}
            for dart in (state.out_dart, state.in_dart):
                v = _dart_var(model, dart)
                coeffs[v] = coeffs.get(v, 0) + 1
            cons.append(LinearConstraint(terms=tuple(sorted(coeffs.items())),
                                         lo=0, hi=1,
                                         tag="NodeEdgeCorrespondence",
                                         owner=node.id))
    for arc in g.arcs:
        cons.append(LinearConstraint(
            terms=((model.edge_var(arc.id, True), -1),
                   (model.edge_var(arc.id, False), 1),
                   (model.region_var(arc.right_face, True), 1),
                   (model.region_var(arc.left_face, True), -1)),
            lo=0, hi=0, tag="Clockwise", owner=arc.id))
    for face in g.faces:
        terms = [(model.region_var(face.id, True), 1),
                 (model.region_var(face.id, False), -1)]
        terms += [(model.edge_off_var(a), 1) for a in face.arc_ids]
        cons.append(LinearConstraint(terms=tuple(terms), lo=1,
                                     hi=len(face.arc_ids) + 1,
                                     tag="MembraneContinuity", owner=face.id))
    cons.append(LinearConstraint(
        terms=((model.region_var(g.outer_face_id, False), 1),),
        lo=1, hi=1, tag="OuterFaceFix", owner=g.outer_face_id))
    return tuple(cons)


def build_objective(g: BoundaryGraph, ns: NodeStateTable, priors: PriorTable,
                    w: Weights, model: IlpModel) -> np.ndarray:
    obj = np.zeros(model.num_vars)
    for arc in g.arcs:
        u = priors.edge[arc.id]
        obj[model.edge_var(arc.id, True)] = w.e_on * u
        obj[model.edge_var(arc.id, False)] = w.e_on * u
        obj[model.edge_off_var(arc.id)] = w.e_off * (1.0 - u)
    for node in g.nodes:
        obj[model.node_state_var(node.id, 0)] = w.n_off * 1.0
        for state in ns.states[node.id][1:]:
            obj[model.node_state_var(node.id, state.index)] = \
                w.n_on * priors.node_state[node.id][state.index]
    for face in g.faces:
        u = priors.region[face.id]
        obj[model.region_var(face.id, True)] = w.r_on * u
        obj[model.region_var(face.id, False)] = w.r_off * (1.0 - u)
    return obj


def build_model(g: BoundaryGraph, ns: NodeStateTable, priors: PriorTable,
                weights: Weights | None = None) -> IlpModel:
    weights = weights or Weights()
    variables, arc_base, node_base, node_num_states, face_base = \
        build_variables(g, ns)
    model = IlpModel(num_vars=len(variables), variables=tuple(variables),
                     constraints=(), objective=np.zeros(len(variables)),
                     weights=weights, arc_base=arc_base, node_base=node_base,
                     node_num_states=node_num_states, face_base=face_base,
                     outer_face_id=g.outer_face_id)
    cons = build_constraints(g, ns, model)
    obj = build_objective(g, ns, priors, weights, model)
    return IlpModel(num_vars=model.num_vars, variables=model.variables,
                    constraints=cons, objective=obj, weights=weights,
                    arc_base=arc_base, node_base=node_base,
                    node_num_states=node_num_states, face_base=face_base,
                    outer_face_id=g.outer_face_id)


def check_feasible(model: IlpModel, assignment) -> FeasibilityReport:
    """Independent constraint check plus the objective of the assignment."""
    x = np.asarray(assignment)
    if x.shape != (model.num_vars,):
        raise ValueError(f"assignment length {x.shape} != ({model.num_vars},)")
    bad = np.setdiff1d(np.unique(x), [0, 1])
    if len(bad):
        raise ValueError(f"assignment must be 0/1, found {bad[:4]}")
    violations = []
    for idx, con in enumerate(model.constraints):
        v = con.value(x)
        if v < con.lo or v > con.hi:
            violations.append((idx, v))
    return FeasibilityReport(violations=tuple(violations),
                             objective=float(model.objective @ x))


def encode_face_classes(g: BoundaryGraph, ns: NodeStateTable, model: IlpModel,
                        face_class) -> np.ndarray:
    """Assignment implied by per-face foreground flags (1 = cell interior).

    Arcs between equal classes are off; an arc between classes is directed
    with the foreground on its right. Node states follow from the active
    darts. Raises if the classes admit no consistent state (some node would
    need more than two active edges).
    """
    face_class = np.asarray(face_class, dtype=int)
    if face_class.shape != (len(g.faces),):
        raise ValueError("face_class must have one entry per face")
    x = np.zeros(model.num_vars, dtype=np.int8)
    for face in g.faces:
        x[model.region_var(face.id, True)] = face_class[face.id]
        x[model.region_var(face.id, False)] = 1 - face_class[face.id]
    active: dict[int, bool] = {}
    for arc in g.arcs:
        lc, rc = face_class[arc.left_face], face_class[arc.right_face]
        if lc == rc:
            x[model.edge_off_var(arc.id)] = 1
        else:
            fwd = rc == 1  # foreground sits right of the active direction
            active[arc.id] = fwd
            x[model.edge_var(arc.id, fwd)] = 1
    for node in g.nodes:
        ins, outs = [], []
        for dart in node.incident:  # outgoing darts at this node
            if dart[0] not in active:
                continue
            fwd = active[dart[0]]
            if dart[1] == fwd:     # the active traversal leaves via this end
                outs.append((dart[0], fwd))
            else:                  # it arrives into this end
                ins.append((dart[0], fwd))
        if not ins and not outs:
            x[model.node_state_var(node.id, 0)] = 1
            continue
        if len(ins) != 1 or len(outs) != 1:
            raise ValueError(
                f"face classes need {len(ins)}+{len(outs)} active edges at "
                f"node {node.id}; no node state covers that")
        match = [s for s in ns.states[node.id][1:]
                 if s.in_dart == ins[0] and s.out_dart == outs[0]]
        if len(match) != 1:
            raise ValueError(f"no node state matches the active pair at "
                             f"node {node.id}")
        x[model.node_state_var(node.id, match[0].index)] = 1
    return x


def background_assignment(model: IlpModel) -> np.ndarray:
    """Everything off: all faces background, all arcs off, all nodes inactive."""
    x = np.zeros(model.num_vars, dtype=np.int8)
    for v in model.variables:
        if v.kind in ("edge_off", "region_off"):
            x[v.index] = 1
        elif v.kind == "node_state" and v.detail == 0:
            x[v.index] = 1
    return x


def model_to_lp(model: IlpModel) -> str:
    """Export in LP text format for cross-checking with external solvers."""
    names = [v.name for v in model.variables]
    lines = ["\\ boundary-graph binary program", "Minimize"]
    parts = []
    for i, c in enumerate(model.objective):
        if c != 0.0:
            parts.append(f"{'+' if c >= 0 else '-'} {abs(c):.12g} {names[i]}")
    lines.append(" obj: " + (" ".join(parts) if parts else "0 " + names[0]))
    lines.append("Subject To")

    def expr(terms):
        return " ".join(f"{'+' if c >= 0 else '-'} {abs(c)} {names[i]}"
                        for i, c in terms)

    for k, con in enumerate(model.constraints):
        if con.lo == con.hi:
            lines.append(f" c{k}: {expr(con.terms)} = {con.lo}")
        else:
            lines.append(f" c{k}_lo: {expr(con.terms)} >= {con.lo}")
            lines.append(f" c{k}_hi: {expr(con.terms)} <= {con.hi}")
    lines.append("Binary")
    lines.append(" " + " ".join(names))
    lines.append("End")
    return "\n".join(lines) + "\n"
