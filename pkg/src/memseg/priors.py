"""A priori activation scores for arcs, faces, and node states.

Region scores come from averaging the membrane probability over a face's
pixels; edge scores from the oriented filter response along an arc's chain,
normalized by a high percentile over all ridge pixels; node-state scores from
a Gaussian in the turning angle that peaks at a straight pass-through.

The edge score is a self-contained stand-in for a trained boundary
classifier: anything in [0, 1] per arc works, and the table is the single
hand-off point if a learned score is dropped in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PriorConfig
from .filters import OrientedResponse
from .imagery import ProbabilityMap
from .plangraph import BoundaryGraph, NodeStateTable


@dataclass(frozen=True)
class PriorTable:
    edge: np.ndarray                      # per arc, in [0, 1]
    region: np.ndarray                    # per face, in [0, 1]; outer fixed 0
    node_state: tuple[np.ndarray, ...]    # per node, per state; state 0 is 1

    def __post_init__(self):
        self.edge.setflags(write=False)
        self.region.setflags(write=False)
        for arr in self.node_state:
            arr.setflags(write=False)


def node_state_score(beta_deg: float, sigma_deg: float = 45.0) -> float:
    """Smoothness score of a directed pass-through with turning angle beta.

    Gaussian with mean 180 degrees; angles are normalized to half-turns
    (beta / 180) before evaluating, which puts the peak at
    1 / (sigma_ht * sqrt(2 pi)) ~= 1.59577 for sigma = 45 degrees.
    """
    if not 0.0 <= beta_deg <= 360.0:
        raise ValueError(f"beta must be in [0, 360] degrees, got {beta_deg}")
    t = beta_deg / 180.0
    s = sigma_deg / 180.0
    return math.exp(-((t - 1.0) ** 2) / (2.0 * s * s)) / (s * math.sqrt(2.0 * math.pi))


def region_prior(pmap: ProbabilityMap, g: BoundaryGraph) -> np.ndarray:
    """P(cell interior) per face: one minus the mean membrane probability."""
    if g.basin_labels is None:
        raise ValueError("graph carries no basin raster")
    labels = g.basin_labels
    nb = int(labels.max(initial=0))
    sums = np.bincount(labels.ravel(), weights=pmap.values.ravel(),
                       minlength=nb + 1)
    counts = np.bincount(labels.ravel(), minlength=nb + 1)
    out = np.zeros(len(g.faces))
    for f in g.faces:
        if f.id == g.outer_face_id:
            out[f.id] = 0.0
        else:
            if counts[f.basin_id] == 0:
                raise ValueError(f"face {f.id} has no pixels")
            out[f.id] = 1.0 - sums[f.basin_id] / counts[f.basin_id]
    return np.clip(out, 0.0, 1.0)


def edge_prior(resp: OrientedResponse | np.ndarray, g: BoundaryGraph,
               norm_percentile: float = 99.0) -> np.ndarray:
    """Ridge strength along each arc, normalized to [0, 1] image-wide.

    Normalization uses the given percentile of the response over all ridge
    pixels, so rescaling the response by a positive constant leaves the
    scores unchanged. Frame arcs sample the border pixels under their chains
    and so pick up whatever (typically weak) evidence is there.
    """
    response = resp.max_response if isinstance(resp, OrientedResponse) else resp
    h, w = response.shape
    if g.basin_labels is not None:
        ridge_vals = response[g.basin_labels == 0]
    else:
        pix = np.concatenate([a.chain for a in g.arcs if not a.is_frame]) \
            if any(not a.is_frame for a in g.arcs) else np.zeros((0, 2))
        ridge_vals = response[np.clip(np.rint(pix[:, 0]).astype(int), 0, h - 1),
                              np.clip(np.rint(pix[:, 1]).astype(int), 0, w - 1)] \
            if len(pix) else np.zeros(0)
    q = float(np.percentile(ridge_vals, norm_percentile)) if len(ridge_vals) else 0.0
    out = np.zeros(len(g.arcs))
    if q <= 0.0:
        return out
    for arc in g.arcs:
        rr = np.clip(np.rint(arc.chain[:, 0]).astype(int), 0, h - 1)
        cc = np.clip(np.rint(arc.chain[:, 1]).astype(int), 0, w - 1)
        out[arc.id] = min(max(float(response[rr, cc].mean()) / q, 0.0), 1.0)
    return out


def build_priors(pmap: ProbabilityMap, resp: OrientedResponse | np.ndarray,
                 g: BoundaryGraph, ns: NodeStateTable,
                 cfg: PriorConfig | None = None) -> PriorTable:
    cfg = cfg or PriorConfig()
    node_scores = []
    for states in ns.states:
        scores = np.ones(len(states))
        for s in states[1:]:
            scores[s.index] = node_state_score(s.beta_deg, cfg.node_sigma_deg)
        node_scores.append(scores)
    return PriorTable(edge=edge_prior(resp, g, cfg.edge_norm_percentile),
                      region=region_prior(pmap, g),
                      node_state=tuple(node_scores))
