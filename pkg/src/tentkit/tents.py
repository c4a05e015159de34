"""Advancing-front tent pitching.

The front is a piecewise-linear time function tau over the mesh; a tent
raises tau at one vertex by the pole height while keeping the edge-slope
bound |tau(e1)-tau(e2)|/|e| <= ctau/c_e, which in turn bounds the
elementwise gradient of tau by 1/c_T.  Pitching a whole slab advances
every vertex to the slab top and groups tents into layers with pairwise
disjoint vertex patches.
"""

import heapq

import numpy as np

from .errors import EmptyReadySet, StalledFront
from .mesh import VertexPatch, mesh_quality

__all__ = ["PitchParams", "AdvancingFront", "Tent", "TentSlab",
           "init_front", "pitch_tent", "pitch_slab", "causality_check",
           "default_ctau"]


def default_ctau(mesh):
    """Shape constant for the edge-slope bound: sin of the minimum angle.

    For a linear function on a triangle, bounding all edge slopes by
    ctau/c_e bounds the gradient by 1/(c_T sin(theta_min)); this choice
    makes the edge bound imply the elementwise gradient bound.
    """
    return float(np.sin(mesh_quality(mesh)[0]))


class PitchParams:
    """Knobs of the pitching loop.

    gamma      ready-set threshold in (0,1)
    ctau       shape constant of the edge-slope bound
    t_slab     time height of one slab
    edge_speeds  per-edge wavespeed bound c_e (scalar broadcasts)
    """

    def __init__(self, mesh, t_slab, edge_speeds, ctau=None, gamma=0.5):
        if not 0.0 < gamma < 1.0:
            raise ValueError("gamma must lie in (0,1)")
        if t_slab <= 0.0:
            raise ValueError("t_slab must be positive")
        if ctau is None:
            ctau = default_ctau(mesh)
        if ctau <= 0.0:
            raise ValueError("ctau must be positive")
        speeds = np.broadcast_to(np.asarray(edge_speeds, dtype=float),
                                 (mesh.num_edges,)).copy()
        if np.any(speeds <= 0.0):
            raise ValueError("edge speeds must be positive")
        self.gamma = float(gamma)
        self.ctau = float(ctau)
        self.t_slab = float(t_slab)
        self.edge_speeds = speeds


class Tent:
    """One spacetime tent: a pole of height `k` over `patch.center`."""

    __slots__ = ("id", "vertex", "k", "patch", "tau_bot", "tau_top", "layer")

    def __init__(self, tid, vertex, k, patch, tau_bot, tau_top, layer=-1):
        self.id = tid
        self.vertex = vertex
        self.k = k
        self.patch = patch
        self.tau_bot = tau_bot   # per patch vertex, patch-local order
        self.tau_top = tau_top
        self.layer = layer

    def volume(self):
        """Spacetime volume: integral of delta = k * hat(center) over the patch."""
        mesh = self.patch.mesh
        return self.k * mesh.areas[self.patch.elements].sum() / 3.0


class AdvancingFront:
    """Mutable pitching state: tau, potential advances, ready set."""

    def __init__(self, mesh, params):
        self.mesh = mesh
        self.params = params
        nv = mesh.num_vertices
        self.tau = np.zeros(nv)
        # max pole height on a flat front: min over incident edges
        bound = params.ctau * mesh.edge_lengths / params.edge_speeds
        self.ref_heights = np.array(
            [bound[mesh.vertex_to_edges[v]].min() for v in range(nv)])
        self.ktilde = np.minimum(self.ref_heights, params.t_slab)
        self.ready = np.ones(nv, dtype=bool)
        self._heap = [(0.0, v) for v in range(nv)]
        heapq.heapify(self._heap)
        self._patches = {}
        self._n_pitched = 0

    # a vertex is ready when it can make good progress *or* reach the
    # slab top; without the second clause the front stalls near the top
    def _is_ready(self, v):
        p = self.params
        if self.tau[v] >= p.t_slab:
            return False
        need = min(p.gamma * self.ref_heights[v], p.t_slab - self.tau[v])
        return self.ktilde[v] >= need

    def _refresh_ready(self, v):
        was = self.ready[v]
        now = self._is_ready(v)
        self.ready[v] = now
        if now and not was:
            heapq.heappush(self._heap, (self.tau[v], v))

    def ready_set(self):
        return np.flatnonzero(self.ready)

    def done(self):
        return bool(np.all(self.tau >= self.params.t_slab))

    def patch(self, v):
        patch = self._patches.get(v)
        if patch is None:
            patch = VertexPatch(self.mesh, v)
            self._patches[v] = patch
        return patch

    def _recompute_ktilde(self, v):
        mesh, p = self.mesh, self.params
        slack = np.inf
        for e in mesh.vertex_to_edges[v]:
            a, b = mesh.edges[e]
            other = b if a == v else a
            slack = min(slack, self.tau[other] - self.tau[v]
                        + mesh.edge_lengths[e] * p.ctau / p.edge_speeds[e])
        self.ktilde[v] = min(p.t_slab - self.tau[v], slack)

    def pick(self):
        """Deterministic choice: minimal tau, ties by smallest index."""
        while self._heap:
            tau, v = self._heap[0]
            if self.ready[v] and tau == self.tau[v]:
                return v
            heapq.heappop(self._heap)
        return None


def init_front(mesh, params):
    front = AdvancingFront(mesh, params)
    if not np.all(front.ready):
        raise StalledFront("no vertex ready on the initial front")
    return front


def pitch_tent(front, pick_rule=None):
    """Pitch one tent and update the front (pole, potential advances,
    ready set).  pick_rule(front) may override the default vertex choice."""
    v = pick_rule(front) if pick_rule is not None else front.pick()
    if v is None or not front.ready[v]:
        if front.done():
            raise EmptyReadySet("front already reached the slab top")
        raise StalledFront(
            "ready set empty with %d vertices below the slab top "
            "(gamma too aggressive or inconsistent ctau/speeds)"
            % int(np.sum(front.tau < front.params.t_slab)))
    mesh, p = front.mesh, front.params
    patch = front.patch(v)
    k = front.ktilde[v]
    tau_bot = front.tau[patch.vertices].copy()
    # snap exactly to the slab top when the clamp is active
    if k >= p.t_slab - front.tau[v]:
        k = p.t_slab - front.tau[v]
        front.tau[v] = p.t_slab
    else:
        front.tau[v] = front.tau[v] + k
    if k <= 0.0:
        raise StalledFront("vertex %d picked with nonpositive advance" % v)
    tau_top = tau_bot.copy()
    tau_top[0] = front.tau[v]        # patch-local index 0 is the center
    tent = Tent(front._n_pitched, v, k, patch, tau_bot, tau_top)
    front._n_pitched += 1
    front._recompute_ktilde(v)
    front._refresh_ready(v)
    for u in patch.vertices[1:]:
        front._recompute_ktilde(u)
        front._refresh_ready(u)
    if front.ready[v]:
        heapq.heappush(front._heap, (front.tau[v], v))
    return tent


class TentSlab:
    """Ordered tents covering mesh x (0, t_slab), with layer assignment."""

    def __init__(self, mesh, params, tents, layers):
        self.mesh = mesh
        self.params = params
        self.tents = tents
        self.layers = layers

    @property
    def num_layers(self):
        return len(self.layers)

    def volume(self):
        return sum(t.volume() for t in self.tents)

    def stats(self):
        ks = np.array([t.k for t in self.tents])
        return {
            "tents": len(self.tents),
            "layers": self.num_layers,
            "k_min": float(ks.min()),
            "k_max": float(ks.max()),
        }


def pitch_slab(mesh, params):
    """Pitch until every vertex reaches the slab top.

    Layer assignment respects dependencies: a tent goes one layer above
    the last tent that touched any of its patch elements, so patches
    within a layer are pairwise disjoint *and* executing layer by layer
    reproduces the pitch-order front exactly.  (Assigning the smallest
    non-conflicting layer instead can schedule a tent before an earlier
    tent it reads from.)
    """
    front = init_front(mesh, params)
    tents = []
    layers = []
    last_layer = np.full(mesh.num_elements, -1, dtype=np.int64)
    while not front.done():
        tent = pitch_tent(front)
        elems = tent.patch.elements
        li = int(last_layer[elems].max()) + 1
        tent.layer = li
        if li == len(layers):
            layers.append([])
        layers[li].append(tent.id)
        last_layer[elems] = li
        tents.append(tent)
    return TentSlab(mesh, params, tents, layers)


def causality_check(tent, law=None, front_state=None, margin=1e-8,
                    element_speeds=None):
    """True iff (local wavespeed) * |grad phi| < 1 - margin on every patch
    element at both cylinder ends.

    Speeds come from `element_speeds` (per patch element) when given;
    otherwise from the law evaluated on `front_state` samples, or, for
    state-independent laws, on centroids alone.
    """
    from .mapping import build_tent_map   # local import to avoid a cycle

    tmap = build_tent_map(tent, tent.patch.mesh)
    if element_speeds is None:
        element_speeds = _patch_speeds(tent, law, front_state)
    g0 = np.linalg.norm(tmap.grad_bot, axis=1)
    g1 = np.linalg.norm(tmap.grad_top, axis=1)
    worst = np.max(element_speeds * np.maximum(g0, g1))
    return bool(worst < 1.0 - margin)


def _patch_speeds(tent, law, front_state):
    mesh = tent.patch.mesh
    elems = tent.patch.elements
    if front_state is not None:
        return front_state.patch_max_speeds(law, elems)
    centroids = mesh.vertices[mesh.elements[elems]].mean(axis=1)
    speeds = np.empty(len(elems))
    for i, x in enumerate(centroids):
        speeds[i] = float(np.max(law.max_wavespeed(x.reshape(2, 1), 0.0, None)))
    return speeds
