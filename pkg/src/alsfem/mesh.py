"""Triangulations as a refinement-history forest with newest-vertex bisection.

A Triangulation stores every triangle ever created as a node of a binary
forest; the leaves form the current mesh.  Each node keeps its vertex
triple ordered as (newest vertex z0, z1, z2) so that the refinement edge
is conv{z1, z2}, the edge opposite the newest vertex.  Bisection inserts
the midpoint of the refinement edge (reusing it if the neighbour already
split the same edge) and creates two children whose newest vertex is the
midpoint.

Refinement of a marked set runs a closure loop bisecting any leaf that
carries a hanging vertex on one of its edges until the mesh is conforming
again.  Per-node data-error payloads (mu, mu_tilde) are computed at node
creation through an optional callback, so that the data approximation
algorithm can operate on the forest directly.
"""

from __future__ import annotations

from collections import deque

import numpy as np

BISEC3 = "bisec3"
REFINEMENT_EDGE = "refinement_edge"


class MeshError(RuntimeError):
    pass


def _edge_key(a: int, b: int):
    return (a, b) if a < b else (b, a)


class Triangulation:
    """Forest of triangle nodes over a vertex table; leaves = current mesh."""

    def __init__(self, vertex_coords, triangles, mu_evaluator=None):
        """Create an initial (root) triangulation.

        triangles is a list of vertex-id triples ordered (z0, z1, z2) with
        refinement edge conv{z1, z2}; orientation is fixed to CCW here.
        mu_evaluator maps a (3, 2) coordinate array to the data error
        ||(1 - Pi) f||_{L2(T)} of the triangle; it is evaluated for every
        node at creation time.
        """
        self._coords = [tuple(map(float, p)) for p in vertex_coords]
        self.mu_evaluator = mu_evaluator

        self.node_verts: list = []
        self.node_parent: list = []
        self.node_children: list = []
        self.node_gen: list = []
        self.node_mu: list = []
        self.node_mutilde: list = []

        self._leaf_set: set = set()
        # every edge that has ever been bisected -> midpoint vertex id
        self.split_edges: dict = {}
        # current leaf adjacency per (unsplit-on-this-side) edge
        self._edge_adj: dict = {}
        self._cache = {}

        self.roots = []
        for tri in triangles:
            z0, z1, z2 = (int(v) for v in tri)
            if self._signed_area2(z0, z1, z2) < 0.0:
                z1, z2 = z2, z1
            nid = self._new_node((z0, z1, z2), parent=-1, gen=0)
            self.roots.append(nid)
        for nid in self.roots:
            self.node_mutilde[nid] = self.node_mu[nid]

    # -- basic tables --------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self._coords)

    def vertex_coords(self) -> np.ndarray:
        if "coords" not in self._cache:
            self._cache["coords"] = np.asarray(self._coords, dtype=float)
        return self._cache["coords"]

    def leaves(self) -> list:
        """Leaf node ids in ascending order (deterministic enumeration)."""
        if "leaves" not in self._cache:
            self._cache["leaves"] = sorted(self._leaf_set)
        return self._cache["leaves"]

    def leaf_vertices(self) -> np.ndarray:
        """(n, 3) vertex ids of the leaves, newest vertex first."""
        if "leaf_verts" not in self._cache:
            self._cache["leaf_verts"] = np.asarray(
                [self.node_verts[t] for t in self.leaves()], dtype=np.int64)
        return self._cache["leaf_verts"]

    def leaf_coords(self) -> np.ndarray:
        """(n, 3, 2) coordinates of the leaf triangles."""
        if "leaf_coords" not in self._cache:
            self._cache["leaf_coords"] = self.vertex_coords()[
                self.leaf_vertices()]
        return self._cache["leaf_coords"]

    def leaf_areas(self) -> np.ndarray:
        c = self.leaf_coords()
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def _signed_area2(self, a: int, b: int, c: int) -> float:
        pa, pb, pc = self._coords[a], self._coords[b], self._coords[c]
        return ((pb[0] - pa[0]) * (pc[1] - pa[1])
                - (pb[1] - pa[1]) * (pc[0] - pa[0]))

    # -- node management ------------------------------------------------

    def _new_node(self, verts, parent: int, gen: int) -> int:
        nid = len(self.node_verts)
        self.node_verts.append(verts)
        self.node_parent.append(parent)
        self.node_children.append(None)
        self.node_gen.append(gen)
        if self.mu_evaluator is not None:
            tri = np.asarray([self._coords[v] for v in verts], dtype=float)
            self.node_mu.append(float(self.mu_evaluator(tri)))
        else:
            self.node_mu.append(0.0)
        self.node_mutilde.append(0.0)
        self._leaf_set.add(nid)
        z0, z1, z2 = verts
        for key in (_edge_key(z0, z1), _edge_key(z0, z2), _edge_key(z1, z2)):
            self._edge_adj.setdefault(key, []).append(nid)
        return nid

    def _drop_leaf(self, nid: int) -> None:
        self._leaf_set.discard(nid)
        z0, z1, z2 = self.node_verts[nid]
        for key in (_edge_key(z0, z1), _edge_key(z0, z2), _edge_key(z1, z2)):
            adj = self._edge_adj[key]
            adj.remove(nid)
            if not adj:
                del self._edge_adj[key]

    def is_leaf(self, nid: int) -> bool:
        return self.node_children[nid] is None

    def bisect(self, nid: int):
        """Bisect the refinement edge of a leaf; returns the two child ids."""
        if not self.is_leaf(nid):
            raise MeshError(f"node {nid} is not a leaf")
        self._cache.clear()
        z0, z1, z2 = self.node_verts[nid]
        key = _edge_key(z1, z2)
        mid = self.split_edges.get(key)
        if mid is None:
            pa, pb = self._coords[z1], self._coords[z2]
            mid = len(self._coords)
            self._coords.append(((pa[0] + pb[0]) / 2.0,
                                 (pa[1] + pb[1]) / 2.0))
            self.split_edges[key] = mid
        self._drop_leaf(nid)
        gen = self.node_gen[nid] + 1
        children = []
        for zk in (z1, z2):
            a, b = (z0, zk)
            if self._signed_area2(mid, a, b) < 0.0:
                a, b = b, a
            children.append(self._new_node((mid, a, b), parent=nid, gen=gen))
        c1, c2 = children
        self.node_children[nid] = (c1, c2)
        mu1, mu2 = self.node_mu[c1], self.node_mu[c2]
        mu_p, mt_p = self.node_mu[nid], self.node_mutilde[nid]
        denom = mu_p + mt_p
        mt = (mu1 + mu2) * mt_p / denom if denom > 0.0 else 0.0
        self.node_mutilde[c1] = mt
        self.node_mutilde[c2] = mt
        return c1, c2

    def _has_hanging_edge(self, nid: int) -> bool:
        z0, z1, z2 = self.node_verts[nid]
        se = self.split_edges
        return (_edge_key(z0, z1) in se or _edge_key(z0, z2) in se
                or _edge_key(z1, z2) in se)

    def _bisect_and_queue(self, nid: int, work: deque):
        z0, z1, z2 = self.node_verts[nid]
        key = _edge_key(z1, z2)
        c1, c2 = self.bisect(nid)
        # the neighbour across the freshly split refinement edge now hangs
        for other in self._edge_adj.get(key, ()):
            work.append(other)
        work.append(c1)
        work.append(c2)
        return c1, c2

    def refine(self, marked, mode: str = REFINEMENT_EDGE) -> None:
        """Refine all marked leaves and restore conformity by closure."""
        marked = sorted(marked)
        for t in marked:
            if not self.is_leaf(t):
                raise MeshError(f"marked triangle {t} is not a leaf")
        work: deque = deque()
        for t in marked:
            c1, c2 = self._bisect_and_queue(t, work)
            if mode == BISEC3:
                self._bisect_and_queue(c1, work)
                self._bisect_and_queue(c2, work)
            elif mode != REFINEMENT_EDGE:
                raise ValueError(f"unknown refinement mode {mode!r}")
        self._closure(work)

    def _closure(self, work: deque) -> None:
        while work:
            nid = work.popleft()
            if not self.is_leaf(nid):
                continue
            if self._has_hanging_edge(nid):
                self._bisect_and_queue(nid, work)

    def completion(self) -> None:
        """Remove all hanging vertices (closure over the whole mesh)."""
        work = deque(t for t in self.leaves() if self._has_hanging_edge(t))
        self._closure(work)

    def is_conforming(self) -> bool:
        return not any(key in self.split_edges for key in self._edge_adj)

    # -- connectivity ----------------------------------------------------

    def edge_table(self):
        """Deterministic edge enumeration of the (conforming) leaf mesh.

        Returns a dict of numpy arrays:
          verts (m, 2)      sorted vertex id pair per edge
          leaves (m, 2)     adjacent leaf positions (index into leaves());
                            column 0 is T+ (smaller leaf id), column 1 is
                            T- or -1 on the boundary
          boundary (m,)     bool mask
          length (m,)       edge lengths
          normal (m, 2)     unit normal nu_E, outward with respect to T+
          tangent (m, 2)    unit tangent (nu rotated by +90 degrees)
          leaf_edges (n, 3) edge index opposite local vertex i of each leaf
          leaf_sign (n, 3)  +1 where nu_E is outward for that leaf, else -1
        """
        if "edges" in self._cache:
            return self._cache["edges"]
        tv = self.leaf_vertices()
        n = tv.shape[0]
        # edge opposite local vertex i
        pairs = np.stack([tv[:, [1, 2]], tv[:, [0, 2]], tv[:, [0, 1]]],
                         axis=1).reshape(-1, 2)
        pairs.sort(axis=1)
        enc = pairs[:, 0].astype(np.int64) * self.n_vertices + pairs[:, 1]
        uniq, inverse, counts = np.unique(enc, return_inverse=True,
                                          return_counts=True)
        m = uniq.shape[0]
        leaf_edges = inverse.reshape(n, 3)

        owners = np.repeat(np.arange(n), 3)
        order = np.lexsort((owners, inverse))
        sorted_edges = inverse[order]
        sorted_owners = owners[order]
        first = np.searchsorted(sorted_edges, np.arange(m), side="left")
        t_plus = sorted_owners[first]
        t_minus = np.full(m, -1, dtype=np.int64)
        two = counts == 2
        t_minus[two] = sorted_owners[first[two] + 1]
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two leaves")

        everts = np.column_stack((uniq // self.n_vertices,
                                  uniq % self.n_vertices))
        coords = self.vertex_coords()
        pa = coords[everts[:, 0]]
        pb = coords[everts[:, 1]]
        tvec = pb - pa
        length = np.hypot(tvec[:, 0], tvec[:, 1])
        normal = np.column_stack((tvec[:, 1], -tvec[:, 0])) / length[:, None]
        # orient outward from T+: away from the opposite vertex of T+
        local = np.argmax(leaf_edges[t_plus] == np.arange(m)[:, None], axis=1)
        opp = coords[tv[t_plus, local]]
        midp = 0.5 * (pa + pb)
        flip = np.sum(normal * (midp - opp), axis=1) < 0.0
        normal[flip] = -normal[flip]
        tangent = np.column_stack((-normal[:, 1], normal[:, 0]))

        leaf_sign = np.where(t_plus[leaf_edges] == np.arange(n)[:, None],
                             1.0, -1.0)
        table = {
            "verts": everts,
            "leaves": np.column_stack((t_plus, t_minus)),
            "boundary": counts == 1,
            "length": length,
            "normal": normal,
            "tangent": tangent,
            "leaf_edges": leaf_edges,
            "leaf_sign": leaf_sign,
        }
        self._cache["edges"] = table
        return table

    def boundary_vertex_mask(self) -> np.ndarray:
        table = self.edge_table()
        mask = np.zeros(self.n_vertices, dtype=bool)
        bverts = table["verts"][table["boundary"]]
        mask[bverts.ravel()] = True
        return mask

    def interior_vertex_ids(self) -> np.ndarray:
        return np.nonzero(~self.boundary_vertex_mask())[0]

    def ndof(self) -> int:
        """Edges (RT0 dofs) plus interior vertices (P1 dofs)."""
        table = self.edge_table()
        return int(table["verts"].shape[0] + self.interior_vertex_ids().size)

    def min_angle(self) -> float:
        """Minimum interior angle over all leaves, in degrees."""
        c = self.leaf_coords()
        angles = []
        for i in range(3):
            u = c[:, (i + 1) % 3] - c[:, i]
            v = c[:, (i + 2) % 3] - c[:, i]
            cosang = np.sum(u * v, axis=1) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return float(np.min(angles))

    # -- data-error payloads ----------------------------------------------

    def leaf_mu(self) -> np.ndarray:
        return np.asarray([self.node_mu[t] for t in self.leaves()])

    def leaf_mutilde(self) -> np.ndarray:
        return np.asarray([self.node_mutilde[t] for t in self.leaves()])

    def recompute_mu(self) -> None:
        """Fill mu/mu_tilde for all nodes from the current evaluator.

        Needed when the evaluator is attached after construction; roots get
        mu_tilde = mu and the recursion is replayed down the forest.
        """
        if self.mu_evaluator is None:
            raise MeshError("no mu evaluator attached")
        coords = self.vertex_coords()
        for nid in range(len(self.node_verts)):
            tri = coords[list(self.node_verts[nid])]
            self.node_mu[nid] = float(self.mu_evaluator(tri))
        for nid in range(len(self.node_verts)):
            parent = self.node_parent[nid]
            if parent < 0:
                self.node_mutilde[nid] = self.node_mu[nid]
        for nid in range(len(self.node_verts)):
            ch = self.node_children[nid]
            if ch is None:
                continue
            c1, c2 = ch
            denom = self.node_mu[nid] + self.node_mutilde[nid]
            mt = ((self.node_mu[c1] + self.node_mu[c2])
                  * self.node_mutilde[nid] / denom if denom > 0.0 else 0.0)
            self.node_mutilde[c1] = mt
            self.node_mutilde[c2] = mt

    # -- serialization ----------------------------------------------------

    def dump(self) -> str:
        """Plain-text mesh dump: vertex lines then leaf triangle lines."""
        lines = []
        for x, y in self._coords:
            lines.append(f"v {x:.17g} {y:.17g}")
        for t in self.leaves():
            i, j, k = self.node_verts[t]
            lines.append(f"t {i} {j} {k}")
        return "\n".join(lines) + "\n"


def initial_mesh(domain: str, mu_evaluator=None) -> Triangulation:
    """Initial conforming mesh with a compatible refinement-edge assignment.

    Both meshes consist of right-isosceles triangles whose refinement edge
    is the hypotenuse (the longest edge), which makes the assignment
    compatible across neighbours.
    """
    if domain == "l_shape":
        pts = [(-1.0, -1.0), (0.0, -1.0), (1.0, -1.0),
               (-1.0, 0.0), (0.0, 0.0), (1.0, 0.0),
               (-1.0, 1.0), (0.0, 1.0)]
        # squares split by the diagonal pointing at the reentrant corner
        tris = [
            # [-1,0] x [-1,0], diagonal (0,0)-(-1,-1)
            (1, 0, 4), (3, 0, 4),
            # [0,1] x [-1,0], diagonal (0,0)-(1,-1)
            (1, 2, 4), (5, 2, 4),
            # [-1,0] x [0,1], diagonal (0,0)-(-1,1)
            (3, 6, 4), (7, 6, 4),
        ]
    elif domain == "unit_square":
        pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]
        tris = [(4, 0, 1), (4, 1, 2), (4, 2, 3), (4, 3, 0)]
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return Triangulation(pts, tris, mu_evaluator=mu_evaluator)
