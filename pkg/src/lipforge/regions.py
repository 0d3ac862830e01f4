"""Regions (box unions, ball unions, IFS iterates, boolean trees) and the
cone-constrained curve-mass estimator.

The estimator bounds, from below over monotone lattice curves, the maximal
length a cone-constrained Lipschitz curve can spend inside an open set G.
It is a longest-path dynamic program over lattice nodes ordered by the
value of the driving functional; the reported gap is h * (boundary
crossings of the witness) * c with c = k * sqrt(d) * max(1, ||P||), where
k is the step range (the longest admissible step has length <= k*sqrt(d)*h).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError
from .serialize import dec_float, dec_mat, dec_vec, enc_float, enc_mat, enc_vec
from .spaces import Functional, NormedSpace


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


class Region:
    """Base class: exact membership, boundary-distance lower bound, bbox."""

    kind = "region"

    def contains(self, X):
        raise NotImplementedError

    def dist_to_boundary(self, X):
        """Lower bound on sup-norm distance to the region boundary."""
        raise NotImplementedError

    def bbox(self):
        """((lo, hi)) enclosing box or None if unbounded."""
        raise NotImplementedError

    def to_doc(self):
        raise NotImplementedError

    @staticmethod
    def from_doc(doc):
        kind = doc["kind"]
        if kind == "box-union":
            r = BoxUnion(dec_mat(doc["lo"]), dec_mat(doc["hi"]), open_=doc["open"])
            r.meta = doc.get("meta", {})
            return r
        if kind == "ball-union":
            return BallUnion(
                dec_mat(doc["centers"]),
                dec_float(doc["radius"]),
                NormedSpace.from_doc({"space": doc["space"]}),
                open_=doc["open"],
            )
        if kind == "complement":
            return Complement(Region.from_doc(doc["child"]))
        if kind == "intersection":
            return Intersection([Region.from_doc(c) for c in doc["children"]])
        if kind == "union":
            return UnionRegion([Region.from_doc(c) for c in doc["children"]])
        if kind == "empty":
            return EmptyRegion(int(doc["dim"]))
        raise InputError("unknown region kind %r" % kind)


class EmptyRegion(Region):
    kind = "empty"

    def __init__(self, dim):
        self.dim = dim

    def contains(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.zeros(len(X), dtype=bool)

    def dist_to_boundary(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(len(X), np.inf)

    def bbox(self):
        lo = np.zeros(self.dim)
        return lo, lo

    def to_doc(self):
        return {"kind": "empty", "dim": self.dim}


class BoxUnion(Region):
    """Finite union of axis boxes, all open or all closed."""

    kind = "box-union"

    def __init__(self, lo, hi, open_=False, meta=None):
        self.lo = np.atleast_2d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_2d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape:
            raise InputError("box bounds shape mismatch")
        if np.any(self.hi < self.lo):
            raise InputError("box with hi < lo")
        self.open = bool(open_)
        self.dim = self.lo.shape[1]
        self.meta = dict(meta or {})

    @property
    def n_boxes(self):
        return len(self.lo)

    def contains(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.open:
            inside = (X[:, None, :] > self.lo[None]) & (X[:, None, :] < self.hi[None])
        else:
            inside = (X[:, None, :] >= self.lo[None]) & (X[:, None, :] <= self.hi[None])
        return inside.all(axis=2).any(axis=1)

    def dist_to_boundary(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        margin_in = np.minimum(X[:, None, :] - self.lo[None], self.hi[None] - X[:, None, :])
        per_box_in = margin_in.min(axis=2)  # >0 strictly inside box
        inside = per_box_in > 0 if self.open else per_box_in >= 0
        best_in = np.where(inside, per_box_in, -np.inf).max(axis=1)
        gap = np.maximum(np.maximum(self.lo[None] - X[:, None, :], X[:, None, :] - self.hi[None]), 0.0)
        per_box_out = gap.max(axis=2)
        best_out = per_box_out.min(axis=1)
        return np.where(best_in > -np.inf, best_in, best_out)

    def bbox(self):
        return self.lo.min(axis=0), self.hi.max(axis=0)

    def area(self):
        return float(np.sum(np.prod(self.hi - self.lo, axis=1)))

    def inflate(self, margin, open_=True):
        return BoxUnion(self.lo - margin, self.hi + margin, open_=open_, meta=self.meta)

    def segment_inside_length(self, P0, step):
        """Vectorized length of [p, p+step] inside the union, per row of P0.

        Exact for pairwise-disjoint boxes; overlapping boxes are summed and
        clamped at the full segment length.
        """
        P0 = np.atleast_2d(np.asarray(P0, dtype=float))
        step = np.asarray(step, dtype=float)
        slen = float(np.linalg.norm(step))
        if slen == 0.0:
            return np.zeros(len(P0))
        t0 = np.zeros((len(P0), self.n_boxes))
        t1 = np.ones((len(P0), self.n_boxes))
        for ax in range(self.dim):
            s = step[ax]
            lo = self.lo[None, :, ax] - P0[:, None, ax]
            hi = self.hi[None, :, ax] - P0[:, None, ax]
            if s > 0:
                t0 = np.maximum(t0, lo / s)
                t1 = np.minimum(t1, hi / s)
            elif s < 0:
                t0 = np.maximum(t0, hi / s)
                t1 = np.minimum(t1, lo / s)
            else:
                ok = (P0[:, None, ax] >= self.lo[None, :, ax]) & (
                    P0[:, None, ax] <= self.hi[None, :, ax]
                )
                t1 = np.where(ok, t1, -1.0)
        frac = np.clip(t1 - t0, 0.0, 1.0).sum(axis=1)
        return np.minimum(frac, 1.0) * slen

    def to_doc(self):
        return {
            "kind": "box-union",
            "lo": enc_mat(self.lo),
            "hi": enc_mat(self.hi),
            "open": self.open,
            "meta": self.meta,
        }


class BallUnion(Region):
    kind = "ball-union"

    def __init__(self, centers, radius, space, open_=True):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.radius = float(radius)
        self.space = space
        self.open = bool(open_)
        self.dim = self.centers.shape[1]

    def _dists(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([self.space.norm(X - c) for c in self.centers], axis=1)

    def contains(self, X):
        D = self._dists(X)
        return (D < self.radius).any(axis=1) if self.open else (D <= self.radius).any(axis=1)

    def dist_to_boundary(self, X):
        D = self._dists(X)
        inside = D < self.radius
        best_in = np.where(inside, self.radius - D, -np.inf).max(axis=1)
        best_out = (D - self.radius).min(axis=1)
        return np.where(best_in > -np.inf, best_in, np.maximum(best_out, 0.0))

    def bbox(self):
        # sup-norm box valid for lp norms (||v||_p >= ||v||_inf) and polyhedral
        # balls contained in the cube of their max vertex coordinate
        r = self.radius
        if self.space.kind == "polyhedral":
            r = r * float(np.max(np.abs(self.space.unit_ball_vertices())))
        return self.centers.min(axis=0) - r, self.centers.max(axis=0) + r

    def to_doc(self):
        return {
            "kind": "ball-union",
            "centers": enc_mat(self.centers),
            "radius": enc_float(self.radius),
            "space": self.space.to_doc()["space"],
            "open": self.open,
        }


class Complement(Region):
    kind = "complement"

    def __init__(self, child):
        self.child = child
        self.dim = child.dim

    def contains(self, X):
        return ~self.child.contains(X)

    def dist_to_boundary(self, X):
        return self.child.dist_to_boundary(X)

    def bbox(self):
        return None

    def to_doc(self):
        return {"kind": "complement", "child": self.child.to_doc()}


class Intersection(Region):
    kind = "intersection"

    def __init__(self, children):
        if not children:
            raise InputError("intersection needs children")
        self.children = list(children)
        self.dim = children[0].dim

    def contains(self, X):
        out = self.children[0].contains(X)
        for c in self.children[1:]:
            out = out & c.contains(X)
        return out

    def dist_to_boundary(self, X):
        return np.min([c.dist_to_boundary(X) for c in self.children], axis=0)

    def bbox(self):
        boxes = [c.bbox() for c in self.children if c.bbox() is not None]
        if not boxes:
            return None
        lo = np.max([b[0] for b in boxes], axis=0)
        hi = np.min([b[1] for b in boxes], axis=0)
        return lo, np.maximum(hi, lo)

    def to_doc(self):
        return {"kind": "intersection", "children": [c.to_doc() for c in self.children]}


class UnionRegion(Region):
    kind = "union"

    def __init__(self, children):
        if not children:
            raise InputError("union needs children")
        self.children = list(children)
        self.dim = children[0].dim

    def contains(self, X):
        out = self.children[0].contains(X)
        for c in self.children[1:]:
            out = out | c.contains(X)
        return out

    def dist_to_boundary(self, X):
        return np.min([c.dist_to_boundary(X) for c in self.children], axis=0)

    def bbox(self):
        boxes = [c.bbox() for c in self.children]
        if any(b is None for b in boxes):
            return None
        return (
            np.min([b[0] for b in boxes], axis=0),
            np.max([b[1] for b in boxes], axis=0),
        )

    def to_doc(self):
        return {"kind": "union", "children": [c.to_doc() for c in self.children]}


def box_region(lo, hi, open_=False):
    return BoxUnion([lo], [hi], open_=open_)


def gen_four_corner(level, ratio=0.25):
    """IFS iterate of the four corner contractions; level 0 is the unit square."""
    if level < 0:
        raise InputError("level must be >= 0")
    if not (0.0 < ratio <= 0.5):
        raise InputError("ratio must lie in (0, 1/2]")
    lo = np.array([[0.0, 0.0]])
    side = 1.0
    for _ in range(int(level)):
        new = []
        for base in lo:
            for dx, dy in ((0, 0), (1, 0), (0, 1), (1, 1)):
                new.append(base + np.array([dx, dy]) * (side - ratio * side))
        lo = np.array(new)
        side *= ratio
    hi = lo + side
    return BoxUnion(lo, hi, open_=False,
                    meta={"ifs": "four-corner", "level": int(level), "ratio": float(ratio)})


def four_corner_squares(level, ratio=0.25):
    """(lo, side) of the level-m squares of the standard four-corner IFS."""
    reg = gen_four_corner(level, ratio)
    return reg.lo, float(reg.hi[0, 0] - reg.lo[0, 0])


# ---------------------------------------------------------------------------
# cone-constrained lattice curves
# ---------------------------------------------------------------------------


@dataclass
class CurveSpec:
    """Admissible lattice steps for curves with P(gamma') >= alpha ||gamma'|| ||P||."""

    P: Functional
    alpha: float
    h: float
    k: int = 3

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InputError("alpha must lie in (0, 1)")
        if self.h <= 0:
            raise InputError("grid step must be positive")
        self.step_set = self._admissible_steps()
        if len(self.step_set) == 0:
            raise InputError("no admissible lattice steps; increase k or lower alpha")

    def _admissible_steps(self):
        d = self.P.space.dim
        if d != 2:
            raise InputError("lattice curve estimator supports d = 2")
        k = int(self.k)
        dirs = []
        pn = self.P.dual_norm
        for i in range(-k, k + 1):
            for j in range(-k, k + 1):
                if i == 0 and j == 0:
                    continue
                u = np.array([float(i), float(j)])
                if self.P(u) >= self.alpha * float(self.P.space.norm(u)) * pn and self.P(u) > 0:
                    dirs.append((i, j))
        return dirs


class LatticeDP:
    """Longest in-G path over the lattice DAG ordered by the P-value."""

    def __init__(self, G, spec: CurveSpec, bbox=None, pad=1):
        self.G = G
        self.spec = spec
        bb = bbox if bbox is not None else G.bbox()
        if bb is None:
            raise DomainError("region must be bounded for the curve estimator")
        lo, hi = np.asarray(bb[0], dtype=float), np.asarray(bb[1], dtype=float)
        h = spec.h
        self.h = h
        self.lo = lo - pad * h
        n = np.maximum(np.ceil((hi - lo) / h).astype(int) + 1 + 2 * pad, 2)
        self.shape = (int(n[0]), int(n[1]))
        ii, jj = np.meshgrid(np.arange(self.shape[0]), np.arange(self.shape[1]), indexing="ij")
        self.nodes = self.lo[None, :] + np.stack([ii.ravel(), jj.ravel()], axis=1) * h
        self.n = len(self.nodes)
        self._run()

    def _edge_lengths(self, step_ij):
        step = np.array(step_ij, dtype=float) * self.h
        if hasattr(self.G, "segment_inside_length"):
            # chunk to cap the (nodes x boxes) clipping workspace
            out = np.empty(self.n)
            chunk = max(1, 2_000_000 // max(1, getattr(self.G, "n_boxes", 1)))
            for s in range(0, self.n, chunk):
                out[s:s + chunk] = self.G.segment_inside_length(
                    self.nodes[s:s + chunk], step)
            return out
        # sub-sampling fallback: 16 midpoints per edge
        ts = (np.arange(16) + 0.5) / 16.0
        slen = float(np.linalg.norm(step))
        total = np.zeros(self.n)
        for t in ts:
            total += self.G.contains(self.nodes + t * step)
        return total / 16.0 * slen

    def _run(self):
        spec = self.spec
        nx, ny = self.shape
        pv = self.nodes @ spec.P.coeffs
        incs = [spec.P(np.array(s, dtype=float)) * self.h for s in spec.step_set]
        qtol = min(incs) / 4.0
        order = np.argsort(pv, kind="stable")
        best = np.zeros(self.n)
        parent = np.full(self.n, -1, dtype=np.int64)
        elens = [self._edge_lengths(s) for s in spec.step_set]
        offsets = [si * ny + sj for si, sj in spec.step_set]

        # group nodes whose P-values agree within qtol (no intra-group edges)
        sorted_pv = pv[order]
        breaks = np.nonzero(np.diff(sorted_pv) > qtol)[0] + 1
        groups = np.split(order, breaks)

        ii = np.arange(self.n) // ny
        jj = np.arange(self.n) % ny
        for grp in groups:
            for sidx, (si, sj) in enumerate(spec.step_set):
                src_i = ii[grp] - si
                src_j = jj[grp] - sj
                ok = (src_i >= 0) & (src_i < nx) & (src_j >= 0) & (src_j < ny)
                if not ok.any():
                    continue
                tgt = grp[ok]
                src = src_i[ok] * ny + src_j[ok]
                cand = best[src] + elens[sidx][src]
                upd = cand > best[tgt]
                if upd.any():
                    best[tgt[upd]] = cand[upd]
                    parent[tgt[upd]] = src[upd] * len(spec.step_set) + sidx
        self.best = best
        self.parent = parent
        self.pv = pv

    def witness(self, end_idx=None):
        if end_idx is None:
            end_idx = int(np.argmax(self.best))
        path = [end_idx]
        seen = set()
        cur = end_idx
        while self.parent[cur] >= 0 and cur not in seen:
            seen.add(cur)
            cur = int(self.parent[cur]) // len(self.spec.step_set)
            path.append(cur)
        path.reverse()
        return self.nodes[path]

    def value(self):
        return float(np.max(self.best))


def xi_estimate(G, spec: CurveSpec, bbox=None):
    """(value, gap, witness path).  Lower-bound estimate over lattice curves."""
    dp = LatticeDP(G, spec, bbox=bbox)
    value = dp.value()
    wit = dp.witness()
    crossings = 0
    for a, b in zip(wit[:-1], wit[1:]):
        step = b - a
        ln = dp.G.segment_inside_length(a[None], step)[0] if hasattr(
            dp.G, "segment_inside_length") else None
        if ln is None:
            inside_a = bool(G.contains(a[None])[0])
            inside_b = bool(G.contains(b[None])[0])
            if inside_a != inside_b:
                crossings += 1
        else:
            full = float(np.linalg.norm(step))
            if 1e-12 < ln < full - 1e-12:
                crossings += 1
    c = spec.k * np.sqrt(2.0) * max(1.0, spec.P.dual_norm)
    gap = dp.h * max(1, crossings) * c
    return value, float(gap), wit


def pu_cover(E, P: Functional, eps, budget=6, h=None, k=3, inflate_frac=0.25):
    """Open box-union cover of an IFS-type compact E with small curve mass.

    Sweeps IFS levels m = 0..budget, covering the level-m squares that meet
    E by slightly larger open boxes, until the lattice estimate of the curve
    mass is <= eps + gap.  Returns (G, achieved, gap, met_flag, m).
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    meta = getattr(E, "meta", {})
    if meta.get("ifs") != "four-corner":
        raise InputError("pu_cover needs a four-corner IFS region (or a box subset of one)")
    ratio = meta["ratio"]
    nmax = meta["level"]
    best = None
    for m in range(0, min(int(budget), nmax) + 1):
        lo_m, side = four_corner_squares(m, ratio)
        # keep level-m squares that meet E
        centers = lo_m + side / 2.0
        keep = []
        for lo_sq in lo_m:
            sq_lo, sq_hi = lo_sq, lo_sq + side
            overlap = np.all((E.lo < sq_hi[None]) & (E.hi > sq_lo[None]), axis=1)
            if overlap.any():
                keep.append(lo_sq)
        keep = np.array(keep) if keep else lo_m[:0]
        margin = inflate_frac * side
        G = BoxUnion(keep - margin, keep + side + margin, open_=True,
                     meta={"cover-of-level": m})
        alpha = min(max(eps, 1e-6), 0.99)
        hh = h if h is not None else max(side / 6.0, 1.0 / 96.0)
        spec = CurveSpec(P, alpha, hh, k=k)
        value, gap, _ = xi_estimate(G, spec)
        if best is None or value < best[1]:
            best = (G, value, gap, m)
        if value <= eps + gap:
            return G, value, gap, True, m
    G, value, gap, m = best
    return G, value, gap, False, m
