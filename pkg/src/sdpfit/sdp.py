"""Cost matrices of the quadratic program, kernel vectors and Gram checks.

Rows and columns are indexed by ``0`` followed by every (player, strategy)
pair in player order. All pair interactions are sums of per-resource
blocks, so matrices are assembled sparsely and only densified on request.

Three vector spaces host the fitted dual vectors:

* ``F``: functions ``t -> sum h 1{t <= b}`` per resource, inner product
  ``sum_e integral f g dt``; for two steps this is ``h h' min(b, b')``.
* ``G``: weights at ratio values per resource, inner product through the
  kernel ``M(r, s) = r s / (r + s)``.
* ``E``: plain coordinates with the dot product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .model import AffineInstance, Assignment, CongestionInstance, Instance, SdpfitError

DENSE_EIG_LIMIT = 1500


class KindMismatch(SdpfitError, ValueError):
    pass


class SpaceMismatch(SdpfitError, ValueError):
    pass


class NonPSDKernel(SdpfitError, ArithmeticError):
    pass


class AsymmetricInput(SdpfitError, ValueError):
    pass


class CostKind(str, Enum):
    SMITH = "smith"
    RAND = "rand"
    AFFINE = "affine"


class Space(str, Enum):
    F = "F"
    G = "G"
    E = "E"


# ---------------------------------------------------------------------------
# pair kernels


def min_kernel(r: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.minimum(r, s)


def harmonic_kernel(r: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``r s / (r + s)`` with the value 0 at ``r = s = 0``; finite inputs only."""
    tot = r + s
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(tot > 0, r * s / np.where(tot > 0, tot, 1.0), 0.0)
    return out


def weighted_pair_kernel(w: np.ndarray, d: np.ndarray, kernel) -> np.ndarray:
    """``w_a w_b K(d_a, d_b)`` where zero weights give exactly zero (even for ``d = inf``)."""
    live = w > 0
    out = np.zeros((len(w), len(w)))
    if live.any():
        wl, dl = w[live], d[live]
        out[np.ix_(live, live)] = np.outer(wl, wl) * kernel(dl[:, None], dl[None, :])
    return out


# ---------------------------------------------------------------------------
# cost matrices


def pair_legend(instance: Instance) -> list[tuple[int, int]]:
    """``(player, strategy)`` of every non-zero row, in matrix order."""
    return [(j, i) for j, n in enumerate(instance.strategy_counts) for i in range(n)]


def pair_offsets(instance: Instance) -> np.ndarray:
    """Row of ``(j, 0)`` for every player ``j`` (row 0 is the constant)."""
    return 1 + np.concatenate([[0], np.cumsum(instance.strategy_counts)[:-1]]).astype(int)


def _resource_members(instance: Instance) -> list[list[tuple[int, int]]]:
    """For every resource, the matrix rows (with their player) whose strategy contains it."""
    off = pair_offsets(instance)
    out: list[list[tuple[int, int]]] = [[] for _ in range(instance.n_resources)]
    for j, strats in enumerate(instance.strategy_resources):
        for i, s in enumerate(strats):
            for e in s:
                out[e].append((off[j] + i, j))
    return out


def _assemble(n: int, blocks: list[tuple[np.ndarray, np.ndarray]], diag: np.ndarray | None = None) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for idx, B in blocks:
        if len(idx) == 0:
            continue
        r, c = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(B.ravel())
    if rows:
        M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    else:
        M = sp.csr_matrix((n, n))
    if diag is not None:
        M = M.tolil()
        M.setdiag(diag)
        M = M.tocsr()
    M.eliminate_zeros()
    return M


@dataclass(frozen=True)
class CostMatrix:
    """``C`` with ``C(x) = <C, (1,x)(1,x)^T>`` for pure ``x``."""

    matrix: sp.csr_matrix
    legend: tuple[tuple[int, int], ...]
    kind: str

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def to_json(self, instance: Instance) -> dict:
        labels = ["0"] + [f"{instance.players[j].id}:{i}" for j, i in self.legend]
        return {"kind": self.kind, "legend": labels, "matrix": self.dense().tolist()}


def build_cost_matrix(instance: Instance, kind: CostKind | str) -> CostMatrix:
    kind = CostKind(kind)
    if (kind is CostKind.AFFINE) != isinstance(instance, AffineInstance):
        raise KindMismatch(f"cost kind {kind.value} does not fit a {type(instance).__name__}")
    legend = pair_legend(instance)
    n = 1 + len(legend)
    members = _resource_members(instance)
    diag = np.zeros(n)
    blocks = []
    if kind is CostKind.AFFINE:
        w, a, b = instance.rweights, instance.a, instance.b
        for e, mem in enumerate(members):
            if not mem:
                continue
            idx = np.array([r for r, _ in mem])
            we = np.array([w[e, j] for _, j in mem])
            blocks.append((idx, a[e] * np.outer(we, we)))
            diag[idx] += we * (a[e] * we + b[e])
    else:
        kern = min_kernel if kind is CostKind.SMITH else harmonic_kernel
        scale = 0.5 if kind is CostKind.SMITH else 1.0
        wts, p, d = instance.weights, instance.proc, instance.ratios
        for e, mem in enumerate(members):
            if not mem:
                continue
            idx = np.array([r for r, _ in mem])
            js = np.array([j for _, j in mem])
            blocks.append((idx, scale * weighted_pair_kernel(wts[js], d[e, js], kern)))
            diag[idx] += wts[js] * p[e, js]
    return CostMatrix(_assemble(n, blocks, diag), tuple(legend), kind.value)


def indicator_vector(instance: Instance, x: Assignment) -> np.ndarray:
    """``(1, x)`` flattened in matrix order."""
    x.validate(instance)
    return np.concatenate([[1.0]] + [np.asarray(row, dtype=float) for row in x.probs])


def primal_value(cmat: CostMatrix, x: Assignment, instance: Instance | None = None) -> float:
    """``<C, (1,x)(1,x)^T>``; equals the social cost for pure ``x``."""
    if instance is not None:
        v = indicator_vector(instance, x)
    else:
        v = np.concatenate([[1.0]] + [np.asarray(row, dtype=float) for row in x.probs])
    if len(v) != cmat.size:
        raise KindMismatch(f"assignment has {len(v) - 1} pairs, matrix has {cmat.size - 1}")
    return float(v @ (cmat.matrix @ v))


# ---------------------------------------------------------------------------
# kernel vectors


@dataclass(frozen=True)
class KernelVector:
    """One vector of a fitted family.

    For ``F`` and ``G`` the ``parts`` map a resource index to ``(h, point)``
    terms: a step of height ``h`` up to breakpoint ``point`` (``F``) or a
    weight ``h`` at ratio value ``point`` (``G``). ``E`` vectors carry
    ``coords`` instead.
    """

    space: Space
    parts: Mapping[int, tuple[tuple[float, float], ...]] = field(default_factory=dict)
    coords: np.ndarray | None = None

    @classmethod
    def euclidean(cls, coords) -> "KernelVector":
        return cls(Space.E, {}, np.asarray(coords, dtype=float))

    @classmethod
    def steps(cls, space: Space | str, parts: Mapping[int, Sequence[tuple[float, float]]]) -> "KernelVector":
        clean = {}
        for e, terms in parts.items():
            kept = tuple((float(h), float(b)) for h, b in terms if h != 0.0)
            for h, b in kept:
                if not np.isfinite(b):
                    raise ValueError(f"non-finite point {b} with nonzero height {h}")
            if kept:
                clean[int(e)] = kept
        return cls(Space(space), clean)


def _pair_value(space: Space, h1, b1, h2, b2) -> float:
    if space is Space.F:
        return h1 * h2 * min(b1, b2)
    return h1 * h2 * float(harmonic_kernel(np.array(b1), np.array(b2)))


def inner_product(u: KernelVector, v: KernelVector) -> float:
    if u.space is not v.space:
        raise SpaceMismatch(f"{u.space.value} vs {v.space.value}")
    if u.space is Space.E:
        if u.coords.shape != v.coords.shape:
            raise SpaceMismatch("coordinate dimensions differ")
        return float(u.coords @ v.coords)
    total = 0.0
    for e in u.parts.keys() & v.parts.keys():
        for h1, b1 in u.parts[e]:
            for h2, b2 in v.parts[e]:
                total += _pair_value(u.space, h1, b1, h2, b2)
    return total


def _space_of(family: Sequence[KernelVector]) -> Space:
    spaces = {v.space for v in family}
    if len(spaces) != 1:
        raise SpaceMismatch(f"mixed spaces {sorted(s.value for s in spaces)}")
    return spaces.pop()


def _terms_by_resource(family: Sequence[KernelVector]) -> dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    acc: dict[int, tuple[list, list, list]] = {}
    for a, v in enumerate(family):
        for e, terms in v.parts.items():
            owner, hs, bs = acc.setdefault(e, ([], [], []))
            for h, b in terms:
                owner.append(a)
                hs.append(h)
                bs.append(b)
    return {e: (np.array(o, dtype=int), np.array(h), np.array(b)) for e, (o, h, b) in acc.items()}


def embedding_matrix(family: Sequence[KernelVector], tol: float = 1e-8) -> np.ndarray:
    """Euclidean coordinates (one row per vector) with the same Gram matrix.

    ``F``: one coordinate per interval between consecutive breakpoints, the
    value at the interval midpoint times ``sqrt(length)``. ``G``: per
    resource, factor the kernel restricted to the ratio values present as
    ``U U^T`` by a symmetric eigendecomposition and map weights ``f -> f U``.
    """
    if not family:
        return np.zeros((0, 0))
    space = _space_of(family)
    n = len(family)
    if space is Space.E:
        return np.vstack([v.coords for v in family])
    blocks = []
    for e, (owner, h, b) in sorted(_terms_by_resource(family).items()):
        if space is Space.F:
            pts = np.unique(np.concatenate([[0.0], b]))
            lengths = np.diff(pts)
            keep = lengths > 0
            right = pts[1:][keep]
            # a step up to b covers interval (l, r] iff b >= r
            cover = (b[:, None] >= right[None, :]).astype(float) * h[:, None]
            block = np.zeros((n, len(right)))
            np.add.at(block, owner, cover)
            blocks.append(block * np.sqrt(lengths[keep])[None, :])
        else:
            vals, pos = np.unique(b, return_inverse=True)
            K = harmonic_kernel(vals[:, None], vals[None, :])
            lam, U = np.linalg.eigh(K)
            scale = max(np.abs(lam).max(initial=0.0), 1e-300)
            if lam.min(initial=0.0) < -tol * scale:
                raise NonPSDKernel(f"restricted kernel on resource {e} has eigenvalue {lam.min():.3e}")
            U = U * np.sqrt(np.clip(lam, 0.0, None))[None, :]
            W = np.zeros((n, len(vals)))
            np.add.at(W, (owner, pos), h)
            blocks.append(W @ U)
    if not blocks:
        return np.zeros((n, 1))
    return np.hstack(blocks)


def embed_euclidean(family: Sequence[KernelVector], tol: float = 1e-8) -> list[KernelVector]:
    V = embedding_matrix(family, tol)
    return [KernelVector.euclidean(row) for row in V]


def gram_matrix(family: Sequence[KernelVector], sparse: bool | None = None):
    """Closed-form Gram matrix, assembled per resource without embedding.

    Returns a dense array for families of at most ``DENSE_EIG_LIMIT`` vectors
    unless ``sparse`` says otherwise.
    """
    n = len(family)
    if sparse is None:
        sparse = n > DENSE_EIG_LIMIT
    space = _space_of(family) if family else Space.E
    if space is Space.E:
        V = sp.csr_matrix(np.vstack([v.coords for v in family])) if family else sp.csr_matrix((0, 0))
        G = (V @ V.T).tocsr()
    else:
        kern = min_kernel if space is Space.F else harmonic_kernel
        rows, cols, vals = [], [], []
        for owner, h, b in _terms_by_resource(family).values():
            K = np.outer(h, h) * kern(b[:, None], b[None, :])
            r, c = np.meshgrid(owner, owner, indexing="ij")
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(K.ravel())
        if rows:
            G = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
            ).tocsr()
        else:
            G = sp.csr_matrix((n, n))
    return G if sparse else G.toarray()


def gram_min_eigenvalue(gram, sym_tol: float = 1e-12) -> float:
    """Smallest eigenvalue of a symmetric matrix (dense symmetric solver)."""
    G = gram.toarray() if sp.issparse(gram) else np.asarray(gram, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise AsymmetricInput("Gram matrix must be square")
    if G.size == 0:
        return 0.0
    scale = max(1.0, np.abs(G).max())
    if np.abs(G - G.T).max() > sym_tol * scale:
        raise AsymmetricInput("matrix is not symmetric")
    return float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])


def factored_min_eigenvalue(V: np.ndarray) -> float:
    """Smallest eigenvalue of ``V V^T`` through the smaller of ``V V^T`` and ``V^T V``.

    Both share their nonzero spectrum; with more rows than columns ``V V^T``
    also has a zero eigenvalue.
    """
    n, d = V.shape
    if n == 0:
        return 0.0
    if n <= d:
        return float(np.linalg.eigvalsh(V @ V.T)[0])
    lam = np.linalg.eigvalsh(V.T @ V) if d else np.zeros(0)
    return min(float(lam[0]), 0.0) if len(lam) else 0.0


def gram_to_json(gram, labels: Sequence[str]) -> dict:
    G = gram.toarray() if sp.issparse(gram) else np.asarray(gram)
    return {"legend": list(labels), "gram": G.tolist()}
