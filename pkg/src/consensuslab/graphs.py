"""Graph families and helpers for consensus experiments.

All graphs are simple and undirected, with nodes labelled ``0 .. n-1``.
Edges are stored canonically as ``(i, j)`` with ``i < j``.  Conventions for
the named families:

* ``star``: node 0 is the center.
* ``two-star``: nodes 0 and n-1 are the two centers, joined by an edge;
  the remaining nodes are split between them as evenly as possible.
* ``starry-line``: n must be divisible by 3.  A line on n/3 nodes with a
  star on n/3 nodes glued (by its center) to each end of the line.  Node 0
  is the center of the first star and node n-1 the center of the second.
* ``grid``: the k-dimensional lattice on side^k nodes (no wraparound);
  n must be a perfect k-th power, otherwise the builder errors out rather
  than silently rounding.
* ``tree``: the complete binary tree, so n must be 2^h - 1; children of
  node i are 2i+1 and 2i+2.
* ``erdos-renyi``: G(n, p) resampled until connected (capped).
* ``random-regular``: configuration-model d-regular graph, rejecting
  pairings with self-loops or multi-edges, resampled until connected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraph, GenerationFailed, InvalidParam

__all__ = [
    "Graph",
    "build_graph",
    "builtin_families",
    "complete_graph",
    "line_graph",
    "ring_graph",
    "star_graph",
    "two_star_graph",
    "starry_line_graph",
    "grid_graph",
    "binary_tree_graph",
    "erdos_renyi_graph",
    "random_regular_graph",
    "custom_graph",
    "load_edge_list",
    "nearest_valid_size",
]

_RETRY_CAP = 1000


# =====================================================================
# container
# =====================================================================

@dataclass(frozen=True)
class Graph:
    """An undirected simple graph with canonical edge storage."""

    n: int
    edges: tuple[tuple[int, int], ...]
    family: str = "custom"

    @property
    def m(self) -> int:
        """Number of edges."""
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix."""
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a

    def neighbor_lists(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return nbrs


def _make_graph(n: int, edges, family: str) -> Graph:
    if n < 1:
        raise InvalidParam(f"graph needs n >= 1, got n={n}")
    canon = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise InvalidParam(f"self-loop at node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise InvalidParam(f"edge ({i},{j}) out of range for n={n}")
        canon.add((min(i, j), max(i, j)))
    return Graph(n=n, edges=tuple(sorted(canon)), family=family)


def is_connected(g: Graph) -> bool:
    if g.n == 1:
        return True
    nbrs = g.neighbor_lists()
    seen = np.zeros(g.n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in nbrs[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return bool(seen.all())


def is_bipartite(g: Graph) -> bool:
    """Two-color the graph by BFS; True iff no odd cycle exists."""
    color = np.full(g.n, -1, dtype=int)
    nbrs = g.neighbor_lists()
    for start in range(g.n):
        if color[start] >= 0:
            continue
        color[start] = 0
        stack = [start]
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    stack.append(v)
                elif color[v] == color[u]:
                    return False
    return True


# =====================================================================
# deterministic families
# =====================================================================

def complete_graph(n: int) -> Graph:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return _make_graph(n, edges, f"complete(n={n})")


def line_graph(n: int) -> Graph:
    return _make_graph(n, [(i, i + 1) for i in range(n - 1)], f"line(n={n})")


def ring_graph(n: int) -> Graph:
    if n < 3:
        raise InvalidParam(f"ring needs n >= 3, got n={n}")
    edges = [(i, (i + 1) % n) for i in range(n)]
    return _make_graph(n, edges, f"ring(n={n})")


def star_graph(n: int) -> Graph:
    """Star with center node 0 and n-1 leaves."""
    if n < 2:
        raise InvalidParam(f"star needs n >= 2, got n={n}")
    return _make_graph(n, [(0, j) for j in range(1, n)], f"star(n={n})")


def two_star_graph(n: int) -> Graph:
    """Two stars whose centers (nodes 0 and n-1) are joined by an edge.

    The n-2 leaves are split as evenly as possible, the first star taking
    the extra leaf when n is odd; leaves 1..a belong to center 0 and the
    rest to center n-1.
    """
    if n < 2:
        raise InvalidParam(f"two-star needs n >= 2, got n={n}")
    a = (n - 2 + 1) // 2
    edges = [(0, n - 1)]
    edges += [(0, j) for j in range(1, 1 + a)]
    edges += [(j, n - 1) for j in range(1 + a, n - 1)]
    return _make_graph(n, edges, f"two-star(n={n})")


def starry_line_graph(n: int) -> Graph:
    if n < 3 or n % 3 != 0:
        raise InvalidParam(f"starry-line needs n divisible by 3, got n={n}")
    k = n // 3
    edges = []
    # first star: center 0, leaves 1..k-1
    edges += [(0, j) for j in range(1, k)]
    # line on nodes k..2k-1
    edges += [(i, i + 1) for i in range(k, 2 * k - 1)]
    # second star: center n-1, leaves 2k..n-2
    edges += [(n - 1, j) for j in range(2 * k, n - 1)]
    # glue star centers to the line's endpoints
    edges.append((0, k))
    edges.append((n - 1, 2 * k - 1))
    return _make_graph(n, edges, f"starry-line(n={n})")


def grid_graph(n: int, dim: int = 2) -> Graph:
    """k-dimensional lattice; n must be a perfect ``dim``-th power."""
    if dim < 1:
        raise InvalidParam(f"grid dimension must be >= 1, got {dim}")
    side = round(n ** (1.0 / dim))
    if side ** dim != n:
        raise InvalidParam(
            f"grid needs n to be a perfect {dim}-th power, got n={n}"
        )
    edges = []
    strides = [side ** k for k in range(dim)]
    for u in range(n):
        coords = [(u // strides[k]) % side for k in range(dim)]
        for k in range(dim):
            if coords[k] + 1 < side:
                edges.append((u, u + strides[k]))
    return _make_graph(n, edges, f"grid{dim}(n={n})")


def binary_tree_graph(n: int) -> Graph:
    """Complete binary tree on n = 2^h - 1 nodes, children at 2i+1, 2i+2."""
    if n < 1 or (n + 1) & n != 0:
        raise InvalidParam(f"complete binary tree needs n = 2^h - 1, got n={n}")
    edges = []
    for i in range(n):
        for c in (2 * i + 1, 2 * i + 2):
            if c < n:
                edges.append((i, c))
    return _make_graph(n, edges, f"tree(n={n})")


# =====================================================================
# random families
# =====================================================================

def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def erdos_renyi_graph(n: int, p: float, seed=None) -> Graph:
    """G(n, p), resampled until connected (at most 1000 attempts)."""
    if not (0.0 <= p <= 1.0):
        raise InvalidParam(f"edge probability must be in [0,1], got {p}")
    rng = _rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(_RETRY_CAP):
        mask = rng.random(iu.size) < p
        edges = list(zip(iu[mask].tolist(), ju[mask].tolist()))
        g = _make_graph(n, edges, f"erdos-renyi(n={n},p={p},seed={seed})")
        if is_connected(g):
            return g
    raise GenerationFailed(
        f"no connected G({n},{p}) sample in {_RETRY_CAP} attempts"
    )


def random_regular_graph(n: int, d: int, seed=None) -> Graph:
    """Random d-regular graph via the configuration model.

    Pairings with self-loops or duplicate edges are rejected, and the
    accepted simple graph is additionally required to be connected; both
    kinds of rejection share the 1000-attempt budget.
    """
    if n < 2 or d < 1:
        raise InvalidParam(f"random-regular needs n >= 2 and d >= 1, got n={n}, d={d}")
    if d >= n:
        raise InvalidParam(f"degree d={d} must be < n={n}")
    if (n * d) % 2 != 0:
        raise InvalidParam(f"n*d must be even, got n={n}, d={d}")
    if d == 1 and n > 2:
        raise InvalidParam("d=1 gives a perfect matching, which is disconnected for n > 2")
    rng = _rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(_RETRY_CAP):
        perm = rng.permutation(stubs)
        a, b = perm[0::2], perm[1::2]
        if np.any(a == b):
            continue
        pairs = {(min(x, y), max(x, y)) for x, y in zip(a.tolist(), b.tolist())}
        if len(pairs) != n * d // 2:
            continue  # multi-edge collapsed
        g = _make_graph(n, pairs, f"random-regular(n={n},d={d},seed={seed})")
        if is_connected(g):
            return g
    raise GenerationFailed(
        f"no connected simple {d}-regular graph on {n} nodes in {_RETRY_CAP} attempts"
    )


def custom_graph(n: int, edges, family: str = "custom") -> Graph:
    """Wrap an explicit edge list (connectivity is *not* enforced here)."""
    return _make_graph(n, edges, family)


def load_edge_list(path) -> Graph:
    """Read a graph from a text file: first line n, then one ``i j`` per line.

    Node labels are 0-based; blank lines and ``#`` comments are skipped.
    """
    edges = []
    n = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if n is None:
                if len(parts) != 1:
                    raise InvalidParam(f"{path}:{lineno}: expected node count, got {raw!r}")
                n = int(parts[0])
                continue
            if len(parts) != 2:
                raise InvalidParam(f"{path}:{lineno}: expected 'i j', got {raw!r}")
            edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        raise InvalidParam(f"{path}: empty edge-list file")
    return custom_graph(n, edges, family=f"custom({path})")


# =====================================================================
# dispatch
# =====================================================================

_FAMILY_ALIASES = {
    "complete": "complete",
    "line": "line",
    "path": "line",
    "ring": "ring",
    "cycle": "ring",
    "star": "star",
    "two-star": "two-star",
    "twostar": "two-star",
    "starry-line": "starry-line",
    "starryline": "starry-line",
    "grid": "grid",
    "tree": "tree",
    "binary-tree": "tree",
    "erdos-renyi": "erdos-renyi",
    "er": "erdos-renyi",
    "random-regular": "random-regular",
    "regular": "random-regular",
    "custom": "custom",
}


def builtin_families() -> tuple[str, ...]:
    """Canonical names of the built-in families (custom excluded)."""
    return (
        "complete", "line", "ring", "star", "two-star",
        "starry-line", "grid", "tree", "erdos-renyi", "random-regular",
    )


def build_graph(
    family: str,
    n: int,
    *,
    seed=None,
    p: float | None = None,
    degree: int | None = None,
    dim: int = 2,
    edges=None,
) -> Graph:
    """Build a graph by family name; see the module docstring for conventions.

    Parameters
    ----------
    family : str
        One of the built-in family names (a few aliases are accepted) or
        ``custom``, which requires ``edges``.
    n : int
        Node count.  Families with structural constraints (ring, starry-line,
        grid, tree) raise InvalidParam for unusable n instead of rounding.
    seed
        Only used by the random families.
    p, degree, dim, edges
        Family-specific parameters.
    """
    key = _FAMILY_ALIASES.get(str(family).lower())
    if key is None:
        raise InvalidParam(f"unknown graph family {family!r}")
    if key == "complete":
        return complete_graph(n)
    if key == "line":
        return line_graph(n)
    if key == "ring":
        return ring_graph(n)
    if key == "star":
        return star_graph(n)
    if key == "two-star":
        return two_star_graph(n)
    if key == "starry-line":
        return starry_line_graph(n)
    if key == "grid":
        return grid_graph(n, dim=dim)
    if key == "tree":
        return binary_tree_graph(n)
    if key == "erdos-renyi":
        if p is None:
            raise InvalidParam("erdos-renyi needs p")
        return erdos_renyi_graph(n, p, seed=seed)
    if key == "random-regular":
        if degree is None:
            raise InvalidParam("random-regular needs degree")
        return random_regular_graph(n, degree, seed=seed)
    if edges is None:
        raise InvalidParam("custom graph needs an edge list")
    return custom_graph(n, edges)


def nearest_valid_size(family: str, n: int, *, dim: int = 2) -> int:
    """Snap a target size to the family's nearest structurally valid n.

    Useful for sweeps; the builders themselves never round.
    """
    key = _FAMILY_ALIASES.get(str(family).lower())
    if key is None:
        raise InvalidParam(f"unknown graph family {family!r}")
    if key == "starry-line":
        return max(3, 3 * round(n / 3))
    if key == "grid":
        side = max(1, round(n ** (1.0 / dim)))
        return side ** dim
    if key == "tree":
        h = max(1, round(np.log2(n + 1)))
        return 2 ** h - 1
    if key == "ring":
        return max(3, n)
    return n
