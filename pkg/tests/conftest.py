import numpy as np
import pytest

from hypalign import datasets
from hypalign.graphs import Network, NetworkPair, load_edge_list


@pytest.fixture(scope="session")
def zachary():
    return datasets.zachary()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_ball_points(rng, n, d, max_radius=0.8):
    """Uniform directions with radii in (0, max_radius)."""
    x = rng.normal(size=(n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * rng.uniform(0.05, max_radius, size=(n, 1))


def path_graph(n):
    tokens = [f"v{i}" for i in range(n)]
    adjacency = [[] for _ in range(n)]
    for i in range(n - 1):
        adjacency[i].append(i + 1)
        adjacency[i + 1].append(i)
    return Network(nodes=tokens, adjacency=[sorted(a) for a in adjacency])


def balanced_binary_tree(depth):
    n = 2 ** (depth + 1) - 1
    tokens = [f"t{i}" for i in range(n)]
    adjacency = [[] for _ in range(n)]
    for i in range(1, n):
        parent = (i - 1) // 2
        adjacency[i].append(parent)
        adjacency[parent].append(i)
    return Network(nodes=tokens, adjacency=[sorted(a) for a in adjacency])


def tiny_pair():
    """Two 3-node triangles with one train anchor."""
    src = load_edge_list("a b\nb c\nc a")
    tgt = load_edge_list("x y\ny z\nz x")
    return NetworkPair(source=src, target=tgt, anchors_train={(0, 0)},
                       anchors_test={(1, 1)})


def cycle_pair(n=6, n_train=2, n_test=2):
    """Two n-cycles with identity anchors (cycles leave room for
    negative sampling)."""
    src = load_edge_list("\n".join(f"a{i} a{(i + 1) % n}" for i in range(n)))
    tgt = load_edge_list("\n".join(f"b{i} b{(i + 1) % n}" for i in range(n)))
    train = {(i, i) for i in range(n_train)}
    test = {(i, i) for i in range(n_train, n_train + n_test)}
    return NetworkPair(source=src, target=tgt, anchors_train=train,
                       anchors_test=test)
