"""Bundled example data."""

from importlib import resources

from .graphs import load_edge_list, load_labels


def _read(name):
    return resources.files("hypalign.data").joinpath(name).read_text("utf-8")


def zachary():
    """The 34-node karate club network with its two-faction labels."""
    net = load_edge_list(_read("zachary.edges"))
    return load_labels(_read("zachary.labels"), net)


def zachary_edge_path():
    """Filesystem path of the bundled karate club edge list."""
    return str(resources.files("hypalign.data").joinpath("zachary.edges"))
