"""Random embedding graphs written as fixture stores, plus a naive oracle."""

import random

from memcoherence.chrono import ArchivalDatetime
from memcoherence.fixtures import FixtureWriter

T0 = ArchivalDatetime(1_100_000_000)


def uri(i):
    return f"http://n{i}.example/r{i}"


def random_graph(rng: random.Random, n_max=20, max_layer=3, cyclic=False):
    """Return ``{node: {"kind", "children", "mementos": [(offset, retrievable)]}}``.

    Node 0 is the root page. Acyclic graphs only link to deeper layers.
    """
    n = rng.randint(1, n_max)
    layer = {0: 0}
    for i in range(1, n):
        layer[i] = rng.randint(1, max_layer)
    g = {}
    for i in range(n):
        kind = "html" if i == 0 or rng.random() < 0.4 else "img"
        if i == 0:
            mementos = [(0, True)]
        else:
            mementos = [(rng.randint(-5, 5) * 3600, rng.random() > 0.15)
                        for _ in range(rng.randint(0, 3))]
        g[i] = {"kind": kind, "children": [], "mementos": mementos}
    for i in range(n):
        if g[i]["kind"] != "html":
            continue
        if cyclic:
            pool = [j for j in range(n) if j != i]
        else:
            pool = [j for j in range(n) if layer[j] > layer[i]]
        g[i]["children"] = rng.sample(pool, min(len(pool), rng.randint(0, 5)))
    return g


def body(g, i):
    tags = []
    for j in g[i]["children"]:
        ref = f"/web/{T0.stamp()}/{uri(j)}"
        tags.append(f'<iframe src="{ref}"></iframe>' if g[j]["kind"] == "html"
                    else f'<img src="{ref}">')
    return ("<html><body>" + "".join(tags) + "</body></html>").encode()


def write_store(g, root):
    w = FixtureWriter(root)
    for i, node in g.items():
        w.add_resource(uri(i))
        for k, (offset, ok) in enumerate(node["mementos"]):
            when = ArchivalDatetime(T0.epoch_seconds + offset)
            html = node["kind"] == "html"
            w.add_memento(uri(i), when, retrievable=ok, file=f"m{k}",
                          uri_m=w.uri_m(uri(i), when) + ("" if k == 0 else f"?dup={k}"),
                          body=body(g, i) if html else b"GIF89a%d" % i,
                          media_type="text/html" if html else "image/gif")
    return w


def naive_selected(node, pivot):
    """Index of the nearest memento, earlier one on ties, or None."""
    if not node["mementos"]:
        return None
    order = sorted(range(len(node["mementos"])),
                   key=lambda k: (abs(node["mementos"][k][0] - pivot), node["mementos"][k][0], k))
    return order[0]


def naive_composite(g, max_depth, pivot=0):
    """Depth-bounded recursion: every embedded resource reachable from the root.

    Returns ``{node: (resolution, selected index)}``. Without a visited set,
    so it is only safe on acyclic graphs.
    """
    out = {}

    def visit(i, depth):
        for j in g[i]["children"]:
            k = naive_selected(g[j], pivot)
            if k is None:
                status = "NotArchived"
            elif not g[j]["mementos"][k][1]:
                status = "MissingMemento"
            else:
                status = "Resolved"
            out[j] = (status, k)
            if status == "Resolved" and g[j]["kind"] == "html" and depth < max_depth:
                visit(j, depth + 1)

    visit(0, 1)
    return out
