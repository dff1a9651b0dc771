"""Bundled networks.

``abilene-homogeneous``
    The 11-node, 14-link Abilene backbone as 28 unit-capacity directed edges
    with unit node rates.  Metric weights are the publicly circulated
    geography-based OSPF weights; they are a best-effort reconstruction.
    Edge 1 (index 0) is Seattle->Sunnyvale and edge 13 (index 12) is
    Kansas City->Indianapolis.
``abilene-heterogeneous``
    Same topology with per-node ingress/egress rates taken from a surrogate
    table (units of 10 Gbps).  Replace them with measured maxima through
    :meth:`tplots.net.Network.with_rates`.
``toy4``
    Bidirectional 4-ring with one chord, for exhaustive checks.
``fix5``
    Complete digraph on 5 nodes; ``e0`` has capacity 1 and every other edge
    capacity 2, so ``e0`` is the strictly minimal edge.
"""

from __future__ import annotations

import json
from importlib import resources

from ..exceptions import StructuralError
from ..net import Network

FIXTURES = ("abilene-homogeneous", "abilene-heterogeneous", "toy4", "fix5")

_ALIASES = {"abilene": "abilene-homogeneous", "abilene-h": "abilene-heterogeneous"}


def load_fixture(name: str) -> Network:
    key = _ALIASES.get(name, name)
    if key.endswith(".json"):
        key = _ALIASES.get(key[:-5], key[:-5])
    if key not in FIXTURES:
        raise StructuralError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    text = resources.files(__name__).joinpath(f"{key}.json").read_text()
    return Network.from_dict(json.loads(text))
