"""Reference clustering scenarios: two candidate solutions U1, U2 against one reference V.

Rows are clusters of the candidate, columns clusters of the reference; both
candidates in a pair share the reference column sizes.
"""

from __future__ import annotations

from .partition import ContingencyTable, from_counts

__all__ = ["SCENARIOS", "scenario", "scenario_names"]

SCENARIOS = {
    # equal reference clusters; U1 keeps one cluster pure and mixes the other two
    "balanced-3": {
        "U1": [[50, 0, 0], [0, 44, 6], [0, 6, 44]],
        "U2": [[48, 1, 1], [1, 46, 3], [1, 3, 46]],
    },
    # three small reference clusters plus one big one; U1 has pure small clusters
    "small-clusters": {
        "U1": [[8, 0, 0, 0], [0, 7, 0, 0], [0, 0, 7, 0], [2, 3, 3, 70]],
        "U2": [[7, 1, 1, 1], [1, 7, 1, 1], [1, 1, 7, 1], [1, 1, 1, 67]],
    },
    # four equal reference clusters; U1 pure but merges leftovers into one cluster
    "balanced-4": {
        "U1": [[17, 0, 0, 0], [0, 17, 0, 0], [0, 0, 17, 0], [8, 8, 8, 25]],
        "U2": [[20, 2, 1, 1], [2, 20, 2, 1], [1, 1, 20, 1], [2, 2, 2, 22]],
    },
}


def scenario_names() -> list[str]:
    return list(SCENARIOS)


def scenario(name: str) -> list[tuple[str, ContingencyTable]]:
    """[("<name>/U1", table), ("<name>/U2", table)] for a named scenario."""
    try:
        pair = SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {scenario_names()}") from None
    return [(f"{name}/{key}", from_counts(grid)) for key, grid in pair.items()]
