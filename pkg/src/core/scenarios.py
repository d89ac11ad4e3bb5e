"""Built-in experiments bundled with the package (mirrors of ``experiments/*.exp``)."""

from typing import Dict, NamedTuple

from src.core.importer import ExperimentFile, parse_experiment

EXAMPLE1 = """{
  "name": "example1",
  "weights": [
    [0.933, 0.067, 0,     0    ],
    [0,     0.722, 0.129, 0.149],
    [0,     0,     0.633, 0.367],
    [0.111, 0,     0,     0.889]
  ],
  "x0": [10, 7, 4, 0],
  "eps_levels": [1, 0.5, 0.1, 0.01, 0.001],
  "detector": "yz",
  "threshold": "diameter",
  "mode": "table1",
  "max_steps": 100000
}
"""

RING3 = """{
  "name": "ring3",
  "weights": [
    [0.5, 0.5,   0    ],
    [0,   0.999, 0.001],
    [0.5, 0,     0.5  ]
  ],
  "x0": [0, 0, 100],
  "eps_levels": [0.5],
  "detector": "yz",
  "threshold": "diameter",
  "mode": "table1",
  "max_steps": 3
}
"""

RANK_ONE = """{
  "name": "rank_one",
  "weights": [
    [0.25, 0.25, 0.25, 0.25],
    [0.25, 0.25, 0.25, 0.25],
    [0.25, 0.25, 0.25, 0.25],
    [0.25, 0.25, 0.25, 0.25]
  ],
  "x0": [3, -1, 2, 8],
  "eps_levels": [0.5],
  "detector": "yz",
  "threshold": "diameter",
  "mode": "table1",
  "max_steps": 100
}
"""

SCENARIOS: Dict[str, str] = {
    "example1": EXAMPLE1,
    "ring3": RING3,
    "rank_one": RANK_ONE,
}


class ReferenceRow(NamedTuple):
    consensus_time: int
    stopping_time: int
    response_time: int


# Published response-time table for example1, keyed by consensus level.
REFERENCE_TABLE: Dict[float, ReferenceRow] = {
    1.0: ReferenceRow(15, 23, 8),
    0.5: ReferenceRow(18, 24, 6),
    0.1: ReferenceRow(23, 30, 7),
    0.01: ReferenceRow(34, 44, 10),
    0.001: ReferenceRow(44, 51, 7),
}

# Published ergodic analysis of example1.
REFERENCE_ANALYSIS = {"diameter": 3, "h": 2, "tau_h": 0.0594, "bound": 40}

# Ring state after three slots, showing local consensus without global consensus.
RING3_X3 = (0.1, 0.1748, 12.525)

# Largest accepted gap between measured and published stopping times.
STOPPING_TIME_TOLERANCE = 3


def load_scenario(name: str) -> ExperimentFile:
    try:
        text = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"Unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}") from None
    return parse_experiment(text, source=f"<{name}>")
