"""Published figures for the reference 1984-1992 survey cohort (2507 heads of household).

Only the aggregate tables are public; they serve as regression references
for the Markov stage. The rows of ``TRANSITION_MATRIX`` for C and D sum to
1.09 and 0.90 as printed.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

MAIN_CLASSES = ("A", "B", "C", "D")
COHORT_SIZE = 2507
N_YEARS = 9

TRANSITION_MATRIX = np.array(
    [
        [0.57, 0.24, 0.08, 0.11],
        [0.06, 0.78, 0.02, 0.14],
        [0.04, 0.14, 0.85, 0.06],
        [0.04, 0.04, 0.05, 0.77],
    ]
)

STATIONARY = np.array([0.106, 0.363, 0.209, 0.322])

YEAR_DISTRIBUTIONS = {
    1984: np.array([0.138, 0.400, 0.181, 0.281]),
    1988: np.array([0.110, 0.381, 0.199, 0.309]),
    1992: np.array([0.112, 0.356, 0.203, 0.329]),
}

# off-diagonal moves between main classes, row-major without the diagonal
CHANGE_PAIRS = (
    ("A", "B"), ("A", "C"), ("A", "D"),
    ("B", "A"), ("B", "C"), ("B", "D"),
    ("C", "A"), ("C", "B"), ("C", "D"),
    ("D", "A"), ("D", "B"), ("D", "C"),
)
CHANGE_COUNTS = (554, 177, 242, 492, 159, 1036, 175, 150, 262, 241, 871, 306)
CHANGE_FRACTIONS = (0.12, 0.04, 0.05, 0.11, 0.03, 0.22, 0.04, 0.03, 0.06, 0.05, 0.19, 0.07)

SUPERCLASS_SIZES = (772, 588, 79, 1932, 416, 1495, 2240)
MAINCLASS_SIZES = {"A": 851, "B": 2936, "C": 1495, "D": 2240}


def change_count_matrix() -> np.ndarray:
    """The published change counts as a 4x4 matrix with an empty diagonal."""
    C = np.zeros((4, 4), dtype=np.int64)
    for (a, b), n in zip(CHANGE_PAIRS, CHANGE_COUNTS):
        C[MAIN_CLASSES.index(a), MAIN_CLASSES.index(b)] = n
    return C


def transition_matrix_csv() -> str:
    return resources.files("panelsom").joinpath("data/published_transition_matrix.csv").read_text(encoding="utf-8")
