import math

import numpy as np

STABLE_A, STABLE_B = 7.0, 4.0
UNSTABLE_A, UNSTABLE_B = 1.0, 2.0
EDGE_A, EDGE_B = 16.1916618724166685, 5.0
STABLE_U = (0.8913, 0.7621)
UNSTABLE_U = (0.4565, 0.0185)
COUPLED_U = (0.8214, 0.4447, 0.6154, 0.7919, 0.9218, 0.7382)
SEED = 20240601


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def two_block_rotation(red: float, green: float) -> np.ndarray:
    """Rotations in the (q1, p1) and (q2, p2) planes of a 4×4 standard-J space."""
    W = np.zeros((4, 4))
    for (q, p), theta in (((0, 2), red), ((1, 3), green)):
        c, s = math.cos(theta), math.sin(theta)
        W[q, q], W[q, p], W[p, q], W[p, p] = c, s, -s, c
    return W
