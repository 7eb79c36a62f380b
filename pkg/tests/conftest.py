import numpy as np


def kkt_projection(beta, nb):
    """Independent Euclidean-projection oracle: solve the KKT system of
    min ||y - x||^2 subject to equal coordinates across nb."""
    n, d = beta.shape
    nb = list(nb)
    n_con = len(nb) - 1
    C = np.zeros((n_con, n))
    for r, (i, j) in enumerate(zip(nb, nb[1:])):
        C[r, i] = 1.0
        C[r, j] = -1.0
    kkt = np.block([
        [np.eye(n), C.T],
        [C, np.zeros((n_con, n_con))],
    ])
    out = np.empty_like(beta)
    for dim in range(d):
        rhs = np.concatenate([beta[:, dim], np.zeros(n_con)])
        out[:, dim] = np.linalg.solve(kkt, rhs)[:n]
    return out
