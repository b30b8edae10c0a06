"""Independent reference computations used by the tests.

Nothing here calls the package's solvers: edges are integrated with scipy's
adaptive Runge-Kutta on the classical form of the equation, and tree
eigenvalues come from the global matrix of vertex conditions.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

PI = np.pi


def shoot(sigma, dsigma, lam, y0, yq0):
    """y(pi), y^[1](pi) for -y'' + sigma' y = lam y with y(0), y^[1](0) given."""
    def rhs(x, z):
        return [z[1], (dsigma(x) - lam) * z[0]]

    sol = solve_ivp(rhs, (0.0, PI), [y0, yq0 + sigma(0.0) * y0], method="DOP853",
                    rtol=1e-12, atol=1e-13)
    y, dy = sol.y[:, -1]
    return y, dy - sigma(PI) * y


def cauchy_values(sigma, dsigma, lam):
    """(C, C^[1], S, S^[1]) at x = pi."""
    C, Cq = shoot(sigma, dsigma, lam, 1.0, 0.0)
    S, Sq = shoot(sigma, dsigma, lam, 0.0, 1.0)
    return C, Cq, S, Sq


def free_cauchy(lam):
    """Cauchy values for sigma = 0 in closed form (lam > 0)."""
    rho = np.sqrt(lam)
    return np.cos(rho * PI), -rho * np.sin(rho * PI), np.sin(rho * PI) / rho, np.cos(rho * PI)


def condition_matrix(tree, entries):
    """Matrix of all vertex conditions for y_e = a_e C_e + b_e S_e.

    ``entries`` maps edge ids to (C, C^[1], S, S^[1]) at x = pi. Its
    determinant vanishes exactly at the eigenvalues of the tree.
    """
    idx = {e.id: 2 * i for i, e in enumerate(tree.edges)}
    rows = []
    for v in tree.vertices:
        ends = []
        for e in tree.edges:
            C, Cq, S, Sq = entries[e.id]
            g = tree.gamma.get(e.id, 0.0)
            if e.tail == v:
                ends.append((e.id, (1.0, 0.0), (0.0, -1.0)))
            if e.head == v:
                ends.append((e.id, (C, S), (Cq + g * C, Sq + g * S)))
        if len(ends) == 1:
            eid, val, flux = ends[0]
            row = np.zeros(2 * tree.m)
            row[idx[eid]:idx[eid] + 2] = val if tree.bc[v] == "D" else flux
            rows.append(row)
            continue
        for (e0, v0, _), (e1, v1, _) in zip(ends, ends[1:]):
            row = np.zeros(2 * tree.m)
            row[idx[e0]:idx[e0] + 2] = v0
            row[idx[e1]:idx[e1] + 2] -= np.asarray(v1)
            rows.append(row)
        row = np.zeros(2 * tree.m)
        for eid, _, flux in ends:
            row[idx[eid]:idx[eid] + 2] += flux
        rows.append(row)
    return np.array(rows)


def matrix_eigenvalues(tree, entries_at, rho_max, step=0.002):
    """Eigenvalues (as rho > 0) from sign changes of the condition determinant.

    Multiple eigenvalues do not change the sign and are missed; callers use
    trees with simple spectra in the scanned range.
    """
    def det(rho):
        return np.linalg.det(condition_matrix(tree, entries_at(rho * rho)))

    grid = np.arange(step, rho_max, step)
    vals = np.array([det(r) for r in grid])
    out = []
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa == 0.0:
            out.append(a)
        elif fa * fb < 0:
            out.append(brentq(det, a, b, xtol=1e-13))
    return np.array(out)


def cos_polynomial_alphas(coeffs_in_c2):
    """Alphas from a polynomial in c^2 = cos^2(rho pi) (highest power first)."""
    roots = np.roots(coeffs_in_c2)
    c = np.sqrt(roots.real)
    return np.sort(np.arccos(c) / PI)


def discrete_l2_relative(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(a))
