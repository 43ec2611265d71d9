"""Dense two-phase tableau simplex for small bounded LPs.

Used by the native branch-and-bound backend and by the enumeration oracle.
Variables are shifted to ``[0, ub - lb]`` and their upper bounds become
explicit rows, so the tableau only ever sees non-negative columns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
STALL_LIMIT = 30


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    x: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0


class _Tableau:
    def __init__(self, T: np.ndarray, basis: list[int]):
        self.T = T
        self.basis = basis
        self.iterations = 0

    def pivot(self, r: int, k: int) -> None:
        T = self.T
        T[r] /= T[r, k]
        col = T[:, k].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[np.abs(T) < 1e-13] = 0.0
        self.basis[r - 1] = k

    def run(self, ncols: int, max_iter: int) -> str:
        """Maximise the objective held in row 0 over the first ``ncols`` columns."""
        T = self.T
        bland = False
        stall = 0
        last = T[0, -1]
        while self.iterations < max_iter:
            reduced = T[0, :ncols]
            if bland:
                candidates = np.flatnonzero(reduced < -PIVOT_TOL)
                if candidates.size == 0:
                    return "optimal"
                k = int(candidates[0])
            else:
                k = int(np.argmin(reduced))
                if reduced[k] >= -PIVOT_TOL:
                    return "optimal"
            column = T[1:, k]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = T[1 + rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            # among ties prefer the smallest basic index (Bland-compatible)
            r = int(min(ties, key=lambda i: self.basis[i])) + 1
            self.pivot(r, k)
            self.iterations += 1
            if T[0, -1] > last + 1e-12:
                stall = 0
                last = T[0, -1]
            else:
                stall += 1
                if stall >= STALL_LIMIT:
                    bland = True
        return "iteration_limit"


def solve_lp(
    c: np.ndarray,
    A: np.ndarray,
    senses: list[str],
    b: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    max_iter: int = 20000,
) -> LPResult:
    """Maximise ``c @ x`` subject to ``A x (senses) b`` and ``lb <= x <= ub``."""
    n = len(c)
    if np.any(lb > ub + 1e-9):
        return LPResult("infeasible")
    span = np.maximum(ub - lb, 0.0)
    rhs_rows = b - A @ lb if A.size else np.zeros(0)

    row_coefs = [A[r] for r in range(A.shape[0])] + [np.eye(1, n, j)[0] for j in range(n)]
    row_sense = list(senses) + ["<="] * n
    row_rhs = np.concatenate([rhs_rows, span])
    m = len(row_coefs)
    n_slack = sum(1 for s in row_sense if s != "=")

    body = np.zeros((m, n + n_slack))
    slack_col = 0
    needs_art = []
    rhs = np.array(row_rhs, dtype=float)
    basis_guess: list[int | None] = []
    for r in range(m):
        body[r, :n] = row_coefs[r]
        col = None
        if row_sense[r] == "<=":
            col = n + slack_col
            body[r, col] = 1.0
            slack_col += 1
        elif row_sense[r] == ">=":
            col = n + slack_col
            body[r, col] = -1.0
            slack_col += 1
        if rhs[r] < 0:
            body[r] *= -1.0
            rhs[r] *= -1.0
        if col is not None and body[r, col] > 0:
            basis_guess.append(col)
        else:
            basis_guess.append(None)
            needs_art.append(r)

    n_art = len(needs_art)
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    T[1:, : n + n_slack] = body
    T[1:, -1] = rhs
    basis = []
    art_of_row = {}
    for a, r in enumerate(needs_art):
        T[1 + r, n + n_slack + a] = 1.0
        art_of_row[r] = n + n_slack + a
    for r in range(m):
        basis.append(basis_guess[r] if basis_guess[r] is not None else art_of_row[r])

    tab = _Tableau(T, basis)
    if n_art:
        # phase 1: maximise -(sum of artificials)
        T[0, n + n_slack : width] = 1.0
        for r in needs_art:
            T[0] -= T[1 + r]
        status = tab.run(width, max_iter)
        if status == "iteration_limit":
            return LPResult(status, iterations=tab.iterations)
        if T[0, -1] < -1e-7 * max(1.0, np.abs(rhs).max(initial=0.0)):
            return LPResult("infeasible", iterations=tab.iterations)
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = [True] * (m + 1)
        for r in range(m):
            if tab.basis[r] >= n + n_slack:
                row = T[1 + r, : n + n_slack]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(1 + r, int(nz[0]))
                else:
                    keep[1 + r] = False
        rows_kept = [i for i in range(m + 1) if keep[i]]
        tab.basis = [tab.basis[i - 1] for i in rows_kept[1:]]
        T = np.delete(T[rows_kept], np.s_[n + n_slack : width], axis=1)
        tab.T = T

    ncols = n + n_slack
    cost = np.zeros(ncols)
    cost[:n] = c
    T[0, :] = 0.0
    T[0, :ncols] = -cost
    for r, k in enumerate(tab.basis):
        if cost[k] != 0.0:
            T[0] += cost[k] * T[1 + r]
    status = tab.run(ncols, max_iter)
    if status != "optimal":
        return LPResult(status, iterations=tab.iterations)

    y = np.zeros(ncols)
    for r, k in enumerate(tab.basis):
        y[k] = T[1 + r, -1]
    x = lb + np.minimum(y[:n], span)
    return LPResult("optimal", x, float(c @ x), tab.iterations)
