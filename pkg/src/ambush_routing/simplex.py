"""Revised primal simplex for ``min c.x  s.t.  A_eq x = b_eq, A_ub x <= b_ub, x >= 0``.

The basis is held as a dense LU factorization plus a product-form eta file
and refactorized every ``refactor_every`` pivots. Pricing is Dantzig's
most-negative reduced cost. A run of ``stall_limit`` consecutive degenerate
pivots counts as a stall: from then on every basis is fingerprinted, and
the first repeated basis switches pricing to Bland's rule until a pivot
makes progress. Dantzig pricing rarely cycles in practice while Bland's rule
can crawl for thousands of pivots on these LPs, so Bland is kept for the
case where cycling actually shows up; termination is still guaranteed.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import sparse

log = logging.getLogger(__name__)

PRIMAL_TOL = 1e-8
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
ZERO_TOL = 1e-12


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class NumericalError(RuntimeError):
    """The basis became singular or the iterate lost feasibility beyond repair."""


@dataclass
class SimplexResult:
    x: np.ndarray
    status: Status
    objective: float
    iterations: int
    degenerate_pivots: int
    bland_pivots: int
    y_eq: np.ndarray
    y_ub: np.ndarray
    basis: list = field(default_factory=list)
    eq_residual: float = 0.0
    ub_violation: float = 0.0
    min_reduced_cost: float = 0.0


class _Basis:
    """LU of the basis matrix with an eta file of column replacements."""

    def __init__(self, A: sparse.csc_matrix, cols: Sequence[int]):
        self.A = A
        self.cols = list(cols)
        self.refactor()

    def refactor(self):
        B = self.A[:, self.cols].toarray()
        lu, piv = scipy.linalg.lu_factor(B, check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.min() <= 1e-11 * max(1.0, diag.max()):
            raise NumericalError("singular basis matrix")
        self.lu = (lu, piv)
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        x = scipy.linalg.lu_solve(self.lu, v, check_finite=False)
        for r, w in self.etas:
            xr = x[r] / w[r]
            x -= w * xr
            x[r] = xr
        return x

    def btran(self, u: np.ndarray) -> np.ndarray:
        u = np.array(u, dtype=float)
        for r, w in reversed(self.etas):
            ur = u[r]
            u[r] = 0.0
            u[r] = (ur - w @ u) / w[r]
        return scipy.linalg.lu_solve(self.lu, u, trans=1, check_finite=False)

    def replace(self, r: int, q: int, w: np.ndarray):
        self.cols[r] = q
        self.etas.append((r, w.copy()))


def _column(A: sparse.csc_matrix, j: int, m: int) -> np.ndarray:
    v = np.zeros(m)
    lo, hi = A.indptr[j], A.indptr[j + 1]
    v[A.indices[lo:hi]] = A.data[lo:hi]
    return v


def _iterate(A, b, c, basis: _Basis, xB, allowed, max_iter, refactor_every, stall_limit, counters):
    """Run pivots until optimal/unbounded/limit. Returns a Status."""
    m = A.shape[0]
    degenerate_run = 0
    bland = False
    AT = A.T.tocsr()
    # Zobrist fingerprints of the bases visited during the current stall
    keys = np.random.default_rng(0x5EED).integers(1, 2**62, size=A.shape[1])
    fingerprint = int(np.bitwise_xor.reduce(keys[basis.cols]))
    seen: set[int] = set()
    while True:
        if counters["iterations"] >= max_iter:
            return Status.ITERATION_LIMIT
        cB = c[basis.cols]
        y = basis.btran(cB)
        d = c - AT @ y
        d[basis.cols] = 0.0
        cand = np.flatnonzero((d < -DUAL_TOL) & allowed)
        if cand.size == 0:
            return Status.OPTIMAL
        if bland:
            q = int(cand[0])
        else:
            q = int(cand[np.argmin(d[cand])])
        w = basis.ftran(_column(A, q, m))
        rows = np.flatnonzero(w > PIVOT_TOL)
        if rows.size == 0:
            return Status.UNBOUNDED
        ratios = np.maximum(xB[rows], 0.0) / w[rows]
        theta = ratios.min()
        ties = rows[ratios <= theta + ZERO_TOL]
        if bland:
            r = int(ties[np.argmin(np.asarray(basis.cols)[ties])])
        else:
            r = int(ties[np.argmax(w[ties])])
        xB -= theta * w
        xB[r] = theta
        np.maximum(xB, 0.0, out=xB)
        fingerprint ^= int(keys[basis.cols[r]]) ^ int(keys[q])
        basis.replace(r, q, w)
        counters["iterations"] += 1
        if bland:
            counters["bland"] += 1
        if theta <= ZERO_TOL:
            counters["degenerate"] += 1
            degenerate_run += 1
            if degenerate_run >= stall_limit and not bland:
                if fingerprint in seen:
                    log.debug("basis repeated after %d degenerate pivots, switching to Bland's rule",
                              degenerate_run)
                    bland = True
                seen.add(fingerprint)
        else:
            degenerate_run = 0
            bland = False
            seen.clear()
        if len(basis.etas) >= refactor_every:
            basis.refactor()
            xB[:] = basis.ftran(b)


def _finish(A, b, c, basis, xB, allowed, run, attempts=3):
    """Refactor, recompute the iterate and re-run if it is no longer optimal."""
    status = Status.OPTIMAL
    for _ in range(attempts):
        basis.refactor()
        xB[:] = basis.ftran(b)
        if xB.min() < -PRIMAL_TOL:
            raise NumericalError(f"basic solution infeasible after refactorization ({xB.min():.3e})")
        np.maximum(xB, 0.0, out=xB)
        status = run()
        if status is not Status.OPTIMAL:
            return status
        if not basis.etas:
            return status
    return status


def solve_lp(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, basis: Optional[Sequence[int]] = None,
             max_iter: int = 200_000, refactor_every: int = 100, stall_limit: int = 50) -> SimplexResult:
    """Solve a linear program with nonnegative variables.

    ``basis`` may name a starting basis as column indices into ``[x, s]``
    (structural variables followed by one slack per inequality row). If it
    is nonsingular and primal feasible, phase one is skipped.
    """
    c = np.asarray(c, float)
    n = c.size
    A_eq = sparse.csc_matrix((0, n)) if A_eq is None else sparse.csc_matrix(A_eq, dtype=float)
    A_ub = sparse.csc_matrix((0, n)) if A_ub is None else sparse.csc_matrix(A_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float)
    me, mu = A_eq.shape[0], A_ub.shape[0]
    m = me + mu
    if A_eq.shape[1] != n or A_ub.shape[1] != n or b_eq.size != me or b_ub.size != mu:
        raise ValueError("inconsistent LP dimensions")

    A0 = sparse.vstack([sparse.hstack([A_eq, sparse.csc_matrix((me, mu))]),
                        sparse.hstack([A_ub, sparse.identity(mu, format="csc")])], format="csc")
    b = np.concatenate([b_eq, b_ub])
    nx = n + mu
    counters = {"iterations": 0, "degenerate": 0, "bland": 0}
    c_full = np.concatenate([c, np.zeros(mu)])

    B = None
    if basis is not None:
        try:
            B = _Basis(A0, basis)
            xB = B.ftran(b)
            if xB.min() < -PRIMAL_TOL:
                log.debug("starting basis infeasible, falling back to phase one")
                B = None
            else:
                A = A0
                np.maximum(xB, 0.0, out=xB)
                n_art = 0
        except NumericalError:
            B = None

    if B is None:
        # phase one: artificials on every row whose slack cannot start the basis
        sign = np.where(b < 0, -1.0, 1.0)
        Af = sparse.diags(sign) @ A0
        bf = b * sign
        art_rows = [i for i in range(m) if i < me or sign[i] < 0]
        n_art = len(art_rows)
        art = sparse.csc_matrix((np.ones(n_art), (art_rows, np.arange(n_art))), shape=(m, n_art))
        A = sparse.hstack([Af, art], format="csc")
        cols = [0] * m
        for k, i in enumerate(art_rows):
            cols[i] = nx + k
        for i in range(me, m):
            if sign[i] > 0:
                cols[i] = n + (i - me)
        B = _Basis(A, cols)
        xB = B.ftran(bf)
        c1 = np.concatenate([np.zeros(nx), np.ones(n_art)])
        allowed = np.ones(nx + n_art, bool)
        run = lambda: _iterate(A, bf, c1, B, xB, allowed, max_iter, refactor_every, stall_limit, counters)
        st = run()
        if st is Status.OPTIMAL:
            st = _finish(A, bf, c1, B, xB, allowed, run)
        if st is Status.ITERATION_LIMIT:
            return _result(A, b, c_full, B, xB, st, counters, n, me, mu, nx, sign)
        if st is not Status.OPTIMAL:
            raise NumericalError(f"phase one ended with status {st.value}")
        infeas = float(sum(xB[i] for i, j in enumerate(B.cols) if j >= nx))
        if infeas > PRIMAL_TOL:
            return _result(A, b, c_full, B, xB, Status.INFEASIBLE, counters, n, me, mu, nx, sign)
        _drive_out_artificials(A, B, xB, nx, bf)
        b = bf
    else:
        sign = np.ones(m)

    c2 = np.concatenate([c_full, np.zeros(A.shape[1] - nx)])
    allowed = np.zeros(A.shape[1], bool)
    allowed[:nx] = True
    run = lambda: _iterate(A, b, c2, B, xB, allowed, max_iter, refactor_every, stall_limit, counters)
    st = run()
    if st is Status.OPTIMAL:
        st = _finish(A, b, c2, B, xB, allowed, run)
    return _result(A, b, c2, B, xB, st, counters, n, me, mu, nx, sign)


def _drive_out_artificials(A, B: _Basis, xB, nx, b):
    """Pivot zero-valued artificials out of the basis where the row allows it.

    Artificials left behind sit on redundant rows and stay at zero.
    """
    m = A.shape[0]
    Ax = A[:, :nx].tocsc()
    for r in range(m):
        if B.cols[r] < nx:
            continue
        e = np.zeros(m)
        e[r] = 1.0
        row = Ax.T @ B.btran(e)
        row[[j for j in B.cols if j < nx]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-7:
            B.replace(r, j, B.ftran(_column(A, j, m)))
            xB[r] = 0.0
    B.refactor()
    xB[:] = np.maximum(B.ftran(b), 0.0)


def _result(A, b, c, B, xB, status, counters, n, me, mu, nx, sign) -> SimplexResult:
    c = np.concatenate([c, np.zeros(A.shape[1] - len(c))])
    x_all = np.zeros(A.shape[1])
    x_all[B.cols] = xB
    x = x_all[:n].copy()
    x[x < 0] = 0.0
    y = B.btran(c[B.cols]) * sign
    d = c - A.T @ B.btran(c[B.cols])
    d[B.cols] = 0.0
    A_struct = A[:, :n]
    r = (sparse.diags(sign) @ A_struct @ x) if sign is not None else A_struct @ x
    b_orig = b * sign
    eq_res = float(np.max(np.abs(r[:me] - b_orig[:me]), initial=0.0))
    ub_viol = float(np.max(r[me:] - b_orig[me:], initial=0.0))
    return SimplexResult(
        x=x,
        status=status,
        objective=float(c[:n] @ x),
        iterations=counters["iterations"],
        degenerate_pivots=counters["degenerate"],
        bland_pivots=counters["bland"],
        y_eq=y[:me],
        y_ub=y[me:],
        basis=list(B.cols),
        eq_residual=eq_res,
        ub_violation=ub_viol,
        min_reduced_cost=float(d[:nx].min(initial=0.0)),
    )
