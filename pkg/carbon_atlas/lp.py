"""
Deterministic linear programming.

The bundled :class:`SimplexSolver` is a bounded-variable revised simplex on a
dense LU basis factorization with a product-form eta file. It reports the
optimal basis and active set, which the sensitivity analysis needs, and is
bit-for-bit reproducible for identical input. :class:`HighsSolver` wraps
``scipy.optimize.linprog`` for cross-checks on larger problems.
"""

import enum
import hashlib
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Protocol, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-8
OPT_TOL = 1e-8
SLACK_TOL = 1e-6
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
DRIVE_TOL = 1e-7
SINGULAR_TOL = 1e-12
REFACTOR_EVERY = 64

_BASIC, _LOWER, _UPPER, _FREE = 0, 1, 2, 3


class Relation(enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    FAILED = "failed"


@dataclass(frozen=True)
class LpRow:
    """One constraint ``sum(coef * x[col]) <relation> rhs``."""

    id: str
    coeffs: Tuple[Tuple[int, float], ...]
    relation: Relation
    rhs: float


def _frozen_array(values, size: int, name: str) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True).reshape(-1)
    if array.shape[0] != size:
        raise ValueError(f"{name} has length {array.shape[0]}, expected {size}")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``min c.x`` subject to ``rows`` and ``lower <= x <= upper``.

    Columns and rows carry stable string identifiers; row ids are how
    callers recognise constraints in the reported active set.
    """

    column_ids: Tuple[str, ...]
    c: np.ndarray
    rows: Tuple[LpRow, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = len(self.column_ids)
        object.__setattr__(self, "column_ids", tuple(self.column_ids))
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "c", _frozen_array(self.c, n, "c"))
        object.__setattr__(self, "lower", _frozen_array(self.lower, n, "lower"))
        object.__setattr__(self, "upper", _frozen_array(self.upper, n, "upper"))

        if len(set(self.column_ids)) != n:
            raise ValueError("Column identifiers are not unique.")
        row_ids = [row.id for row in self.rows]
        if len(set(row_ids)) != len(row_ids):
            raise ValueError("Row identifiers are not unique.")
        for row in self.rows:
            for col, _ in row.coeffs:
                if not 0 <= col < n:
                    raise ValueError(f"Row '{row.id}' references column {col} >= {n}")
        if np.any(self.lower > self.upper):
            raise ValueError("Some variable has lower bound > upper bound.")
        if np.any(self.lower == math.inf) or np.any(self.upper == -math.inf):
            raise ValueError("Variable bounds exclude every finite value.")

    @property
    def n(self) -> int:
        return len(self.column_ids)

    @property
    def m(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        """Dense constraint matrix, one row per LpRow."""
        a = np.zeros((self.m, self.n))
        for i, row in enumerate(self.rows):
            for col, value in row.coeffs:
                a[i, col] += value
        return a

    def rhs(self) -> np.ndarray:
        return np.array([row.rhs for row in self.rows], dtype=float)

    def row_index(self, row_id: str) -> int:
        for i, row in enumerate(self.rows):
            if row.id == row_id:
                return i
        raise KeyError(f"Row '{row_id}' not found.")


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Outcome of one LP solve.

    ``basis`` lists basic variables in the extended space (structural
    columns, then one slack per row) and ``at_upper`` the nonbasic ones
    resting on their upper bound; together they let a later solve start
    from this vertex. ``problem_digest`` fingerprints the problem that was
    solved. Duals follow ``d(objective)/d(rhs)``.
    """

    status: LpStatus
    x: np.ndarray
    objective: float
    active_rows: FrozenSet[str] = frozenset()
    active_bounds: FrozenSet[Tuple[int, str]] = frozenset()
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    basis: Tuple[int, ...] = ()
    at_upper: FrozenSet[int] = frozenset()
    iterations: int = 0
    problem_digest: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class LpSolver(Protocol):
    """Anything that can solve an LpProblem and report its active set."""

    def solve(self, problem: LpProblem, hint: Optional[LpSolution] = None) -> LpSolution:
        ...


def problem_digest(problem: LpProblem) -> str:
    """SHA-256 over the exact bytes of costs, rows and bounds."""
    h = hashlib.sha256()
    for array in (problem.c, problem.lower, problem.upper, problem.matrix(), problem.rhs()):
        h.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
    h.update("".join(row.relation.value for row in problem.rows).encode())
    return h.hexdigest()


def _failed(problem: LpProblem, status: LpStatus, iterations: int = 0) -> LpSolution:
    return LpSolution(
        status=status,
        x=np.full(problem.n, np.nan),
        objective=math.nan,
        duals=np.full(problem.m, np.nan),
        reduced_costs=np.full(problem.n, np.nan),
        iterations=iterations,
    )


def _active_sets(problem: LpProblem, x: np.ndarray) -> Tuple[FrozenSet[str], FrozenSet[Tuple[int, str]]]:
    """Classify rows with zero slack and variables sitting on a bound."""
    activity = problem.matrix() @ x if problem.m else np.zeros(0)
    rows = set()
    for i, row in enumerate(problem.rows):
        if row.relation is Relation.EQ or abs(row.rhs - activity[i]) <= SLACK_TOL:
            rows.add(row.id)
    bounds = set()
    for j in range(problem.n):
        if math.isfinite(problem.lower[j]) and abs(x[j] - problem.lower[j]) <= SLACK_TOL:
            bounds.add((j, "lower"))
        if math.isfinite(problem.upper[j]) and abs(x[j] - problem.upper[j]) <= SLACK_TOL:
            bounds.add((j, "upper"))
    return frozenset(rows), frozenset(bounds)


class _SimplexRun:
    """State of one simplex solve. Single use."""

    def __init__(self, problem: LpProblem):
        n, m = problem.n, problem.m
        self.problem = problem
        self.n, self.m = n, m
        self.total = n + 2 * m
        self.b = problem.rhs()

        # Columns: structural | slack (a.x + s = b) | artificial
        self.M = np.zeros((m, self.total))
        self.M[:, :n] = problem.matrix()
        self.M[:, n : n + m] = np.eye(m)
        self.M[:, n + m :] = np.eye(m)

        slack_lower = np.array(
            [-math.inf if row.relation is Relation.GE else 0.0 for row in problem.rows]
        )
        slack_upper = np.array(
            [math.inf if row.relation is Relation.LE else 0.0 for row in problem.rows]
        )
        self.lower = np.concatenate([problem.lower, slack_lower, np.zeros(m)])
        self.upper = np.concatenate([problem.upper, slack_upper, np.zeros(m)])

        self.z = np.zeros(self.total)
        self.status = np.full(self.total, _LOWER)
        self.basis: List[int] = []
        self.lu = None
        self.etas: List[Tuple[int, np.ndarray]] = []
        self.iterations = 0
        self.max_iterations = max(10_000, 50 * (n + m))

    # ---- Factorization ----

    def _refactor(self, sort: bool = False) -> bool:
        if sort:
            self.basis = sorted(self.basis)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = lu_factor(self.M[:, self.basis], check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.min() <= SINGULAR_TOL * max(1.0, pivots.max()):
            return False
        self.lu = (lu, piv)
        self.etas = []
        self._recompute_basics()
        return True

    def _ftran(self, v: np.ndarray) -> np.ndarray:
        x = lu_solve(self.lu, v, check_finite=False)
        for r, alpha in self.etas:
            xr = x[r] / alpha[r]
            x -= alpha * xr
            x[r] = xr
        return x

    def _btran(self, c: np.ndarray) -> np.ndarray:
        u = np.array(c, dtype=float)
        for r, alpha in reversed(self.etas):
            u[r] = (u[r] - (alpha @ u - alpha[r] * u[r])) / alpha[r]
        return lu_solve(self.lu, u, trans=1, check_finite=False)

    def _recompute_basics(self) -> None:
        nonbasic = self.status != _BASIC
        rhs = self.b - self.M[:, nonbasic] @ self.z[nonbasic]
        self.z[self.basis] = lu_solve(self.lu, rhs, check_finite=False)

    # ---- Start points ----

    def _rest(self, j: int) -> None:
        """Put nonbasic variable ``j`` on its resting bound (0 if free)."""
        if math.isfinite(self.lower[j]):
            self.status[j], self.z[j] = _LOWER, self.lower[j]
        elif math.isfinite(self.upper[j]):
            self.status[j], self.z[j] = _UPPER, self.upper[j]
        else:
            self.status[j], self.z[j] = _FREE, 0.0

    def _cold_start(self) -> None:
        n, m = self.n, self.m
        for j in range(n):
            self._rest(j)
        residual = self.b - self.M[:, :n] @ self.z[:n]
        self.basis = []
        for i in range(m):
            slack, artificial = n + i, n + m + i
            if self.lower[slack] - FEAS_TOL <= residual[i] <= self.upper[slack] + FEAS_TOL:
                self.basis.append(slack)
                self.status[slack] = _BASIC
                self._rest(artificial)
            else:
                self._rest(slack)
                excess = residual[i] - self.z[slack]
                self.M[i, artificial] = 1.0 if excess > 0 else -1.0
                self.upper[artificial] = math.inf
                self.basis.append(artificial)
                self.status[artificial] = _BASIC
        self._refactor()

    def _warm_start(self, hint: LpSolution) -> bool:
        n, m = self.n, self.m
        basis = sorted(hint.basis)
        if (
            len(basis) != m
            or len(set(basis)) != m
            or any(not 0 <= j < n + m for j in basis)
            or hint.x.shape[0] != n
        ):
            return False
        for j in range(self.total):
            self._rest(j)
            if j in hint.at_upper and math.isfinite(self.upper[j]):
                self.status[j], self.z[j] = _UPPER, self.upper[j]
        for j in basis:
            self.status[j] = _BASIC
        self.basis = basis
        if not self._refactor():
            return False
        x_b = self.z[self.basis]
        scale = FEAS_TOL * (1.0 + np.abs(x_b))
        lower, upper = self.lower[self.basis], self.upper[self.basis]
        return bool(np.all(x_b >= lower - scale) and np.all(x_b <= upper + scale))

    # ---- Iteration ----

    def _price(self, d: np.ndarray) -> Tuple[Optional[int], int]:
        """Bland's rule: the lowest-indexed column that improves the objective."""
        movable = self.upper > self.lower
        gain = np.zeros(self.total)
        at_lower = (self.status == _LOWER) & movable
        at_upper = (self.status == _UPPER) & movable
        free = self.status == _FREE
        gain[at_lower] = -d[at_lower]
        gain[at_upper] = d[at_upper]
        gain[free] = np.abs(d[free])
        candidates = np.flatnonzero(gain > DUAL_TOL)
        if candidates.size == 0:
            return None, 0
        q = int(candidates[0])
        return q, (1 if d[q] < 0 else -1)

    def _ratio_test(
        self, q: int, direction: int, alpha: np.ndarray
    ) -> Tuple[Optional[float], Optional[int]]:
        rate = -direction * alpha
        basis = np.array(self.basis)
        x_b = self.z[basis]
        steps = np.full(self.m, math.inf)
        falling = (rate < -PIVOT_TOL) & np.isfinite(self.lower[basis])
        rising = (rate > PIVOT_TOL) & np.isfinite(self.upper[basis])
        steps[falling] = (x_b[falling] - self.lower[basis][falling]) / -rate[falling]
        steps[rising] = (self.upper[basis][rising] - x_b[rising]) / rate[rising]
        steps = np.maximum(steps, 0.0)

        flip = self.upper[q] - self.lower[q]
        best = steps.min() if self.m else math.inf
        if not math.isfinite(best) and not math.isfinite(flip):
            return None, None
        if flip <= best:
            return float(flip), None

        ties = np.flatnonzero(steps <= best + 1e-12 * (1.0 + best))
        r = int(min(ties, key=lambda i: basis[i]))
        return float(steps[r]), r

    def _pivot(self, q: int, direction: int, alpha: np.ndarray, step: float, r: Optional[int]) -> None:
        rate = -direction * alpha
        self.z[self.basis] += rate * step
        if r is None:
            if self.status[q] == _LOWER:
                self.status[q], self.z[q] = _UPPER, self.upper[q]
            else:
                self.status[q], self.z[q] = _LOWER, self.lower[q]
            return
        self.z[q] += direction * step
        leaving = self.basis[r]
        if rate[r] < 0:
            self.status[leaving], self.z[leaving] = _LOWER, self.lower[leaving]
        else:
            self.status[leaving], self.z[leaving] = _UPPER, self.upper[leaving]
        self.basis[r] = q
        self.status[q] = _BASIC
        self.etas.append((r, alpha.copy()))

    def _iterate(self, cost: np.ndarray) -> LpStatus:
        while True:
            y = self._btran(cost[self.basis])
            d = cost - y @ self.M
            q, direction = self._price(d)
            if q is None:
                if self.etas or self.basis != sorted(self.basis):
                    if not self._refactor(sort=True):
                        return LpStatus.FAILED
                    continue
                return LpStatus.OPTIMAL

            if self.iterations >= self.max_iterations:
                logger.warning("Simplex iteration limit %d reached", self.max_iterations)
                return LpStatus.FAILED
            alpha = self._ftran(self.M[:, q])
            step, r = self._ratio_test(q, direction, alpha)
            if step is None:
                return LpStatus.UNBOUNDED
            self.iterations += 1
            self._pivot(q, direction, alpha, step, r)
            if len(self.etas) >= REFACTOR_EVERY and not self._refactor():
                return LpStatus.FAILED

    def _drive_out_artificials(self) -> bool:
        n, m = self.n, self.m
        self.upper[n + m :] = 0.0
        for r in range(m):
            if self.basis[r] < n + m:
                continue
            unit = np.zeros(m)
            unit[r] = 1.0
            row = self._btran(unit) @ self.M
            candidates = [
                j
                for j in range(n + m)
                if self.status[j] != _BASIC and abs(row[j]) > DRIVE_TOL
            ]
            if not candidates:
                continue  # redundant row; the artificial stays basic at zero
            q = max(candidates, key=lambda j: (abs(row[j]), -j))
            leaving = self.basis[r]
            self.z[leaving] = 0.0
            self.status[leaving] = _LOWER
            self.basis[r] = q
            self.status[q] = _BASIC
            if not self._refactor():
                return False
        return True

    # ---- Entry points ----

    def phase_one(self) -> LpStatus:
        self._cold_start()
        if self.lu is None:
            return LpStatus.FAILED
        cost = np.zeros(self.total)
        cost[self.n + self.m :] = 1.0
        status = self._iterate(cost)
        if status is not LpStatus.OPTIMAL:
            return LpStatus.FAILED
        infeasibility = float(np.sum(self.z[self.n + self.m :]))
        if infeasibility > FEAS_TOL * max(1.0, float(np.max(np.abs(self.b), initial=0.0))):
            return LpStatus.INFEASIBLE
        if not self._drive_out_artificials():
            return LpStatus.FAILED
        return LpStatus.OPTIMAL

    def phase_two(self) -> LpStatus:
        return self._iterate(self._phase_two_cost())

    def _phase_two_cost(self) -> np.ndarray:
        cost = np.zeros(self.total)
        cost[: self.n] = self.problem.c
        return cost

    def unique_optimum(self) -> bool:
        """True if the final basis is primal and dual non-degenerate."""
        basis = self.basis
        if any(j >= self.n + self.m for j in basis):
            return False
        x_b = self.z[basis]
        margin = np.minimum(x_b - self.lower[basis], self.upper[basis] - x_b)
        if np.any(margin <= SLACK_TOL):
            return False
        cost = self._phase_two_cost()
        d = cost - self._btran(cost[basis]) @ self.M
        movable = (self.status != _BASIC) & (self.upper > self.lower)
        movable[self.n + self.m :] = False
        return bool(np.all(np.abs(d[movable]) > OPT_TOL))

    def solution(self) -> LpSolution:
        n, m = self.n, self.m
        cost = self._phase_two_cost()
        y = self._btran(cost[self.basis])
        d = cost - y @ self.M
        x = self.z[:n].copy()
        active_rows, active_bounds = _active_sets(self.problem, x)
        return LpSolution(
            status=LpStatus.OPTIMAL,
            x=x,
            objective=float(self.problem.c @ x),
            active_rows=active_rows,
            active_bounds=active_bounds,
            duals=y,
            reduced_costs=d[:n].copy(),
            basis=tuple(self.basis),
            at_upper=frozenset(
                int(j) for j in np.flatnonzero(self.status[: n + m] == _UPPER)
            ),
            iterations=self.iterations,
            problem_digest=problem_digest(self.problem),
        )


def _solve_without_rows(problem: LpProblem) -> LpSolution:
    """Bound-constrained LP: every variable goes to its cheaper bound."""
    x = np.zeros(problem.n)
    for j in range(problem.n):
        lower, upper, cost = problem.lower[j], problem.upper[j], problem.c[j]
        if cost > 0:
            x[j] = lower
        elif cost < 0:
            x[j] = upper
        else:
            x[j] = lower if math.isfinite(lower) else upper if math.isfinite(upper) else 0.0
        if not math.isfinite(x[j]):
            return _failed(problem, LpStatus.UNBOUNDED)
    active_rows, active_bounds = _active_sets(problem, x)
    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=x,
        objective=float(problem.c @ x),
        active_rows=active_rows,
        active_bounds=active_bounds,
        duals=np.zeros(0),
        reduced_costs=np.array(problem.c, dtype=float),
        at_upper=frozenset(j for j in range(problem.n) if problem.c[j] < 0),
    )


class SimplexSolver:
    """The bundled bounded-variable revised simplex.

    Entering and leaving variables follow Bland's rule on column indices
    in every pivot, so the vertex reached on a degenerate problem depends
    only on the input. A warm start is kept when the hinted basis is
    still optimal for the very problem it came from (zero pivots) or when
    it ends at a unique optimum; otherwise the problem is solved cold.
    """

    def solve(self, problem: LpProblem, hint: Optional[LpSolution] = None) -> LpSolution:
        if problem.m == 0:
            return _solve_without_rows(problem)
        if hint is not None and hint.is_optimal:
            warm = _SimplexRun(problem)
            if warm._warm_start(hint):
                status = warm.phase_two()
                unchanged = (
                    warm.iterations == 0 and hint.problem_digest == problem_digest(problem)
                )
                if status is LpStatus.OPTIMAL and (unchanged or warm.unique_optimum()):
                    return warm.solution()
            logger.debug("Warm start rejected; solving from scratch")

        run = _SimplexRun(problem)
        status = run.phase_one()
        if status is LpStatus.OPTIMAL:
            status = run.phase_two()
        if status is not LpStatus.OPTIMAL:
            return _failed(problem, status, run.iterations)
        return run.solution()


class HighsSolver:
    """Adapter for ``scipy.optimize.linprog(method="highs")``.

    The active set is re-derived from the returned point under the same
    tolerances as the bundled solver. Hints are ignored and no basis is
    reported.
    """

    def solve(self, problem: LpProblem, hint: Optional[LpSolution] = None) -> LpSolution:
        a = problem.matrix()
        b = problem.rhs()
        ub_rows = [i for i, row in enumerate(problem.rows) if row.relation is not Relation.EQ]
        eq_rows = [i for i, row in enumerate(problem.rows) if row.relation is Relation.EQ]
        sign = np.array(
            [-1.0 if problem.rows[i].relation is Relation.GE else 1.0 for i in ub_rows]
        )
        result = linprog(
            problem.c,
            A_ub=a[ub_rows] * sign[:, None] if ub_rows else None,
            b_ub=b[ub_rows] * sign if ub_rows else None,
            A_eq=a[eq_rows] if eq_rows else None,
            b_eq=b[eq_rows] if eq_rows else None,
            bounds=[
                (None if math.isinf(lo) else lo, None if math.isinf(hi) else hi)
                for lo, hi in zip(problem.lower, problem.upper)
            ],
            method="highs",
        )
        if result.status == 2:
            return _failed(problem, LpStatus.INFEASIBLE)
        if result.status == 3:
            return _failed(problem, LpStatus.UNBOUNDED)
        if result.status != 0:
            return _failed(problem, LpStatus.FAILED)

        duals = np.zeros(problem.m)
        if ub_rows:
            duals[ub_rows] = result.ineqlin.marginals * sign
        if eq_rows:
            duals[eq_rows] = result.eqlin.marginals
        x = np.asarray(result.x, dtype=float)
        active_rows, active_bounds = _active_sets(problem, x)
        return LpSolution(
            status=LpStatus.OPTIMAL,
            x=x,
            objective=float(problem.c @ x),
            active_rows=active_rows,
            active_bounds=active_bounds,
            duals=duals,
            reduced_costs=problem.c - a.T @ duals,
        )


_DEFAULT_SOLVER = SimplexSolver()


def solve_lp(problem: LpProblem, solver: Optional[LpSolver] = None) -> LpSolution:
    """Solve ``problem`` from scratch."""
    return (solver or _DEFAULT_SOLVER).solve(problem)


def solve_lp_warm(
    problem: LpProblem, hint: LpSolution, solver: Optional[LpSolver] = None
) -> LpSolution:
    """Solve ``problem`` starting from the basis of ``hint``.

    The hint only affects speed; the answer equals :func:`solve_lp`.
    """
    return (solver or _DEFAULT_SOLVER).solve(problem, hint=hint)


def _fixed(value: float) -> str:
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return f"{value:+.12f}"


def dump_problem(problem: LpProblem) -> str:
    """Render ``problem`` as fixed-point text, one row per line.

    Meant for diffing against external solvers while debugging.
    """
    lines = [f"# lp columns={problem.n} rows={problem.m}"]
    lines.append(
        "min "
        + " ".join(f"{_fixed(v)}*{problem.column_ids[j]}" for j, v in enumerate(problem.c) if v != 0)
    )
    for row in problem.rows:
        terms = " ".join(f"{_fixed(v)}*{problem.column_ids[col]}" for col, v in row.coeffs)
        lines.append(f"{row.id}: {terms} {row.relation.value} {_fixed(row.rhs)}")
    for j, column in enumerate(problem.column_ids):
        lines.append(f"bound {column}: {_fixed(problem.lower[j])} .. {_fixed(problem.upper[j])}")
    return "\n".join(lines) + "\n"


__all__ = [
    "FEAS_TOL",
    "OPT_TOL",
    "SLACK_TOL",
    "Relation",
    "LpStatus",
    "LpRow",
    "LpProblem",
    "LpSolution",
    "LpSolver",
    "SimplexSolver",
    "HighsSolver",
    "solve_lp",
    "solve_lp_warm",
    "dump_problem",
    "problem_digest",
]
