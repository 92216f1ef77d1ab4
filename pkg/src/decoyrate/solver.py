"""Solvers for estimation programs.

Four layers:

* ``solve_lp`` — dense LP solve (HiGHS via scipy) for programs with linear and
  box constraints only;
* ``slp_candidate`` — nonlinear candidate search by successive linear
  programming: tangent linearization of the CS bands at the current iterate,
  trust-region LP steps with accept/shrink logic, then a fixed-point polish and
  a band-projection feasibility restoration;
* ``certify`` — replaces every CS band by its tangent outer relaxation at given
  reference points and solves the LP; because the relaxation only enlarges the
  feasible set, the optimum is a valid bound regardless of where the reference
  points came from;
* ``grid_oracle`` — exhaustive grid scan for independent verification on toy
  programs (runtime O((1/step)^n_vars)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import linprog

from .cs_band import DEFAULT_INTERIOR_CLAMP, band, tangent_relaxation
from .programs import EstimationProgram, LinearConstraint

LpStatus = Literal["optimal", "infeasible", "unbounded", "numerical-failure"]

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "small_matrix_value": 1e-12,
}

_SCIPY_STATUS: dict[int, LpStatus] = {
    0: "optimal",
    2: "infeasible",
    3: "unbounded",
}


class TooManyVariables(ValueError):
    """grid_oracle is restricted to tiny programs."""


class NoFeasibleCandidate(RuntimeError):
    """The candidate search could not produce a point within the residual target."""


class CertificationError(RuntimeError):
    """The tangent-relaxed LP was infeasible: the true feasible point always
    satisfies the relaxation, so this indicates a construction bug."""


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    objective: float
    x: np.ndarray | None
    max_violation: float


@dataclass(frozen=True)
class CandidateSolution:
    """Reference points from the nonlinear stage."""

    x: np.ndarray
    objective: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class CertifiedBound:
    """A provably valid bound plus the optimality certificate against the candidate."""

    bound: float
    certificate: Literal["optimal", "valid-bound"]
    gap: float
    reference_objective: float


@dataclass(frozen=True)
class SlpOptions:
    initial_point: np.ndarray | None = None
    initial_radius: float = 0.1
    shrink: float = 0.5
    expand: float = 2.0
    max_radius: float = 0.5
    max_iterations: int = 200
    step_tol: float = 1e-10
    objective_tol: float = 1e-12
    residual_target: float = 1e-7
    polish_iterations: int = 60
    interior_clamp: float = DEFAULT_INTERIOR_CLAMP


def _assemble_rows(
    linear: Sequence[LinearConstraint], n_vars: int
) -> tuple[np.ndarray, np.ndarray]:
    """Normalise constraints to A x <= b form (>= rows are negated)."""
    if not linear:
        return np.zeros((0, n_vars)), np.zeros(0)
    a = np.empty((len(linear), n_vars))
    b = np.empty(len(linear))
    for i, row in enumerate(linear):
        if row.relation == "<=":
            a[i] = row.coeffs
            b[i] = row.rhs
        else:
            a[i] = -row.coeffs
            b[i] = -row.rhs
    return a, b


def _run_lp(
    objective: np.ndarray,
    sense: str,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
) -> tuple[LpStatus, np.ndarray | None, float]:
    c = objective if sense == "min" else -objective
    with warnings.catch_warnings():
        # small_matrix_value is a real HiGHS option scipy merely forwards.
        warnings.filterwarnings("ignore", message="Unrecognized options detected")
        res = linprog(
            c,
            A_ub=a_ub if a_ub.size else None,
            b_ub=b_ub if b_ub.size else None,
            bounds=np.column_stack([lb, ub]),
            method="highs",
            options=dict(_HIGHS_OPTIONS),
        )
        if res.status != 0:
            # presolve can mis-declare degenerate near-equality rows (tail
            # terms that round to zero) infeasible; retry without it
            res = linprog(
                c,
                A_ub=a_ub if a_ub.size else None,
                b_ub=b_ub if b_ub.size else None,
                bounds=np.column_stack([lb, ub]),
                method="highs",
                options=dict(_HIGHS_OPTIONS, presolve=False),
            )
    status = _SCIPY_STATUS.get(res.status, "numerical-failure")
    if status != "optimal" or res.x is None:
        return (status if status != "optimal" else "numerical-failure"), None, math.nan
    value = float(objective @ res.x)
    return "optimal", np.asarray(res.x, dtype=float), value


def linear_violation(program: EstimationProgram, x: np.ndarray) -> float:
    """Max violation of linear rows and boxes at x."""
    worst = max(0.0, float(np.max(-x, initial=0.0)), float(np.max(x - 1.0, initial=0.0)))
    for row in program.linear:
        lhs = float(row.coeffs @ x)
        gap = lhs - row.rhs if row.relation == "<=" else row.rhs - lhs
        worst = max(worst, gap)
    return worst


def cs_residual(program: EstimationProgram, x: np.ndarray) -> float:
    """Max violation of the true (non-linearised) CS band constraints at x."""
    worst = 0.0
    for c in program.cs:
        lo, hi = band(float(x[c.a]), c.tau)
        worst = max(worst, lo - float(x[c.b]), float(x[c.b]) - hi)
    return max(worst, 0.0)


def solve_lp(program: EstimationProgram) -> LpSolution:
    """Solve a program containing only linear and box constraints.

    Deterministic for identical inputs; an optimal solution respects every
    row to 1e-8 and the boxes to 1e-9.
    """
    if program.cs:
        raise ValueError("solve_lp handles linear programs only; use certify/slp_candidate")
    n = program.n_vars
    a_ub, b_ub = _assemble_rows(program.linear, n)
    status, x, value = _run_lp(
        program.objective, program.sense, a_ub, b_ub, np.zeros(n), np.ones(n)
    )
    if status != "optimal":
        return LpSolution(status, math.nan, None, math.inf)
    return LpSolution("optimal", value, x, linear_violation(program, x))


def _tangent_rows(
    program: EstimationProgram, refs: np.ndarray, eps: float
) -> list[LinearConstraint]:
    """Outer linearization of every CS band at the given reference vector."""
    rows: list[LinearConstraint] = []
    n = program.n_vars
    for c in program.cs:
        pair = tangent_relaxation(float(refs[c.a]), c.tau, eps)
        lo_row = np.zeros(n)
        lo_row[c.a] = pair.lower.slope
        lo_row[c.b] = -1.0
        rows.append(LinearConstraint(lo_row, "<=", -pair.lower.intercept))
        hi_row = np.zeros(n)
        hi_row[c.a] = -pair.upper.slope
        hi_row[c.b] = 1.0
        rows.append(LinearConstraint(hi_row, "<=", pair.upper.intercept))
    return rows


def _solve_relaxed(
    program: EstimationProgram,
    refs: np.ndarray,
    eps: float,
    lb: np.ndarray,
    ub: np.ndarray,
) -> tuple[LpStatus, np.ndarray | None, float]:
    rows = list(program.linear) + _tangent_rows(program, refs, eps)
    a_ub, b_ub = _assemble_rows(rows, program.n_vars)
    return _run_lp(program.objective, program.sense, a_ub, b_ub, lb, ub)


def certify(
    program: EstimationProgram,
    reference_points: np.ndarray,
    eps: float = DEFAULT_INTERIOR_CLAMP,
    optimality_tol: float = 1e-8,
) -> CertifiedBound:
    """Tangent-relax every CS band at the reference points and solve the LP.

    For min problems the result is a valid lower bound on the nonlinear
    optimum, for max problems a valid upper bound. The certificate is
    ``optimal`` when the bound agrees with the objective at the reference
    points to within optimality_tol * max(1, |objective|).
    """
    refs = np.asarray(reference_points, dtype=float)
    if refs.shape != (program.n_vars,):
        raise ValueError(f"reference vector has shape {refs.shape}, expected ({program.n_vars},)")
    n = program.n_vars
    status, x, value = _solve_relaxed(program, refs, eps, np.zeros(n), np.ones(n))
    if status == "infeasible":
        raise CertificationError("tangent-relaxed program is infeasible")
    if status != "optimal":
        raise CertificationError(f"tangent-relaxed solve failed with status {status}")
    ref_obj = float(program.objective @ refs)
    gap = abs(value - ref_obj)
    cert = "optimal" if gap <= optimality_tol * max(1.0, abs(ref_obj)) else "valid-bound"
    return CertifiedBound(bound=value, certificate=cert, gap=gap, reference_objective=ref_obj)


def restore_feasibility(
    program: EstimationProgram, x: np.ndarray, max_sweeps: int = 50
) -> np.ndarray:
    """Project the b-side of each violated band into [G_-(x_a), G_+(x_a)],
    sweeping until the CS residual stops improving."""
    out = np.clip(np.asarray(x, dtype=float).copy(), 0.0, 1.0)
    for _ in range(max_sweeps):
        moved = 0.0
        for c in program.cs:
            lo, hi = band(float(out[c.a]), c.tau)
            v = float(out[c.b])
            clipped = min(max(v, lo), hi)
            if clipped != v:
                moved = max(moved, abs(clipped - v))
                out[c.b] = clipped
        if moved <= 1e-15:
            break
    return out


def _signed(value: float, sense: str) -> float:
    return value if sense == "min" else -value


def slp_candidate(program: EstimationProgram, options: SlpOptions | None = None) -> CandidateSolution:
    """Successive-linear-programming candidate search.

    Phase one iterates tangent linearization at the current point plus an LP
    restricted to an infinity-norm trust region; a step is accepted when the
    true-CS residual decreases or the objective improves, otherwise the radius
    shrinks. Phase two polishes with a cutting-plane loop: tangent cuts from
    every polish iterate accumulate (each cut is a valid outer cut, so every
    pooled LP stays a relaxation), which damps the vertex flip-flopping that a
    memoryless fixed-point iteration exhibits at the band branch kinks.

    The returned reference point is the band-projected iterate - the start
    point included - that (a) meets the residual target and keeps the linear
    rows to 1e-9 and (b) certifies best when used as the linearization anchor.
    Including the start means the candidate never certifies worse than the
    reference points it was seeded with.
    """
    opts = options or SlpOptions()
    n = program.n_vars
    if opts.initial_point is not None:
        cur = np.clip(np.asarray(opts.initial_point, dtype=float), 0.0, 1.0)
        if cur.shape != (n,):
            raise ValueError(f"initial point has shape {cur.shape}, expected ({n},)")
    else:
        cur = np.full(n, 0.5)

    finalists: list[np.ndarray] = []
    finalist_objs: list[float] = []
    lp_calls = 0

    def consider(x: np.ndarray) -> None:
        restored = restore_feasibility(program, x)
        if cs_residual(program, restored) > opts.residual_target:
            return
        obj = _signed(float(program.objective @ restored), program.sense)
        if not finalists or np.any(restored != finalists[-1]):
            finalists.append(restored)
            finalist_objs.append(obj)

    consider(cur)
    f_cur = _signed(float(program.objective @ cur), program.sense)
    res_cur = cs_residual(program, cur)
    radius = opts.initial_radius
    any_lp_solved = False

    for _ in range(opts.max_iterations):
        lb = np.maximum(cur - radius, 0.0)
        ub = np.minimum(cur + radius, 1.0)
        status, x_new, _ = _solve_relaxed(program, cur, opts.interior_clamp, lb, ub)
        lp_calls += 1
        if status != "optimal":
            if radius < 1.0:
                radius = min(radius * 2.0, 1.0)
                continue
            break
        any_lp_solved = True
        step = float(np.max(np.abs(x_new - cur)))
        f_new = _signed(float(program.objective @ x_new), program.sense)
        res_new = cs_residual(program, x_new)
        if res_new < res_cur - 1e-15 or f_new < f_cur:
            change = abs(f_new - f_cur)
            cur, f_cur, res_cur = x_new, f_new, res_new
            radius = min(radius * opts.expand, opts.max_radius)
            if change < opts.objective_tol:
                break
        else:
            radius *= opts.shrink
            if radius < 1e-13:
                break
        if step < opts.step_tol:
            break
    consider(cur)

    # Cutting-plane polish with accumulated tangent cuts.
    pool: list[LinearConstraint] = []
    full_lb, full_ub = np.zeros(n), np.ones(n)
    prev_value = -math.inf
    for _ in range(opts.polish_iterations):
        pool.extend(_tangent_rows(program, cur, opts.interior_clamp))
        rows = list(program.linear) + pool
        a_ub, b_ub = _assemble_rows(rows, n)
        status, x_new, value = _run_lp(
            program.objective, program.sense, a_ub, b_ub, full_lb, full_ub
        )
        lp_calls += 1
        if status != "optimal":
            break
        any_lp_solved = True
        consider(x_new)
        signed_value = _signed(value, program.sense)
        step = float(np.max(np.abs(x_new - cur)))
        cur = x_new
        if step < 1e-12 or abs(signed_value - prev_value) < opts.objective_tol:
            break
        prev_value = signed_value
    consider(cur)

    if not any_lp_solved:
        raise NoFeasibleCandidate("every LP relaxation was infeasible")
    if not finalists:
        raise NoFeasibleCandidate(
            "no iterate reached the residual target after restoration"
        )

    # Pick the finalist that certifies best as a linearization anchor. The
    # seed (index 0) is always tried, so the candidate never certifies worse
    # than the reference points it was seeded with. Anchors whose own
    # objective is at least their certification ("consistent": a feasible
    # point can never undercut a valid bound) are preferred, and near-equal
    # certifications are tie-broken towards the best objective so optimality
    # certificates survive.
    order = sorted(range(len(finalists)), key=lambda i: finalist_objs[i])
    shortlist: list[int] = []
    for i in [0, len(finalists) - 1] + order[:2]:
        if i not in shortlist:
            shortlist.append(i)
    best_i = None
    best_rank, best_cert = 2, -math.inf
    for i in shortlist:
        status, _, value = _solve_relaxed(
            program, finalists[i], opts.interior_clamp, full_lb, full_ub
        )
        lp_calls += 1
        if status != "optimal":
            continue
        cert = _signed(value, program.sense)  # larger = tighter bound either sense
        rank = 0 if finalist_objs[i] >= cert - 1e-9 else 1
        better = cert > best_cert + 1e-12
        tied = cert > best_cert - 1e-12
        take = (
            best_i is None
            or better
            or (tied and rank < best_rank)
            or (tied and rank == best_rank and finalist_objs[i] < finalist_objs[best_i])
        )
        if take:
            best_rank, best_cert, best_i = rank, max(cert, best_cert), i
    best_x = finalists[best_i if best_i is not None else int(order[0])]

    return CandidateSolution(
        x=best_x,
        objective=float(program.objective @ best_x),
        residual=cs_residual(program, best_x),
        iterations=lp_calls,
    )


def _band_bounds_vec(y: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    yc = np.clip(y, 0.0, 1.0)
    root = 2.0 * np.sqrt(max(tau * (1.0 - tau), 0.0) * np.maximum(yc * (1.0 - yc), 0.0))
    base = yc + (1.0 - tau) * (1.0 - 2.0 * yc)
    lo = np.where(yc > 1.0 - tau, base - root, 0.0)
    hi = np.where(yc < tau, base + root, 1.0)
    return lo, hi


def grid_oracle(
    program: EstimationProgram, grid_step: float, block: int = 1 << 20
) -> float | None:
    """Exhaustive scan of the [0,1]^n grid at the given step.

    Keeps points whose linear rows and true CS bands are satisfied within
    grid_step and returns the best objective among them, or None when no grid
    point qualifies. Runtime is O((1/grid_step)^n_vars); refuses programs with
    more than 6 variables.
    """
    n = program.n_vars
    if n > 6:
        raise TooManyVariables(f"grid oracle supports <= 6 variables, got {n}")
    m = int(round(1.0 / grid_step)) + 1
    axis = np.linspace(0.0, 1.0, m)
    a_ub, b_ub = _assemble_rows(program.linear, n)
    best = math.inf
    sign = 1.0 if program.sense == "min" else -1.0
    tol = grid_step

    # trailing-axes coordinates are a fixed tile pattern reused per block of
    # leading-axis values; this keeps the scan exhaustive but replaces index
    # arithmetic with copies
    inner = m ** (n - 1)
    if n > 1:
        trail = np.stack(
            [g.ravel() for g in np.meshgrid(*([axis] * (n - 1)), indexing="ij")],
            axis=1,
        )
    else:
        trail = np.zeros((1, 0))
    lead_chunk = max(1, block // inner)
    coords_buf = np.empty((lead_chunk * inner, n))
    for start in range(0, m, lead_chunk):
        lead = axis[start : start + lead_chunk]
        size = lead.size * inner
        coords = coords_buf[:size]
        coords[:, 0] = np.repeat(lead, inner)
        if n > 1:
            coords[:, 1:] = np.tile(trail, (lead.size, 1))
        mask = np.ones(size, dtype=bool)
        for i in range(a_ub.shape[0]):
            mask &= coords @ a_ub[i] <= b_ub[i] + tol
        coords = coords[mask]
        for c in program.cs:
            if coords.shape[0] == 0:
                break
            lo, hi = _band_bounds_vec(coords[:, c.a], c.tau)
            vb = coords[:, c.b]
            coords = coords[(lo - vb <= tol) & (vb - hi <= tol)]
        if coords.shape[0]:
            vals = sign * (coords @ program.objective)
            best = min(best, float(vals.min()))
    if math.isinf(best):
        return None
    return sign * best


def dump_program(program: EstimationProgram) -> str:
    """Plain-text interchange dump (objective, rows, band triples) for external checks."""
    lines = [f"sense {program.sense}", f"vars {program.n_vars}"]
    for i, v in enumerate(program.variables):
        lines.append(f"var {i} {v.name()}")
    obj_terms = " ".join(
        f"{i}:{c!r}" for i, c in enumerate(program.objective) if c != 0.0
    )
    lines.append(f"objective {obj_terms}")
    for row in program.linear:
        terms = " ".join(f"{i}:{c!r}" for i, c in enumerate(row.coeffs) if c != 0.0)
        lines.append(f"row {row.label or '-'} {row.relation} {row.rhs!r} : {terms}")
    for c in program.cs:
        lines.append(f"band {c.a} {c.b} {c.tau!r}")
    return "\n".join(lines) + "\n"
