"""Partitioned midpoint time stepping with fixed-point subiteration.

One step from ``t^n`` to ``t^{n+1}``:

1. Guess the half-step fields by linear extrapolation from levels n, n-1.
2. Repeat Cahn-Hilliard -> tensor transport -> Navier-Stokes half-step
   solves, each consuming the freshest iterates, until the change of every
   field falls below the tolerance.
3. Extrapolate the converged half step to ``t^{n+1}``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .b_solver import BSubproblemInput, check_stabilization, mms_forcing_B, solve_b_halfstep
from .ch_solver import CHSubproblemInput, mms_forcing_phi, solve_ch_halfstep
from .fem import FEFunction, cached_form
from .linsolve import FactorCache, LinearSolveReport, SolverOptions
from .materials import MaterialParams
from .ns_solver import NSSubproblemInput, mms_forcing_v, solve_ns_halfstep
from .state import FSISpaces, SimState

log = logging.getLogger(__name__)


class SubiterationError(RuntimeError):
    """The fixed-point subiteration failed; ``history`` holds the per-iteration changes."""

    def __init__(self, message: str, step_index: int, history: list, subproblem: str = "subiteration"):
        self.step_index = step_index
        self.history = history
        self.subproblem = subproblem
        super().__init__(f"[{subproblem}] step {step_index}: {message}")


@dataclass
class FixedPointConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_iter: int = 50
    relaxation: float = 1.0  # 1.0 means plain successive substitution
    divergence_limit: float = 1e8  # any coefficient above this aborts the step
    acceleration: str = "none"  # "none" or "anderson"
    anderson_depth: int = 5

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be non-negative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError("relaxation must lie in (0, 1]")
        if self.acceleration not in ("none", "anderson"):
            raise ValueError(f"unknown acceleration {self.acceleration!r}")
        if self.anderson_depth < 1:
            raise ValueError("anderson_depth must be at least 1")


@dataclass
class Problem:
    """Everything a step needs besides the state."""

    spaces: FSISpaces
    params: MaterialParams
    mms: object = None
    phi_bc: str | float = "natural"
    linear: SolverOptions = field(default_factory=SolverOptions)
    allow_unstabilized: bool = False
    freeze_phase: bool = False  # skip the Cahn-Hilliard solve and keep (phi, m) at their level-n values
    caches: dict = field(default_factory=lambda: {k: FactorCache() for k in ("ch", "b", "ns")})

    def __post_init__(self):
        if not self.allow_unstabilized:
            check_stabilization(self.params)


def extrapolate_guess(state: SimState):
    """``(3/2) x^n - (1/2) x^{n-1}`` for v, phi and B."""

    def ex(cur: FEFunction, prev: FEFunction) -> FEFunction:
        return cur.with_coeffs(1.5 * cur.coeffs - 0.5 * prev.coeffs)

    return ex(state.v, state.v_prev), ex(state.phi, state.phi_prev), ex(state.B, state.B_prev)


def l2_norm(f: FEFunction) -> float:
    M = cached_form(f.space.scalar_space(), "mass")
    n = f.space.n_scalar
    total = 0.0
    for c in range(f.space.ncomp):
        x = f.coeffs[c * n : (c + 1) * n]
        total += float(x @ (M @ x))
    return float(np.sqrt(max(total, 0.0)))


@dataclass
class HalfStep:
    v: FEFunction
    p: FEFunction
    B: FEFunction
    phi: FEFunction
    m: FEFunction
    iterations: int
    history: list
    solver_reports: list


class Anderson:
    """Anderson mixing for the fixed-point map ``x -> g(x)``.

    ``x`` stacks the lagged inputs (velocity and phase field); each block is
    weighted by the inverse of its norm so that the least-squares problem is
    scale-free. ``step(x, gx)`` returns the next input.
    """

    def __init__(self, depth: int, weights: np.ndarray):
        self.depth = depth
        self.w = weights
        self.dF: list[np.ndarray] = []
        self.dG: list[np.ndarray] = []
        self.last = None

    def step(self, x: np.ndarray, gx: np.ndarray) -> np.ndarray:
        f = gx - x
        if self.last is not None:
            f0, g0 = self.last
            self.dF.append(f - f0)
            self.dG.append(gx - g0)
            if len(self.dF) > self.depth:
                self.dF.pop(0)
                self.dG.pop(0)
        self.last = (f, gx)
        if not self.dF:
            return gx
        F = np.column_stack(self.dF) * self.w[:, None]
        coef, *_ = np.linalg.lstsq(F, f * self.w, rcond=1e-10)
        return gx - np.column_stack(self.dG) @ coef


def _block_weights(*fields: FEFunction) -> np.ndarray:
    parts = []
    for f in fields:
        nrm = np.linalg.norm(f.coeffs)
        parts.append(np.full(f.coeffs.size, 1.0 / nrm if nrm > 0 else 1.0))
    return np.concatenate(parts)


def _forcings(problem: Problem, t_half: float):
    mms = problem.mms
    if mms is None:
        return None, None, None, None
    sp_ = problem.spaces
    return (
        mms_forcing_phi(sp_.S, t_half, mms),
        mms_forcing_B(sp_.T, t_half, mms),
        mms_forcing_v(sp_.V, t_half, mms),
        lambda x, y: mms.v(x, y, t_half),
    )


def subiterate(state: SimState, problem: Problem, fp: FixedPointConfig | None = None) -> HalfStep:
    """Fixed-point loop over the three half-step solves."""
    fp = fp or FixedPointConfig()
    dt = state.dt
    t_half = (state.step_index + 0.5) * dt
    f_phi, f_B, f_v, v_bc = _forcings(problem, t_half)
    v_g, phi_g, B_g = extrapolate_guess(state)
    p, m = state.p, state.m
    history = []
    reports = []
    prm = problem.params
    accel = Anderson(fp.anderson_depth, None) if fp.acceleration == "anderson" else None
    for k in range(1, fp.max_iter + 1):
        if problem.freeze_phase:
            phi, m, r1 = state.phi, state.m, LinearSolveReport(0.0, 0, "frozen")
        else:
            phi, m, r1 = solve_ch_halfstep(
                CHSubproblemInput(state.phi, phi_g, v_g, dt, prm, problem.phi_bc, f_phi),
                problem.linear,
                problem.caches["ch"],
            )
        B, r2 = solve_b_halfstep(
            BSubproblemInput(state.B, v_g, phi, dt, prm, f_B, problem.allow_unstabilized), problem.linear, problem.caches["b"]
        )
        v, p, r3 = solve_ns_halfstep(
            NSSubproblemInput(state.v, state.phi, phi, m, B, v_g, problem.spaces.Q, dt, prm, f_v, v_bc),
            problem.linear,
            problem.caches["ns"],
        )
        reports = [r1, r2, r3]
        v_out, phi_out, B_out = v, phi, B  # raw solves, consistent with p and m
        if fp.relaxation < 1.0:
            w = fp.relaxation
            phi = phi.with_coeffs(w * phi.coeffs + (1 - w) * phi_g.coeffs)
            B = B.with_coeffs(w * B.coeffs + (1 - w) * B_g.coeffs)
            v = v.with_coeffs(w * v.coeffs + (1 - w) * v_g.coeffs)
        for name, f in (("phi", phi), ("B", B), ("v", v)):
            if not np.all(np.isfinite(f.coeffs)) or np.max(np.abs(f.coeffs)) > fp.divergence_limit:
                raise SubiterationError(f"{name} diverged at iteration {k}", state.step_index, history, "divergence")
        changes = {}
        converged = True
        for name, new, old in (("v", v, v_g), ("phi", phi, phi_g), ("B", B, B_g)):
            d = l2_norm(new.with_coeffs(new.coeffs - old.coeffs))
            size = l2_norm(new)
            changes[name] = d / max(size, 1e-14)
            converged &= d <= fp.rel_tol * size + fp.abs_tol
        history.append(changes)
        log.debug("step %d iteration %d: %s", state.step_index, k, changes)
        if converged:
            return HalfStep(v_out, p, B_out, phi_out, m, k, history, reports)
        if accel is not None:
            nv = v.coeffs.size
            if accel.w is None:
                accel.w = _block_weights(v, phi)
            x = accel.step(np.concatenate([v_g.coeffs, phi_g.coeffs]), np.concatenate([v.coeffs, phi.coeffs]))
            v, phi = v.with_coeffs(x[:nv]), phi.with_coeffs(x[nv:])
        v_g, phi_g, B_g = v, phi, B
    raise SubiterationError(
        f"no convergence in {fp.max_iter} iterations (last changes {history[-1]})", state.step_index, history
    )


def extrapolate_to_new_level(state: SimState, half: HalfStep, params: MaterialParams):
    """Step 2: phi first, then v from the momentum extrapolation, then B."""
    phi_new = half.phi.with_coeffs(2.0 * half.phi.coeffs - state.phi.coeffs)
    V = state.v.space
    n = V.n_scalar
    # phi and each velocity component share the P2 dof layout
    rho_half = params.rho(half.phi.coeffs)
    rho_n = params.rho(state.phi.coeffs)
    rho_new = params.rho(phi_new.coeffs)
    v_new = np.empty_like(state.v.coeffs)
    for c in range(2):
        s = slice(c * n, (c + 1) * n)
        v_new[s] = (2.0 * rho_half * half.v.coeffs[s] - rho_n * state.v.coeffs[s]) / rho_new
    B_new = half.B.with_coeffs(2.0 * half.B.coeffs - state.B.coeffs)
    return state.v.with_coeffs(v_new), B_new, phi_new


def advance(state: SimState, problem: Problem, fp: FixedPointConfig | None = None, record: bool = True) -> SimState:
    """Advance by one time step; returns a new state (the input is not modified)."""
    if state.phi.space is not problem.spaces.S:
        raise ValueError("state and problem use different spaces")
    half = subiterate(state, problem, fp)
    v_new, B_new, phi_new = extrapolate_to_new_level(state, half, problem.params)
    n1 = state.step_index + 1
    new = SimState(
        t=n1 * state.dt,
        step_index=n1,
        dt=state.dt,
        v=v_new,
        B=B_new,
        phi=phi_new,
        v_prev=state.v,
        B_prev=state.B,
        phi_prev=state.phi,
        p=half.p,
        m=half.m,
        half={"v": half.v, "phi": half.phi, "B": half.B, "p": half.p, "m": half.m, "phi_n": state.phi,
              "iterations": half.iterations, "reports": half.solver_reports, "history": half.history},
        history=state.history,
    )
    if record:
        new.history.append(diagnostics.record(new, problem.params))
    return new


def run(state: SimState, problem: Problem, n_steps: int, fp: FixedPointConfig | None = None, callback=None) -> SimState:
    """Advance ``n_steps`` steps, calling ``callback(state)`` after each one."""
    for _ in range(n_steps):
        state = advance(state, problem, fp)
        if callback is not None:
            callback(state)
    return state
