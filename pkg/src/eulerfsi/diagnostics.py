"""Energy budget, conservation checks, boundedness monitors and error norms.

Energies are evaluated at the new time level; dissipation, relaxation and
source terms at the converged half step, so that

    (E^{n+1} - E^n) / dt + D_visc + D_mob + R_relax - sources

is a midpoint-rule energy balance residual. L-infinity type norms are
maxima over quadrature points.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .fem import FEFunction, get_quadrature
from .materials import MaterialParams, W
from .vtk import atomic_write_text

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ORDER = 6  # quadrature order of every diagnostic integral


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    E_kin: float
    E_elastic: float
    E_mix: float
    E_total: float
    D_visc: float
    D_mob: float
    R_relax: float
    source_relax: float
    work_body: float
    mass_phi: float
    min_phi: float  # over the nodal values
    max_phi: float
    min_phi_quad: float  # over quadrature points (sees the polynomial overshoot between nodes)
    max_phi_quad: float
    min_eig_B: float
    norm_grad_v_inf: float
    norm_Dtphi_inf: float
    norm_phi_W14: float
    subiter_count: int
    linear_residual_max: float
    linear_iterations: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _integral(values, quad) -> float:
    return float(np.sum(values * quad.dx))


def kinetic_energy(v: FEFunction, phi: FEFunction, params: MaterialParams) -> float:
    quad = get_quadrature(v.space.mesh, ORDER)
    vq = v.at_quadrature(quad)
    return 0.5 * _integral(params.rho(phi.at_quadrature(quad)) * np.sum(vq**2, axis=-1), quad)


def elastic_energy(B: FEFunction, phi: FEFunction, params: MaterialParams) -> float:
    quad = get_quadrature(B.space.mesh, ORDER)
    b = B.at_quadrature(quad)
    return 0.5 * _integral(params.G(phi.at_quadrature(quad)) * (b[..., 0] + b[..., 2]), quad)


def mixing_energy(phi: FEFunction, params: MaterialParams) -> float:
    quad = get_quadrature(phi.space.mesh, ORDER)
    p = phi.at_quadrature(quad)
    g = phi.grad_at_quadrature(quad)
    g2 = np.sum(g**2, axis=-1)
    return _integral(params.gamma / params.epsilon * W(p) + 0.5 * params.gamma * params.epsilon * g2, quad)


def viscous_dissipation(v: FEFunction, phi: FEFunction, params: MaterialParams) -> float:
    quad = get_quadrature(v.space.mesh, ORDER)
    L = v.grad_at_quadrature(quad)
    D = 0.5 * (L + np.swapaxes(L, -1, -2))
    return _integral(2.0 * params.mu(phi.at_quadrature(quad)) * np.sum(D**2, axis=(-1, -2)), quad)


def mobility_dissipation(m: FEFunction, params: MaterialParams) -> float:
    quad = get_quadrature(m.space.mesh, ORDER)
    return _integral(params.mobility * np.sum(m.grad_at_quadrature(quad) ** 2, axis=-1), quad)


def relaxation_terms(B: FEFunction, phi: FEFunction, params: MaterialParams):
    """``(1/2) int alpha tr B`` and the source ``(1/2) int alpha tr I``."""
    quad = get_quadrature(B.space.mesh, ORDER)
    b = B.at_quadrature(quad)
    a = params.alpha(phi.at_quadrature(quad))
    return 0.5 * _integral(a * (b[..., 0] + b[..., 2]), quad), _integral(a, quad)


def body_force_work(v: FEFunction, phi: FEFunction, params: MaterialParams) -> float:
    f = np.asarray(params.body_force)
    if not np.any(f):
        return 0.0
    quad = get_quadrature(v.space.mesh, ORDER)
    return _integral(params.rho(phi.at_quadrature(quad)) * (v.at_quadrature(quad) @ f), quad)


def grad_v_inf(v: FEFunction) -> float:
    quad = get_quadrature(v.space.mesh, ORDER)
    L = v.grad_at_quadrature(quad)
    return float(np.sqrt(np.sum(L**2, axis=(-1, -2))).max())


def phi_W14(phi: FEFunction) -> float:
    """``||phi||^4_{W^{1,4}} = int phi^4 + int |grad phi|^4``."""
    quad = get_quadrature(phi.space.mesh, ORDER)
    p = phi.at_quadrature(quad)
    g2 = np.sum(phi.grad_at_quadrature(quad) ** 2, axis=-1)
    return _integral(p**4 + g2**2, quad)


def material_derivative_phi_inf(phi_new: FEFunction, phi_old: FEFunction, v_half: FEFunction,
                                phi_half: FEFunction, dt: float) -> float:
    """max |(phi^{n+1} - phi^n)/dt + v^{n+1/2} . grad phi^{n+1/2}| over quadrature points."""
    quad = get_quadrature(phi_new.space.mesh, ORDER)
    rate = (phi_new.at_quadrature(quad) - phi_old.at_quadrature(quad)) / dt
    adv = np.sum(v_half.at_quadrature(quad) * phi_half.grad_at_quadrature(quad), axis=-1)
    return float(np.abs(rate + adv).max())


def record(state, params: MaterialParams) -> DiagnosticsRecord:
    """Diagnostics of ``state`` (the half-step terms come from ``state.half`` when present)."""
    from .b_solver import min_eigenvalue

    half = state.half or {}
    v, B, phi = state.v, state.B, state.phi
    vh, Bh, phih, mh = (half.get("v", v), half.get("B", B), half.get("phi", phi), half.get("m", state.m))
    quad = get_quadrature(phi.space.mesh, ORDER)
    pq = phi.at_quadrature(quad)
    E_kin = kinetic_energy(v, phi, params)
    E_el = elastic_energy(B, phi, params)
    E_mix = mixing_energy(phi, params)
    R_relax, alpha_int = relaxation_terms(Bh, phih, params)
    if "phi_n" in half:
        dtphi = material_derivative_phi_inf(phi, half["phi_n"], vh, phih, state.dt)
    else:
        dtphi = math.nan
    reports = half.get("reports", [])
    return DiagnosticsRecord(
        step=state.step_index,
        t=state.t,
        E_kin=E_kin,
        E_elastic=E_el,
        E_mix=E_mix,
        E_total=E_kin + E_el + E_mix,
        D_visc=viscous_dissipation(vh, phih, params),
        D_mob=mobility_dissipation(mh, params),
        R_relax=R_relax,
        source_relax=alpha_int,  # (1/2) int alpha tr I with tr I = 2
        work_body=body_force_work(vh, phih, params),
        mass_phi=_integral(pq, quad),
        min_phi=float(phi.coeffs.min()),
        max_phi=float(phi.coeffs.max()),
        min_phi_quad=float(pq.min()),
        max_phi_quad=float(pq.max()),
        min_eig_B=min_eigenvalue(B),
        norm_grad_v_inf=grad_v_inf(v),
        norm_Dtphi_inf=dtphi,
        norm_phi_W14=phi_W14(phi),
        subiter_count=int(half.get("iterations", 0)),
        linear_residual_max=float(max((r.residual_norm for r in reports), default=0.0)),
        linear_iterations=int(sum(r.iterations for r in reports)),
    )


def energy_balance_residual(rec_n: DiagnosticsRecord, rec_np1: DiagnosticsRecord, dt: float) -> float:
    """Midpoint energy balance residual between two consecutive records."""
    rate = (rec_np1.E_total - rec_n.E_total) / dt
    return rate + rec_np1.D_visc + rec_np1.D_mob + rec_np1.R_relax - rec_np1.source_relax - rec_np1.work_body


@dataclass
class ErrorSummary:
    e_v: float
    e_B: float
    e_phi: float
    absolute_v: bool = False
    absolute_B: bool = False
    absolute_phi: bool = False

    def as_tuple(self):
        return (self.e_v, self.e_B, self.e_phi)


def _sq(values, value_kind):
    if value_kind == "symtensor2":  # Frobenius norm: the off-diagonal entry counts twice
        return values[..., 0] ** 2 + 2.0 * values[..., 1] ** 2 + values[..., 2] ** 2
    if values.ndim == 3:
        return np.sum(values**2, axis=-1)
    return values**2


def _l2_error(f: FEFunction, ref, order: int = ORDER):
    """``(||f - ref||, ||ref||)`` in L2."""
    quad = get_quadrature(f.space.mesh, order)
    r = ref(quad.points[..., 0], quad.points[..., 1])
    r = np.stack(r, axis=-1) if isinstance(r, tuple) else np.broadcast_to(r, quad.dx.shape)
    kind = f.space.value_kind
    err = math.sqrt(_integral(_sq(f.at_quadrature(quad) - r, kind), quad))
    return err, math.sqrt(_integral(_sq(r, kind), quad))


def relative_errors(state, mms, T: float | None = None) -> ErrorSummary:
    """Relative L2 errors of v, B, phi against the reference fields at ``state.t``.

    When a reference norm is below 1e-14 the absolute error is returned and
    the matching ``absolute_*`` flag is set.
    """
    t = state.t
    if T is not None and abs(t - T) > 0.5 * state.dt:
        raise ValueError(f"state time {t} does not match the final time {T}")
    out = {}
    for key, f, ref in (
        ("v", state.v, lambda x, y: mms.v(x, y, t)),
        ("B", state.B, lambda x, y: mms.B(x, y, t)),
        ("phi", state.phi, lambda x, y: mms.phi(x, y, t)),
    ):
        err, nrm = _l2_error(f, ref)
        if nrm < 1e-14:
            out[key] = (err, True)
        else:
            out[key] = (err / nrm, False)
    return ErrorSummary(out["v"][0], out["B"][0], out["phi"][0], out["v"][1], out["B"][1], out["phi"][1])


def convergence_rates(errors) -> list[float]:
    """``log2(e_i / e_{i+1})``; NaN (with a warning) where an error is not positive."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("at least two error values are needed for a rate")
    rates = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a > 0 and b > 0:
            rates.append(math.log2(a / b))
        else:
            log.warning("undefined convergence rate for errors (%g, %g)", a, b)
            rates.append(math.nan)
    return rates


def records_to_csv(records) -> str:
    buf = io.StringIO()
    buf.write(f"# eulerfsi diagnostics schema {SCHEMA_VERSION}\n")
    w = csv.DictWriter(buf, fieldnames=DiagnosticsRecord.columns(), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in asdict(r).items()})
    return buf.getvalue()


def write_csv(path, records) -> None:
    atomic_write_text(path, records_to_csv(records))
