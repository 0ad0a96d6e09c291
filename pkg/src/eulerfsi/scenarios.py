"""Scenario builders: manufactured solutions and the falling elastic ball."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import FEFunction, constant, integrate, interpolate
from .materials import MaterialParams, W_prime, W_second
from .mesh import Mesh
from .state import FSISpaces, make_spaces

PI = np.pi
B_MATRIX = np.array([[1.0, 6.0], [6.0, 5.0]])
B_SCALE = 1e-5
V_SCALE = 0.2
MMS_FINAL_TIME = 0.8


class ScenarioError(ValueError):
    pass


def mms_params(case: int, epsilon: float = 0.1) -> MaterialParams:
    """Parameter sets of the manufactured-solution study."""
    base = dict(rho_f=1.0, rho_s=1.0, mu_f=1.0, g_s=1.0, alpha_f=1.0, gamma=1e-4, mobility=1.0,
                epsilon=epsilon, body_force=(0.0, 0.0))
    if case == 1:
        return MaterialParams(mu_s=0.5, g_f=0.5, delta_stab=0.0, **base)
    if case == 2:
        return MaterialParams(mu_s=0.0, g_f=0.0, delta_stab=1e-3, **base)
    raise ScenarioError(f"unknown manufactured-solution case {case!r}; expected 1 or 2")


@dataclass(frozen=True)
class MMSCase:
    """Closed-form reference fields with analytic derivatives.

    Every reference field is proportional to ``sin(pi t)``; the pressure is
    constant (zero). Forcings are strong-form residuals of the model
    equations evaluated at the reference fields, with ``params`` supplying
    the coefficients (and ``epsilon``).
    """

    case: int
    params: MaterialParams
    final_time: float = MMS_FINAL_TIME

    # --- phase field and chemical potential -----------------------------
    @staticmethod
    def phi(x, y, t):
        return np.sin(PI * t) * np.cos(PI * x) * np.cos(PI * y)

    @staticmethod
    def phi_t(x, y, t):
        return PI * np.cos(PI * t) * np.cos(PI * x) * np.cos(PI * y)

    @staticmethod
    def grad_phi(x, y, t):
        s = np.sin(PI * t)
        return (-PI * s * np.sin(PI * x) * np.cos(PI * y), -PI * s * np.cos(PI * x) * np.sin(PI * y))

    @staticmethod
    def hess_phi(x, y, t):
        s = np.sin(PI * t)
        p = s * np.cos(PI * x) * np.cos(PI * y)
        xy = PI**2 * s * np.sin(PI * x) * np.sin(PI * y)
        return (-PI**2 * p, xy, -PI**2 * p)

    def m(self, x, y, t):
        g, eps = self.params.gamma, self.params.epsilon
        p = self.phi(x, y, t)
        return g * (W_prime(p) / eps + 2.0 * PI**2 * eps * p)

    def grad_m(self, x, y, t):
        g, eps = self.params.gamma, self.params.epsilon
        p = self.phi(x, y, t)
        fac = g * (W_second(p) / eps + 2.0 * PI**2 * eps)
        gx, gy = self.grad_phi(x, y, t)
        return fac * gx, fac * gy

    def lap_m(self, x, y, t):
        g, eps = self.params.gamma, self.params.epsilon
        p = self.phi(x, y, t)
        gx, gy = self.grad_phi(x, y, t)
        lap = -2.0 * PI**2 * p
        lap_wp = 6.0 * p * (gx**2 + gy**2) + W_second(p) * lap
        return g * (lap_wp / eps - eps * 4.0 * PI**4 * p)

    # --- velocity --------------------------------------------------------
    @staticmethod
    def v(x, y, t):
        s = V_SCALE * np.sin(PI * t)
        return (s * np.sin(PI * x) * np.cos(PI * y), -s * np.cos(PI * x) * np.sin(PI * y))

    @staticmethod
    def v_t(x, y, t):
        s = V_SCALE * PI * np.cos(PI * t)
        return (s * np.sin(PI * x) * np.cos(PI * y), -s * np.cos(PI * x) * np.sin(PI * y))

    @staticmethod
    def grad_v(x, y, t):
        """``(L11, L12, L21, L22)`` with ``L_ij = d v_i / d x_j``."""
        s = V_SCALE * PI * np.sin(PI * t)
        cc = np.cos(PI * x) * np.cos(PI * y)
        ss = np.sin(PI * x) * np.sin(PI * y)
        return (s * cc, -s * ss, s * ss, -s * cc)

    def lap_v(self, x, y, t):
        vx, vy = self.v(x, y, t)
        return (-2.0 * PI**2 * vx, -2.0 * PI**2 * vy)

    @staticmethod
    def pressure(x, y, t):
        return np.zeros_like(np.asarray(x, dtype=float))

    # --- left Cauchy-Green tensor ---------------------------------------
    @staticmethod
    def _poly(x, y):
        X, Y = x + 10.0, y + 10.0
        return X**2 * Y**2, 2 * X * Y**2, 2 * X**2 * Y, 2 * Y**2 + 2 * X**2

    def B(self, x, y, t):
        """Components ``(xx, xy, yy)``."""
        P, _, _, _ = self._poly(x, y)
        a = B_SCALE * np.sin(PI * t) * P
        return (a * B_MATRIX[0, 0], a * B_MATRIX[0, 1], a * B_MATRIX[1, 1])

    # --- forcings ----------------------------------------------------------
    def forcing_phi(self, x, y, t):
        vx, vy = self.v(x, y, t)
        gx, gy = self.grad_phi(x, y, t)
        return self.phi_t(x, y, t) + vx * gx + vy * gy - self.params.mobility * self.lap_m(x, y, t)

    def forcing_B(self, x, y, t):
        """Residual of the stabilised tensor transport, components ``(xx, xy, yy)``."""
        prm = self.params
        s, ct = np.sin(PI * t), PI * np.cos(PI * t)
        P, Px, Py, lapP = self._poly(x, y)
        vx, vy = self.v(x, y, t)
        L11, L12, L21, L22 = self.grad_v(x, y, t)
        p = self.phi(x, y, t)
        G, alpha = prm.G(p), prm.alpha(p)
        K = B_MATRIX
        b = B_SCALE * s * P
        Bt = B_SCALE * ct * P
        adv = B_SCALE * s * (vx * Px + vy * Py)
        lapB = B_SCALE * s * lapP
        B11, B12, B22 = b * K[0, 0], b * K[0, 1], b * K[1, 1]
        S11 = 2.0 * (L11 * B11 + L12 * B12)
        S12 = (L11 + L22) * B12 + L21 * B11 + L12 * B22
        S22 = 2.0 * (L21 * B12 + L22 * B22)
        out = []
        for K_ij, Bij, Sij, Iij in ((K[0, 0], B11, S11, 1.0), (K[0, 1], B12, S12, 0.0), (K[1, 1], B22, S22, 1.0)):
            out.append(G * (Bt * K_ij + adv * K_ij - Sij) + alpha * (Bij - Iij) - prm.delta_stab * lapB * K_ij)
        return tuple(out)

    def forcing_v(self, x, y, t):
        """Residual of the momentum equation (the body-force density ``rho f``)."""
        prm = self.params
        p = self.phi(x, y, t)
        pt = self.phi_t(x, y, t)
        gx, gy = self.grad_phi(x, y, t)
        hxx, hxy, hyy = self.hess_phi(x, y, t)
        lap_phi = hxx + hyy
        vx, vy = self.v(x, y, t)
        vtx, vty = self.v_t(x, y, t)
        L11, L12, L21, L22 = self.grad_v(x, y, t)
        lvx, lvy = self.lap_v(x, y, t)
        rho, drho = prm.rho(p), prm.drho(p)
        mu, dmu = prm.mu(p), prm.dmu(p)
        G, dG = prm.G(p), prm.dG(p)
        mx, my = self.grad_m(x, y, t)

        # d_t(rho v) + (v . grad)(rho v)
        rho_rate = drho * (pt + vx * gx + vy * gy)
        mom_x = rho * (vtx + L11 * vx + L12 * vy) + rho_rate * vx
        mom_y = rho * (vty + L21 * vx + L22 * vy) + rho_rate * vy
        # mobility flux (rho_F - rho_S)/2 (M grad m . grad) v
        c = 0.5 * (prm.rho_f - prm.rho_s) * prm.mobility
        mob_x = c * (mx * L11 + my * L12)
        mob_y = c * (mx * L21 + my * L22)
        # div(2 mu D(v)) = mu lap v + 2 D(v) grad mu  (v is solenoidal)
        D11, D12, D22 = L11, 0.5 * (L12 + L21), L22
        vis_x = mu * lvx + 2.0 * dmu * (D11 * gx + D12 * gy)
        vis_y = mu * lvy + 2.0 * dmu * (D12 * gx + D22 * gy)
        # div(G B) = B grad G + G div B
        P, Px, Py, _ = self._poly(x, y)
        s = B_SCALE * np.sin(PI * t)
        B11, B12, B22 = (s * P * B_MATRIX[0, 0], s * P * B_MATRIX[0, 1], s * P * B_MATRIX[1, 1])
        divB_x = s * (B_MATRIX[0, 0] * Px + B_MATRIX[0, 1] * Py)
        divB_y = s * (B_MATRIX[1, 0] * Px + B_MATRIX[1, 1] * Py)
        el_x = dG * (B11 * gx + B12 * gy) + G * divB_x
        el_y = dG * (B12 * gx + B22 * gy) + G * divB_y
        # capillary: gamma eps div(grad phi (x) grad phi) = gamma eps (lap phi grad phi + H grad phi)
        ge = prm.gamma * prm.epsilon
        cap_x = ge * (lap_phi * gx + hxx * gx + hxy * gy)
        cap_y = ge * (lap_phi * gy + hxy * gx + hyy * gy)
        return (mom_x + mob_x - vis_x - el_x + cap_x, mom_y + mob_y - vis_y - el_y + cap_y)


def build_mms(case: int, mesh: Mesh, epsilon: float | None = None, spaces: FSISpaces | None = None):
    """Parameters, reference fields and initial data for a manufactured-solution run.

    ``epsilon`` defaults to four times the mesh cell size.
    """
    eps = 4.0 * mesh.cell_size if epsilon is None else float(epsilon)
    params = mms_params(case, eps)
    mms = MMSCase(case, params)
    spaces = spaces or make_spaces(mesh)
    init = {
        "v": interpolate(spaces.V, lambda x, y: mms.v(x, y, 0.0), "v"),
        "B": interpolate(spaces.T, lambda x, y: mms.B(x, y, 0.0), "B"),
        "phi": interpolate(spaces.S, lambda x, y: mms.phi(x, y, 0.0), "phi"),
        "p": constant(spaces.Q, 0.0, "p"),
        "m": interpolate(spaces.S, lambda x, y: mms.m(x, y, 0.0), "m"),
    }
    return params, mms, init


@dataclass(frozen=True)
class ContactCase:
    case: int
    center: tuple = (0.5, 0.7)
    radius: float = 0.2
    init_profile: str = "sharp"
    phi_boundary_value: float = 1.0

    def __post_init__(self):
        cx, cy = self.center
        r = self.radius
        if not (r < cx < 1 - r and r < cy < 1 - r):
            raise ScenarioError("initial circle must lie strictly inside the unit square")
        if self.init_profile not in ("sharp", "tanh"):
            raise ScenarioError(f"unknown init profile {self.init_profile!r}")

    def signed_distance(self, x, y):
        return np.hypot(x - self.center[0], y - self.center[1]) - self.radius

    def phi0(self, x, y, epsilon: float):
        d = self.signed_distance(x, y)
        if self.init_profile == "sharp":
            return np.where(d <= 0.0, -1.0, 1.0)
        return np.tanh(d / (np.sqrt(2.0) * epsilon))


def contact_params(case: int) -> MaterialParams:
    """Parameter sets of the falling-ball benchmark (CGS units)."""
    shared = dict(rho_f=1.0, rho_s=10.0, g_f=0.0, alpha_f=5e4, gamma=1e-3, epsilon=2.5e-3, mobility=1e-2)
    if case == 1:
        return MaterialParams(mu_f=5e-4, mu_s=200.0, g_s=5e5, body_force=(0.0, -1e3), delta_stab=1e-3, **shared)
    if case == 2:
        return MaterialParams(mu_f=0.04, mu_s=100.0, g_s=5e3, body_force=(0.0, -5e3), delta_stab=1e-1, **shared)
    raise ScenarioError(f"unknown contact case {case!r}; expected 1 or 2")


def build_contact(case: int, mesh: Mesh, init_profile: str = "sharp", spaces: FSISpaces | None = None,
                  params: MaterialParams | None = None):
    """Parameters, case description and initial data (fluid at rest, B = I)."""
    params = params or contact_params(case)
    cc = ContactCase(case, init_profile=init_profile)
    spaces = spaces or make_spaces(mesh)
    init = {
        "v": constant(spaces.V, (0.0, 0.0), "v"),
        "B": constant(spaces.T, (1.0, 0.0, 1.0), "B"),
        "phi": interpolate(spaces.S, lambda x, y: cc.phi0(x, y, params.epsilon), "phi"),
        "p": constant(spaces.Q, 0.0, "p"),
        "m": constant(spaces.S, 0.0, "m"),
    }
    return params, cc, init


def center_of_mass_y(phi: FEFunction, order: int = 4) -> float:
    """y-coordinate of the solid-phase centroid, weight ``(1 - phi)/2``."""
    from .fem import get_quadrature

    quad = get_quadrature(phi.space.mesh, order)
    solid = 0.5 * (1.0 - phi.at_quadrature(quad))
    mass = float(np.sum(solid * quad.dx))
    if mass <= 0.0:
        raise ScenarioError("solid phase is empty; centroid undefined")
    return float(np.sum(solid * quad.points[..., 1] * quad.dx)) / mass


def solid_area(phi: FEFunction, order: int = 4) -> float:
    return integrate(phi.space.mesh, 0.5 * (1.0 - phi.at_quadrature(_quad(phi, order))), order)


def _quad(phi, order):
    from .fem import get_quadrature

    return get_quadrature(phi.space.mesh, order)
