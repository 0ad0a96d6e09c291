"""Material parameters, phase-dependent blends and the double-well potential."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np


@dataclass(frozen=True)
class MaterialParams:
    """Physical and numerical constants (CGS units for the contact cases).

    ``phi = +1`` marks fluid and ``phi = -1`` marks solid.
    """

    rho_f: float = 1.0
    rho_s: float = 1.0
    mu_f: float = 1.0
    mu_s: float = 0.0
    g_f: float = 0.0
    g_s: float = 1.0
    alpha_f: float = 1.0
    gamma: float = 1e-4
    epsilon: float = 0.1
    mobility: float = 1.0
    delta_stab: float = 0.0
    body_force: tuple = field(default=(0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "body_force", tuple(float(f) for f in self.body_force))
        problems = self.validate()
        if problems:
            raise ValueError("invalid material parameters: " + "; ".join(problems))

    def validate(self) -> list[str]:
        p = []
        checks = [
            (self.rho_f > 0, "rho_f must be > 0"),
            (self.rho_s > 0, "rho_s must be > 0"),
            (self.mu_f > 0, "mu_f must be > 0"),
            (self.mu_s >= 0, "mu_s must be >= 0"),
            (self.g_s > 0, "g_s must be > 0"),
            (self.g_f >= 0, "g_f must be >= 0"),
            (self.alpha_f >= 0, "alpha_f must be >= 0"),
            (self.gamma > 0, "gamma must be > 0"),
            (self.epsilon > 0, "epsilon must be > 0"),
            (self.mobility > 0, "mobility must be > 0"),
            (self.delta_stab >= 0, "delta_stab must be >= 0"),
            (len(self.body_force) == 2, "body_force must have two components"),
        ]
        for ok, msg in checks:
            if not ok:
                p.append(msg)
        return p

    def replace(self, **changes) -> "MaterialParams":
        data = asdict(self)
        unknown = set(changes) - set(data)
        if unknown:
            raise KeyError(f"unknown material parameter(s): {sorted(unknown)}")
        data.update(changes)
        return MaterialParams(**data)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    # blends -----------------------------------------------------------
    def rho(self, phi):
        return blend(phi, self.rho_f, self.rho_s)

    def mu(self, phi):
        return blend(phi, self.mu_f, self.mu_s)

    def G(self, phi):
        return blend(phi, self.g_f, self.g_s)

    def alpha(self, phi):
        return blend(phi, self.alpha_f, 0.0)

    def drho(self, phi):
        return blend_slope(phi, self.rho_f, self.rho_s)

    def dmu(self, phi):
        return blend_slope(phi, self.mu_f, self.mu_s)

    def dG(self, phi):
        return blend_slope(phi, self.g_f, self.g_s)


def clamp(phi):
    return np.clip(phi, -1.0, 1.0)


def blend(phi, fluid_value: float, solid_value: float):
    """``fluid (1 + phi)/2 + solid (1 - phi)/2`` with phi clamped to [-1, 1]."""
    c = clamp(phi)
    return 0.5 * fluid_value * (1.0 + c) + 0.5 * solid_value * (1.0 - c)


def blend_slope(phi, fluid_value: float, solid_value: float):
    """Derivative of :func:`blend` in phi (zero where the clamp is active)."""
    inside = np.abs(phi) <= 1.0
    return np.where(inside, 0.5 * (fluid_value - solid_value), 0.0)


def blend_rho(phi, params: MaterialParams):
    return params.rho(phi)


def blend_mu(phi, params: MaterialParams):
    return params.mu(phi)


def blend_G(phi, params: MaterialParams):
    return params.G(phi)


def blend_alpha(phi, params: MaterialParams):
    return params.alpha(phi)


def W(phi):
    """Double-well free energy ``(phi^2 - 1)^2 / 4``."""
    return 0.25 * (np.asarray(phi) ** 2 - 1.0) ** 2


def W_prime(phi):
    phi = np.asarray(phi)
    return phi**3 - phi


def W_second(phi):
    return 3.0 * np.asarray(phi) ** 2 - 1.0


def W_prime_lin(phi_old, phi_new):
    """Linearised W': ``phi_new * phi_old**2 - phi_new`` (linear in phi_new)."""
    return np.asarray(phi_new) * np.asarray(phi_old) ** 2 - np.asarray(phi_new)


def gamma_from_physical(surface_tension: float) -> float:
    """Scaled surface tension ``3 / (2 sqrt 2) * surface_tension``."""
    if surface_tension < 0:
        raise ValueError("surface tension must be non-negative")
    return 3.0 * surface_tension / (2.0 * math.sqrt(2.0))
