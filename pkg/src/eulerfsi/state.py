"""Discrete spaces of the coupled problem and the time-stepping state."""
from __future__ import annotations

from dataclasses import dataclass, field

from .fem import FEFunction, FESpace, make_space
from .mesh import Mesh


@dataclass(frozen=True)
class FSISpaces:
    """Taylor-Hood P2/P1 for (v, p), P2 for (phi, m), P1 symmetric tensors for B."""

    mesh: Mesh
    V: FESpace
    Q: FESpace
    S: FESpace
    T: FESpace


def make_spaces(mesh: Mesh) -> FSISpaces:
    return FSISpaces(
        mesh=mesh,
        V=make_space(mesh, 2, "vector2"),
        Q=make_space(mesh, 1, "scalar"),
        S=make_space(mesh, 2, "scalar"),
        T=make_space(mesh, 1, "symtensor2"),
    )


@dataclass
class SimState:
    """Fields at time levels n-1 and n, plus the last converged half step."""

    t: float
    step_index: int
    dt: float
    v: FEFunction
    B: FEFunction
    phi: FEFunction
    v_prev: FEFunction
    B_prev: FEFunction
    phi_prev: FEFunction
    p: FEFunction
    m: FEFunction
    half: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    @classmethod
    def initial(cls, init: dict, dt: float, t0: float = 0.0) -> "SimState":
        # the level n-1 is not defined at startup; copy level 0
        return cls(
            t=t0,
            step_index=0,
            dt=dt,
            v=init["v"].copy("v"),
            B=init["B"].copy("B"),
            phi=init["phi"].copy("phi"),
            v_prev=init["v"].copy("v"),
            B_prev=init["B"].copy("B"),
            phi_prev=init["phi"].copy("phi"),
            p=init["p"].copy("p"),
            m=init["m"].copy("m"),
        )

    @property
    def mesh(self) -> Mesh:
        return self.v.space.mesh
