"""Domain types, parameter validation, and the reaction-rate kernel.

The model describes a 1-D sedimenting porous column 0 < z < h(t): porosity
phi compacts under overburden while a solid reactant fraction psi (a
water-rich clay) dehydrates in a thin Arrhenius-like zone a fixed distance
zstar below the growing top boundary, releasing pore water. Everything here
is non-dimensional.

All types are immutable value data; copies are cheap and thread-safe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

#: Default clamp for exponent arguments in the reaction kernel. Once the
#: rate exceeds e^50 the reactant is annihilated within any step, so a
#: larger cap only risks overflow without changing results.
DEFAULT_EXP_CLAMP = 50.0

#: beta below this is flagged: the reaction-zone analysis assumes beta >> 1.
BETA_VALIDITY_FLOOR = 10.0


@dataclass(frozen=True)
class BasinParams:
    """Physical constants of the compaction model plus derived quantities.

    Prefer :func:`derive_params`, which validates and fills the derived
    fields ``phistar`` (typical porosity below the reaction zone) and
    ``A = beta / m``.
    """

    lam: float       # compaction constant, O(1)
    beta: float      # non-dimensional activation energy, >> 1
    m: int           # permeability exponent, >= 7
    phi0: float      # porosity of fresh sediment at the top boundary
    psi0: float      # reactant fraction of fresh sediment
    a0: float        # released-water yield of the reaction
    zstar: float     # critical reaction depth below the top boundary
    sdot: float      # sedimentation rate at the basin top
    phistar: float   # phi0 * exp(-ln(m)/m)
    A: float         # beta / m


def derive_params(
    lam: float = 1.0,
    beta: float = 21.0,
    m: int = 7,
    phi0: float = 0.5,
    psi0: float = 0.3,
    a0: float = 1.0,
    zstar: float = 1.0,
    sdot: float = 1.0,
) -> BasinParams:
    """Validate raw constants and return a fully derived :class:`BasinParams`.

    Raises :class:`ValidationError` for phi0 outside (0, 1), m < 7,
    negative parameters, or phi0 + psi0 > 1. Emits a ``UserWarning`` when
    beta is below the solver-validity threshold (the narrow-reaction-zone
    assumption needs beta >> 1).
    """
    if isinstance(m, bool) or int(m) != m:
        raise ValidationError(f"permeability exponent m must be an integer, got {m!r}")
    m = int(m)
    if m < 7:
        raise ValidationError(f"permeability exponent m must be >= 7, got {m}")
    if not 0.0 < phi0 < 1.0:
        raise ValidationError(f"surface porosity phi0 must lie in (0, 1), got {phi0}")
    if psi0 < 0.0:
        raise ValidationError(f"surface reactant fraction psi0 must be >= 0, got {psi0}")
    if phi0 + psi0 > 1.0:
        raise ValidationError(
            f"volume fractions exceed unity: phi0 + psi0 = {phi0 + psi0}"
        )
    if lam <= 0.0:
        raise ValidationError(f"compaction constant lam must be > 0, got {lam}")
    for name, value in (("beta", beta), ("a0", a0), ("zstar", zstar), ("sdot", sdot)):
        if value < 0.0:
            raise ValidationError(f"parameter {name} must be non-negative, got {value}")
    if beta < BETA_VALIDITY_FLOOR:
        warnings.warn(
            f"beta = {beta} is below {BETA_VALIDITY_FLOOR}; the thin-reaction-zone "
            "analysis assumes beta >> 1 and results may be unreliable",
            UserWarning,
            stacklevel=2,
        )
    phistar = phi0 * math.exp(-math.log(m) / m)
    return BasinParams(
        lam=float(lam),
        beta=float(beta),
        m=m,
        phi0=float(phi0),
        psi0=float(psi0),
        a0=float(a0),
        zstar=float(zstar),
        sdot=float(sdot),
        phistar=phistar,
        A=float(beta) / m,
    )


def rederive(params: BasinParams) -> BasinParams:
    """Re-derive a params object from its own raw fields (idempotent)."""
    return derive_params(
        lam=params.lam,
        beta=params.beta,
        m=params.m,
        phi0=params.phi0,
        psi0=params.psi0,
        a0=params.a0,
        zstar=params.zstar,
        sdot=params.sdot,
    )


def permeability_factor(phi, params: BasinParams):
    """(phi/phi0)^m evaluated as exp(m*ln(phi/phi0)).

    The exp/log form stays smooth in the m >> 1 regime where direct integer
    powers of a near-unity ratio lose accuracy. ``phi`` must be positive.
    """
    phi = np.asarray(phi, dtype=float)
    return np.exp(params.m * np.log(phi / params.phi0))


def reaction_rate(z, h, params: BasinParams, exp_clamp: float = DEFAULT_EXP_CLAMP):
    """Arrhenius-like dehydration rate e^{beta (h - z - zstar)}.

    The exponent argument is clamped to ``[-exp_clamp, +exp_clamp]``; the
    value is exact whenever the clamp is inactive. Equals 1 on the reaction
    front z = h - zstar. Accepts scalars or arrays.
    """
    arg = params.beta * (np.asarray(h, dtype=float) - np.asarray(z, dtype=float) - params.zstar)
    return np.exp(np.clip(arg, -exp_clamp, exp_clamp))


@dataclass(frozen=True)
class BasinState:
    """Solution snapshot on the fixed computational grid x = z/h(t)."""

    t: float
    h: float
    x: np.ndarray
    phi: np.ndarray
    psi: np.ndarray

    def validate(self, params: BasinParams | None = None) -> None:
        """Check structural invariants, raising :class:`ValidationError`."""
        x, phi, psi = self.x, self.phi, self.psi
        if self.h <= 0.0:
            raise ValidationError(f"basin depth h must be positive, got {self.h}")
        if x.ndim != 1 or len(x) < 3:
            raise ValidationError("grid must be a 1-D array with at least 3 nodes")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0.0):
            raise ValidationError("grid must increase strictly from x=0 to x=1")
        if phi.shape != x.shape or psi.shape != x.shape:
            raise ValidationError("field arrays must match the grid shape")
        if np.any(phi < 0.0) or np.any(psi < 0.0):
            raise ValidationError("phi and psi must be non-negative everywhere")
        if params is not None:
            if phi[-1] != params.phi0 or psi[-1] != params.psi0:
                raise ValidationError(
                    "top node must carry the fresh-sediment data phi0, psi0"
                )

    def solid_overfill(self) -> float:
        """Max of phi + psi - 1 (physical diagnostic; positive means overfull).

        Monitored rather than asserted: asymptotic profiles can graze the
        unit-sum bound under extreme parameters.
        """
        return float(np.max(self.phi + self.psi) - 1.0)


@dataclass(frozen=True)
class RunConfig:
    """Discretization and driver controls for the time-dependent solver."""

    n_nodes: int = 1056
    dt: float = 2e-3
    t_end: float = 8.0
    corrector_iters: int = 2
    newton_tol: float = 1e-10
    newton_max: int = 25
    exp_clamp: float = DEFAULT_EXP_CLAMP
    output_every: float = 0.05
    h0: float = 0.1

    def __post_init__(self):
        positive = (
            ("n_nodes", self.n_nodes),
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("corrector_iters", self.corrector_iters),
            ("newton_tol", self.newton_tol),
            ("newton_max", self.newton_max),
            ("exp_clamp", self.exp_clamp),
            ("output_every", self.output_every),
            ("h0", self.h0),
        )
        for name, value in positive:
            if not value > 0:
                raise ValidationError(f"config field {name} must be positive, got {value}")
        if self.n_nodes < 16:
            raise ValidationError(f"n_nodes must be >= 16, got {self.n_nodes}")
        if self.exp_clamp > 700.0:
            raise ValidationError(
                f"exp_clamp must be <= 700 to stay inside float range, got {self.exp_clamp}"
            )
        if self.corrector_iters > self.newton_max:
            raise ValidationError(
                f"corrector_iters ({self.corrector_iters}) exceeds newton_max "
                f"({self.newton_max})"
            )


def check_layer_resolution(params: BasinParams, config: RunConfig) -> int:
    """Warn when the grid cannot resolve the O(1/beta) reaction zone.

    Uses the a-priori depth bound h_max <= h0 + sdot*t_end (the top cannot
    outrun sedimentation). Returns the recommended minimum node count.
    Reactant-free runs (psi0 = 0) have no layer to resolve and never warn.
    """
    h_bound = config.h0 + params.sdot * config.t_end
    needed = int(math.ceil(8.0 * params.beta * h_bound))
    if params.psi0 > 0.0 and config.n_nodes < needed:
        warnings.warn(
            f"n_nodes = {config.n_nodes} may under-resolve the reaction zone: "
            f"the guideline is >= 8*beta*h_max = {needed} for h_max <= {h_bound:.3g}",
            UserWarning,
            stacklevel=2,
        )
    return needed
