"""Qubit model zoo: time-parametrized map families with closed forms.

Each family evaluates its process matrix ``A(t)`` (acting on row-major
vectorized states, ``Phi(t, 0)``) from a closed form, and, where one exists,
also its time-local generator ``L(t)`` with ``dA/dt = L A``. Built-in models:

``amplitude-damping``
    The standard qubit amplitude-damping channel with rate ``gamma``;
    the population of the second basis state decays as ``exp(-2 gamma t)``.
``mixed-pauli``
    Convex mixture ``a * Phi_z + (1 - a) * Phi_y`` of two Pauli channels,
    each flipping with probability ``p(t) = (1 - exp(-r t)) / 2``.
``dephasing``
    Generalized population/coherence relaxation parametrized by functions
    ``x0(t), x1(t), g(t)`` (populations mix through x0/x1; the coherence is
    multiplied by g). Two presets, one invertible for all t and one whose
    process matrix crosses zero determinant at t = pi/2.
``decay-g``
    Excited-state decay parametrized by an amplitude ``G(t)``; the
    ``linear-cutoff`` preset reaches G = 0 at a finite time t* and is the
    built-in example of a non-invertible, non-smooth family.
``identity`` / ``semigroup``
    The trivial map and exp(t L) for a user-supplied constant generator.

hbar = 1 throughout; rates are angular frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import propagate, superop

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
# z-representation with the decaying (second) basis state at +1
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |0><1|
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |1><0|


class SingularGeneratorError(ArithmeticError):
    """The time-local generator diverges (a closed-form denominator hit zero)."""


@dataclass(frozen=True)
class MapFamily:
    """A time-parametrized family of process matrices Phi(t, 0)."""

    name: str
    dim: int
    params: dict
    t_max: float
    declared_smooth: bool
    process: Callable[[float], np.ndarray] = field(repr=False)
    liouvillian: Callable[[float], np.ndarray] | None = field(default=None, repr=False)

    def label(self) -> str:
        """Short human-readable identifier including parameters."""
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"


def eval_family(family: MapFamily, t: float) -> np.ndarray:
    """Process matrix A(t) of the family; t must lie in [0, t_max]."""
    if not (0.0 <= t <= family.t_max):
        raise ValueError(f"t={t} outside the domain [0, {family.t_max}] of {family.name}")
    return family.process(float(t))


def analytic_liouvillian(family: MapFamily, t: float) -> np.ndarray:
    """Closed-form generator L(t) for families that carry one.

    Raises ``ValueError`` for families without a closed-form generator and
    :class:`SingularGeneratorError` where the generator diverges.
    """
    if family.liouvillian is None:
        raise ValueError(f"model {family.name} has no closed-form generator")
    if not (0.0 <= t <= family.t_max):
        raise ValueError(f"t={t} outside the domain [0, {family.t_max}] of {family.name}")
    return family.liouvillian(float(t))


def _checked(name: str, process: Callable[[float], np.ndarray]) -> Callable[[float], np.ndarray]:
    a0 = process(0.0)
    if superop.max_abs(a0 - np.eye(a0.shape[0])) > 1e-12:
        raise ValueError(f"{name}: process matrix at t=0 is not the identity")
    return process


# ---------------------------------------------------------------------------
# Amplitude damping
# ---------------------------------------------------------------------------

def amplitude_damping_kraus(gamma: float, t: float) -> list[np.ndarray]:
    """Kraus pair of the amplitude-damping channel at time t."""
    e = np.exp(-gamma * t)
    e0 = np.array([[1.0, 0.0], [0.0, e]], dtype=complex)
    e1 = np.array([[0.0, np.sqrt(max(0.0, 1.0 - e * e))], [0.0, 0.0]], dtype=complex)
    return [e0, e1]


def amplitude_damping_process(gamma: float, t: float) -> np.ndarray:
    e = np.exp(-gamma * t)
    return np.array(
        [
            [1.0, 0.0, 0.0, 1.0 - e * e],
            [0.0, e, 0.0, 0.0],
            [0.0, 0.0, e, 0.0],
            [0.0, 0.0, 0.0, e * e],
        ],
        dtype=complex,
    )


def amplitude_damping_generator(gamma: float) -> np.ndarray:
    """Constant generator of amplitude damping: 2*gamma feed into the ground
    population, -gamma on each coherence, -2*gamma on the excited population."""
    return np.array(
        [
            [0.0, 0.0, 0.0, 2.0 * gamma],
            [0.0, -gamma, 0.0, 0.0],
            [0.0, 0.0, -gamma, 0.0],
            [0.0, 0.0, 0.0, -2.0 * gamma],
        ],
        dtype=complex,
    )


def amplitude_damping(gamma: float, t_max: float | None = None) -> MapFamily:
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    t_max = 10.0 / gamma if t_max is None else float(t_max)
    gen = amplitude_damping_generator(gamma)
    return MapFamily(
        name="amplitude-damping",
        dim=2,
        params={"gamma": float(gamma)},
        t_max=t_max,
        declared_smooth=True,
        process=_checked("amplitude-damping", lambda t: amplitude_damping_process(gamma, t)),
        liouvillian=lambda t: gen.copy(),
    )


# ---------------------------------------------------------------------------
# Mixed Pauli channel
# ---------------------------------------------------------------------------

def mixed_pauli_process(p: float, a: float) -> np.ndarray:
    """Process matrix of a*Phi_z + (1-a)*Phi_y at flip probability p."""
    return np.array(
        [
            [1.0 - (1.0 - a) * p, 0.0, 0.0, (1.0 - a) * p],
            [0.0, 1.0 - (1.0 + a) * p, (a - 1.0) * p, 0.0],
            [0.0, (a - 1.0) * p, 1.0 - (1.0 + a) * p, 0.0],
            [(1.0 - a) * p, 0.0, 0.0, 1.0 - (1.0 - a) * p],
        ],
        dtype=complex,
    )


def mixed_pauli(a: float, r: float, t_max: float | None = None) -> MapFamily:
    if not (0.0 < a < 1.0):
        raise ValueError(f"mixing probability a must lie in (0, 1), got {a}")
    if r <= 0:
        raise ValueError(f"rate r must be positive, got {r}")
    t_max = 10.0 / r if t_max is None else float(t_max)

    def process(t: float) -> np.ndarray:
        p = 0.5 * (1.0 - np.exp(-r * t))
        return mixed_pauli_process(p, a)

    return MapFamily(
        name="mixed-pauli",
        dim=2,
        params={"a": float(a), "r": float(r)},
        t_max=t_max,
        declared_smooth=True,
        process=_checked("mixed-pauli", process),
    )


# ---------------------------------------------------------------------------
# Generalized dephasing (population mixing x0/x1, coherence factor g)
# ---------------------------------------------------------------------------

DEPHASING_PRESETS = ("invertible", "singular-crossing")


class DephasingRates(NamedTuple):
    """Closed-form generator rates of the dephasing model at one time."""

    big_gamma: float
    omega: float
    a0: float
    a1: float


def dephasing_process(x0: float, x1: float, g: complex) -> np.ndarray:
    """Process matrix with populations mixed by x0/x1 and coherence scaled by g."""
    return np.array(
        [
            [x0, 0.0, 0.0, 1.0 - x1],
            [0.0, g, 0.0, 0.0],
            [0.0, 0.0, np.conj(g), 0.0],
            [1.0 - x0, 0.0, 0.0, x1],
        ],
        dtype=complex,
    )


def _dephasing_functions(preset: str):
    """(x0, x1, g, dx0, dx1, dg) callables for a named preset."""
    if preset == "invertible":
        x = lambda t: 0.5 * (1.0 + np.exp(-t))
        dx = lambda t: -0.5 * np.exp(-t)
        return x, x, lambda t: np.exp(-t), dx, dx, lambda t: -np.exp(-t)
    if preset == "singular-crossing":
        x = lambda t: 0.5 * (1.0 + np.exp(-t) * np.cos(t))
        dx = lambda t: -0.5 * np.exp(-t) * (np.cos(t) + np.sin(t))
        return x, x, lambda t: np.exp(-t), dx, dx, lambda t: -np.exp(-t)
    raise ValueError(f"unknown dephasing preset {preset!r}; choose from {DEPHASING_PRESETS}")


def dephasing_rates(preset: str, t: float) -> DephasingRates:
    """Generator rates (big_gamma, omega, a0, a1) of a dephasing preset.

    Diverges (raises :class:`SingularGeneratorError`) where the population
    denominator 1 - x0 - x1 or the coherence factor g vanishes.
    """
    x0f, x1f, gf, dx0f, dx1f, dgf = _dephasing_functions(preset)
    x0, x1, g = x0f(t), x1f(t), gf(t)
    denom = 1.0 - x0 - x1
    if denom == 0.0:
        raise SingularGeneratorError(f"dephasing {preset}: 1 - x0 - x1 = 0 at t={t}")
    if g == 0.0:
        raise SingularGeneratorError(f"dephasing {preset}: coherence factor 0 at t={t}")
    dx0, dx1, dg = dx0f(t), dx1f(t), dgf(t)
    a0 = (dx0 * (1.0 - x1) + dx1 * x0) / denom
    a1 = (dx1 * (1.0 - x0) + dx0 * x1) / denom
    ratio = dg / g
    big_gamma = -(a0 + a1) / 2.0 - np.real(ratio)
    omega = float(np.imag(ratio))
    return DephasingRates(float(big_gamma), omega, float(a0), float(a1))


def _dephasing_liouvillian(preset: str, t: float) -> np.ndarray:
    rates = dephasing_rates(preset, t)
    return (
        -1j * (rates.omega / 2.0) * superop.commutator_superop(SIGMA_Z)
        + rates.a0 * superop.dissipator_superop(SIGMA_PLUS)
        + rates.a1 * superop.dissipator_superop(SIGMA_MINUS)
        + (rates.big_gamma / 2.0) * superop.dissipator_superop(SIGMA_Z)
    )


def dephasing(preset: str = "invertible", t_max: float = 10.0) -> MapFamily:
    x0f, x1f, gf, _, _, _ = _dephasing_functions(preset)
    process = _checked(
        f"dephasing/{preset}", lambda t: dephasing_process(x0f(t), x1f(t), gf(t))
    )
    return MapFamily(
        name="dephasing",
        dim=2,
        params={"preset": preset},
        t_max=float(t_max),
        declared_smooth=True,
        process=process,
        liouvillian=lambda t: _dephasing_liouvillian(preset, t),
    )


# ---------------------------------------------------------------------------
# Decay with amplitude G(t)
# ---------------------------------------------------------------------------

DECAY_G_PRESETS = ("exponential", "linear-cutoff")


def decay_g_process(g: complex) -> np.ndarray:
    """Process matrix of the excited-state-decay map at amplitude g."""
    g2 = abs(g) ** 2
    return np.array(
        [
            [g2, 0.0, 0.0, 0.0],
            [0.0, g, 0.0, 0.0],
            [0.0, 0.0, np.conj(g), 0.0],
            [1.0 - g2, 0.0, 0.0, 1.0],
        ],
        dtype=complex,
    )


def _decay_g_functions(preset: str, lam: float | None, t_star: float | None):
    """(G, dG) callables for a named preset."""
    if preset == "exponential":
        if lam is None or lam <= 0:
            raise ValueError(f"exponential preset needs lam > 0, got {lam}")
        return (lambda t: np.exp(-lam * t / 2.0)), (lambda t: -0.5 * lam * np.exp(-lam * t / 2.0))
    if preset == "linear-cutoff":
        if t_star is None or t_star <= 0:
            raise ValueError(f"linear-cutoff preset needs t_star > 0, got {t_star}")
        return (
            lambda t: max(0.0, 1.0 - t / t_star),
            lambda t: -1.0 / t_star if t < t_star else 0.0,
        )
    raise ValueError(f"unknown decay-g preset {preset!r}; choose from {DECAY_G_PRESETS}")


def _decay_g_liouvillian(gf, dgf, t: float) -> np.ndarray:
    g = gf(t)
    if g == 0.0:
        raise SingularGeneratorError(f"decay-g: amplitude 0 at t={t}")
    ratio = dgf(t) / g
    rate = -2.0 * np.real(ratio)
    detuning = -2.0 * np.imag(ratio)
    number_op = SIGMA_MINUS @ SIGMA_PLUS  # projector on the decaying state
    return (
        -1j * (detuning / 2.0) * superop.commutator_superop(number_op)
        + rate * superop.dissipator_superop(SIGMA_MINUS)
    )


def decay_g(
    preset: str = "exponential",
    lam: float | None = None,
    t_star: float | None = None,
    t_max: float | None = None,
) -> MapFamily:
    gf, dgf = _decay_g_functions(preset, lam, t_star)
    if t_max is None:
        t_max = 10.0 / lam if preset == "exponential" else 2.0 * t_star
    params: dict = {"preset": preset}
    if preset == "exponential":
        params["lam"] = float(lam)
    else:
        params["t_star"] = float(t_star)
    return MapFamily(
        name="decay-g",
        dim=2,
        params=params,
        t_max=float(t_max),
        declared_smooth=(preset == "exponential"),
        process=_checked(f"decay-g/{preset}", lambda t: decay_g_process(gf(t))),
        liouvillian=lambda t: _decay_g_liouvillian(gf, dgf, t),
    )


# ---------------------------------------------------------------------------
# Constant-generator families
# ---------------------------------------------------------------------------

def semigroup(generator, t_max: float = 10.0, name: str = "semigroup") -> MapFamily:
    """exp(t L) for a constant generator L.

    L must be Hermiticity-preserving (its reshuffle Hermitian) and
    trace-annihilating (diagonal blocks of the reshuffle summing to zero).
    """
    gen = np.asarray(generator, dtype=complex)
    d = superop._superop_side(gen)
    scale = max(1.0, superop.max_abs(gen))
    herm = superop.hermiticity_preserving_defect(gen)
    if herm > 1e-10 * scale:
        raise ValueError(f"generator is not Hermiticity-preserving: defect {herm:.3e}")
    ta = superop.trace_annihilation_defect(gen)
    if ta > 1e-10 * scale:
        raise ValueError(f"generator is not trace-annihilating: defect {ta:.3e}")
    return MapFamily(
        name=name,
        dim=d,
        params={},
        t_max=float(t_max),
        declared_smooth=True,
        process=_checked(name, lambda t: propagate.expm(gen * t)),
        liouvillian=lambda t: gen.copy(),
    )


def identity_family(dim: int = 2, t_max: float = 10.0) -> MapFamily:
    eye = np.eye(dim * dim, dtype=complex)
    zero = np.zeros((dim * dim, dim * dim), dtype=complex)
    return MapFamily(
        name="identity",
        dim=dim,
        params={},
        t_max=float(t_max),
        declared_smooth=True,
        process=lambda t: eye.copy(),
        liouvillian=lambda t: zero.copy(),
    )


def default_zoo() -> list[MapFamily]:
    """One representative family per built-in model/preset."""
    return [
        amplitude_damping(gamma=1.0),
        mixed_pauli(a=0.5, r=1.0),
        dephasing("invertible"),
        dephasing("singular-crossing"),
        decay_g("exponential", lam=1.0),
        decay_g("linear-cutoff", t_star=1.0),
        identity_family(),
    ]
