"""Operational invertibility testing through simulated state tomography.

A family is probed with an informationally complete set of input states;
the outputs (optionally blurred by seeded Gaussian noise on their Bloch
components) are stacked into columns and the process matrix recovered by
linear inversion, ``A_rec = S_out @ S_in^-1``. Non-invertibility of the
reconstructed matrix is then read off its smallest singular value with a
noise-aware three-way verdict (invertible / inconclusive / non_invertible).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import superop
from .models import MapFamily, eval_family

PROBE_STACK_MIN_SV = 1e-6

VERDICT_INVERTIBLE = "invertible"
VERDICT_NON_INVERTIBLE = "non_invertible"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ProbeSet:
    """d^2 input states whose vectorizations span the operator space."""

    dim: int
    states: tuple[np.ndarray, ...] = field(repr=False)

    def stack(self) -> np.ndarray:
        """d^2 x d^2 matrix with vectorized probe states as columns."""
        return np.column_stack([superop.vectorize(s) for s in self.states])


def make_probe_set(states, dim: int | None = None) -> ProbeSet:
    """Validate user probes: density matrices forming an invertible stack."""
    states = [superop.validate_density_matrix(s) for s in states]
    d = states[0].shape[0] if dim is None else dim
    if any(s.shape != (d, d) for s in states):
        raise ValueError("probe states have inconsistent dimensions")
    if len(states) != d * d:
        raise ValueError(f"need exactly {d * d} probe states for dim {d}, got {len(states)}")
    probes = ProbeSet(dim=d, states=tuple(states))
    min_sv = float(superop.singular_values(probes.stack())[0])
    if min_sv <= PROBE_STACK_MIN_SV:
        raise ValueError(
            f"probe stack is not informationally complete: min singular value {min_sv:.3e}"
        )
    return probes


def default_probes(dim: int = 2) -> ProbeSet:
    """Minimal qubit probe set: |0>, |1>, |+> and |+i> projectors.

    Larger dimensions need a user-supplied set via :func:`make_probe_set`.
    """
    if dim != 2:
        raise ValueError(f"no built-in probe set for dim {dim}; supply one explicitly")
    ket0 = np.array([1.0, 0.0], dtype=complex)
    ket1 = np.array([0.0, 1.0], dtype=complex)
    plus = (ket0 + ket1) / np.sqrt(2.0)
    plus_i = (ket0 + 1j * ket1) / np.sqrt(2.0)
    states = [np.outer(k, k.conj()) for k in (ket0, ket1, plus, plus_i)]
    return make_probe_set(states, dim=2)


@dataclass(frozen=True)
class TomographyRun:
    """Probe states and (possibly noisy) output states at one time.

    Outputs are Hermitian with unit trace; with noise they need not be
    positive semidefinite.
    """

    probes: ProbeSet
    t: float
    outputs: tuple[np.ndarray, ...] = field(repr=False)
    noise_sigma: float
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "probes": [superop.matrix_to_json_dict(s) for s in self.probes.states],
            "outputs": [superop.matrix_to_json_dict(s) for s in self.outputs],
        }


def tomography_run_from_json_dict(obj: dict) -> TomographyRun:
    probes = make_probe_set([superop.matrix_from_json_dict(s) for s in obj["probes"]])
    outputs = tuple(superop.matrix_from_json_dict(s) for s in obj["outputs"])
    return TomographyRun(
        probes=probes,
        t=float(obj["t"]),
        outputs=outputs,
        noise_sigma=float(obj["noise_sigma"]),
        seed=int(obj["seed"]),
    )


def simulate_outputs(
    family: MapFamily,
    t: float,
    probes: ProbeSet | None = None,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> TomographyRun:
    """Propagate each probe through A(t) and add seeded tomography noise.

    Noise draws one Gaussian of width ``noise_sigma`` per generalized Bloch
    component of each output, then re-Hermitizes and renormalizes the
    trace. The run is a pure function of (family, t, probes, sigma, seed).
    """
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if probes is None:
        probes = default_probes(family.dim)
    a = eval_family(family, t)
    rng = np.random.default_rng(seed)
    bloch_ops = superop.hermitian_basis(family.dim)[1:]
    outputs = []
    for state in probes.states:
        out = superop.devectorize(a @ superop.vectorize(state))
        if noise_sigma > 0.0:
            deltas = rng.normal(0.0, noise_sigma, size=len(bloch_ops))
            for delta, op in zip(deltas, bloch_ops):
                # shifting Bloch component r_i by delta adds delta * lambda_i / 2
                # = delta * F_i / sqrt(2) with the HS-normalized basis ops F_i
                out = out + delta * op / np.sqrt(2.0)
            out = 0.5 * (out + out.conj().T)
            out = out / np.real(np.trace(out))
        outputs.append(out)
    return TomographyRun(
        probes=probes, t=float(t), outputs=tuple(outputs), noise_sigma=float(noise_sigma), seed=int(seed)
    )


def reconstruct_process(run: TomographyRun) -> np.ndarray:
    """Linear-inversion estimate A_rec = S_out @ S_in^-1 of the process matrix."""
    s_in = run.probes.stack()
    s_out = np.column_stack([superop.vectorize(s) for s in run.outputs])
    # A s_in = s_out  =>  s_in^T A^T = s_out^T
    return np.linalg.solve(s_in.T, s_out.T).T


@dataclass(frozen=True)
class InvertibilityVerdict:
    verdict: str
    min_sv: float
    tau_low: float
    tau_high: float

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "min_sv": self.min_sv,
            "tau_low": self.tau_low,
            "tau_high": self.tau_high,
        }


def invertibility_verdict(
    a_rec,
    noise_sigma: float,
    sv_threshold: float = superop.DEFAULT_SV_THRESHOLD,
) -> InvertibilityVerdict:
    """Noise-aware three-way invertibility call on a reconstructed matrix.

    min_sv below tau_low = max(sv_threshold, 10 sigma) reads non-invertible,
    above tau_high = 100 sigma + sv_threshold reads invertible, and the band
    between is inconclusive (the data cannot separate the two).
    """
    min_sv = float(superop.singular_values(np.asarray(a_rec, dtype=complex))[0])
    tau_low = max(sv_threshold, 10.0 * noise_sigma)
    tau_high = 100.0 * noise_sigma + sv_threshold
    if min_sv < tau_low:
        verdict = VERDICT_NON_INVERTIBLE
    elif min_sv > tau_high:
        verdict = VERDICT_INVERTIBLE
    else:
        verdict = VERDICT_INCONCLUSIVE
    return InvertibilityVerdict(verdict=verdict, min_sv=min_sv, tau_low=tau_low, tau_high=tau_high)
