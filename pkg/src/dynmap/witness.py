"""Markovianity witnesses and the region classifier.

The probes implemented here:

* ``invertibility_scan`` - smallest singular value and |det| of A(t) on a
  grid; a point is flagged ``ni`` when min_sv <= sv_threshold * max_sv.
* ``cp_divisibility_scan`` - minimum eigenvalue of the reshuffled
  intermediate map A(t) A(s)^-1 over all grid pairs s < t (the
  CP-divisibility / RHP witness).
* ``extract_liouvillian_fd`` - central-difference time-local generator
  L(t) = dA/dt * A(t)^-1.
* ``lindblad_decompose`` - canonical form of a generator: Hamiltonian,
  rates and orthonormal traceless jump operators from the eigenvalues and
  eigenvectors of the Kossakowski matrix.
* ``blp_scan`` - trace distance of an evolved state pair; any increase is
  an information-backflow flag.
* ``smoothness_probe`` - forward/backward difference disagreement of A(t)
  and generator-norm blowup, the two numeric symptoms of leaving the
  smooth (C) class.
* ``classify`` - the region verdict with precedence
  NonCClass > NonInvertible > rate test (MarkovRHP / NonMarkovInvertible).

Scan reports serialize to a fixed CSV column set and are deterministic for
a fixed configuration.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import superop
from .models import MapFamily, eval_family
from .propagate import TimeGrid
from .superop import SingularMapError

REGION_MARKOV_RHP = "MarkovRHP"
REGION_NON_MARKOV_INVERTIBLE = "NonMarkovInvertible"
REGION_NON_INVERTIBLE = "NonInvertible"
REGION_NON_C_CLASS = "NonCClass"

CSV_HEADER = "t,min_sv,abs_det,min_choi_eig,min_intermediate_choi_eig,min_rate,generator_norm,flags"

_EPS = float(np.finfo(float).eps)


class StepTooLargeError(ValueError):
    """The finite-difference step does not fit inside the time domain."""


class ResidualTooLargeError(ValueError):
    """A generator does not fit the canonical (GKSL) ansatz within tolerance."""

    def __init__(self, message: str, residual: float):
        self.residual = float(residual)
        super().__init__(f"{message} (residual {residual:.3e})")


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical knobs shared by the witnesses."""

    eig_tol: float = 1e-9
    sv_threshold: float = 1e-10
    fd_step: float = 1e-4
    generator_norm_cap: float = 1e6
    smoothness_mismatch: float = 0.1

    def __post_init__(self):
        for name in ("eig_tol", "sv_threshold", "fd_step", "generator_norm_cap", "smoothness_mismatch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class ScanReport:
    """Per-grid-point witness values; unused columns hold NaN."""

    grid: TimeGrid
    t: np.ndarray
    min_sv: np.ndarray
    abs_det: np.ndarray
    min_choi_eig: np.ndarray
    min_intermediate_choi_eig: np.ndarray
    min_rate: np.ndarray
    generator_norm: np.ndarray
    flags: list[list[str]]
    # rate-noise floors backing the classifier's negative-rate test; not a CSV column
    rate_noise_floor: np.ndarray | None = field(default=None, repr=False)

    def flagged(self, token: str) -> list[int]:
        return [k for k, f in enumerate(self.flags) if token in f]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(CSV_HEADER + "\n")
        for k in range(len(self.t)):
            cols = [
                _fmt(self.t[k]),
                _fmt(self.min_sv[k]),
                _fmt(self.abs_det[k]),
                _fmt(self.min_choi_eig[k]),
                _fmt(self.min_intermediate_choi_eig[k]),
                _fmt(self.min_rate[k]),
                _fmt(self.generator_norm[k]),
                "|".join(self.flags[k]),
            ]
            out.write(",".join(cols) + "\n")
        return out.getvalue()


def _empty_report(grid: TimeGrid) -> ScanReport:
    n = grid.n + 1
    nan = lambda: np.full(n, np.nan)
    return ScanReport(
        grid=grid,
        t=grid.points.copy(),
        min_sv=nan(),
        abs_det=nan(),
        min_choi_eig=nan(),
        min_intermediate_choi_eig=nan(),
        min_rate=nan(),
        generator_norm=nan(),
        flags=[[] for _ in range(n)],
    )


def _check_grid(family: MapFamily, grid: TimeGrid) -> None:
    if grid.t0 < 0.0 or grid.t1 > family.t_max:
        raise ValueError(
            f"grid [{grid.t0}, {grid.t1}] is outside the domain [0, {family.t_max}] of {family.name}"
        )


# ---------------------------------------------------------------------------
# Invertibility
# ---------------------------------------------------------------------------

def invertibility_scan(family: MapFamily, grid: TimeGrid, tol: ToleranceConfig = ToleranceConfig()) -> ScanReport:
    """min singular value and |det| of A(t) per grid point; flags ``ni``."""
    _check_grid(family, grid)
    report = _empty_report(grid)
    for k, t in enumerate(report.t):
        a = eval_family(family, float(t))
        lo, hi, det = superop.min_singular_value_and_det(a)
        report.min_sv[k] = lo
        report.abs_det[k] = abs(det)
        if lo <= tol.sv_threshold * hi:
            report.flags[k].append("ni")
    return report


# ---------------------------------------------------------------------------
# CP-divisibility (pairwise intermediate maps)
# ---------------------------------------------------------------------------

def cp_divisibility_scan(
    family: MapFamily,
    grid: TimeGrid,
    tol: ToleranceConfig = ToleranceConfig(),
    workers: int = 1,
) -> ScanReport:
    """Minimum reshuffled-intermediate-map eigenvalue over grid pairs s < t.

    Pairs whose earlier endpoint is singular are skipped and the later
    point flagged ``skip``. The map is CP-divisible on the grid when the
    minimum over all computed pairs is >= -eig_tol.
    """
    _check_grid(family, grid)
    report = _empty_report(grid)
    pts = report.t
    mats = [eval_family(family, float(t)) for t in pts]
    inverses: list[np.ndarray | None] = []
    for k, a in enumerate(mats):
        lo, hi, det = superop.min_singular_value_and_det(a)
        report.min_sv[k] = lo
        report.abs_det[k] = abs(det)
        report.min_choi_eig[k] = float(superop.hermitian_eigenvalues(superop.reshuffle(a))[0])
        if lo <= tol.sv_threshold * hi:
            report.flags[k].append("ni")
            inverses.append(None)
        else:
            inverses.append(np.linalg.inv(a))
    def min_pair_eig(j: int) -> tuple[float, bool]:
        best = np.inf
        skipped = False
        for k in range(j):
            if inverses[k] is None:
                skipped = True
                continue
            choi = superop.reshuffle(mats[j] @ inverses[k])
            lo = float(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T))[0])
            best = min(best, lo)
        return best, skipped

    indices = range(1, len(pts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(min_pair_eig, indices))
    else:
        results = [min_pair_eig(j) for j in indices]
    for j, (best, skipped) in zip(indices, results):
        report.min_intermediate_choi_eig[j] = best if np.isfinite(best) else np.nan
        if skipped:
            report.flags[j].append("skip")
    return report


def is_cp_divisible(report: ScanReport, tol: ToleranceConfig = ToleranceConfig()) -> bool:
    vals = report.min_intermediate_choi_eig
    vals = vals[np.isfinite(vals)]
    return bool(vals.size == 0 or vals.min() >= -tol.eig_tol)


# ---------------------------------------------------------------------------
# Time-local generator extraction
# ---------------------------------------------------------------------------

def extract_liouvillian_fd(
    family: MapFamily,
    t: float,
    h: float = 1e-4,
    sv_threshold: float = superop.DEFAULT_SV_THRESHOLD,
) -> np.ndarray:
    """Central-difference generator (A(t+h) - A(t-h)) / (2h) * A(t)^-1.

    Raises :class:`StepTooLargeError` when the stencil leaves the domain
    and :class:`SingularMapError` when A(t) is not invertible.
    """
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    if t - h < 0.0 or t + h > family.t_max:
        raise StepTooLargeError(
            f"step h={h} does not fit around t={t} in [0, {family.t_max}]"
        )
    da = (eval_family(family, t + h) - eval_family(family, t - h)) / (2.0 * h)
    return da @ superop.invert(eval_family(family, t), sv_threshold)


def _fd_process_derivative(family: MapFamily, t: float, h: float) -> np.ndarray:
    """Second-order dA/dt: central inside the domain, one-sided at the edges."""
    if t - h >= 0.0 and t + h <= family.t_max:
        return (eval_family(family, t + h) - eval_family(family, t - h)) / (2.0 * h)
    if t + 2.0 * h <= family.t_max:
        return (
            -3.0 * eval_family(family, t)
            + 4.0 * eval_family(family, t + h)
            - eval_family(family, t + 2.0 * h)
        ) / (2.0 * h)
    if t - 2.0 * h >= 0.0:
        return (
            3.0 * eval_family(family, t)
            - 4.0 * eval_family(family, t - h)
            + eval_family(family, t - 2.0 * h)
        ) / (2.0 * h)
    raise StepTooLargeError(f"step h={h} does not fit at t={t} in [0, {family.t_max}]")


def _generator_with_noise(
    family: MapFamily, t: float, h: float, sv_threshold: float
) -> tuple[np.ndarray, float]:
    """Richardson-extrapolated generator plus a noise bound on its entries.

    Combining the h and h/2 second-order quotients cancels the leading
    truncation term; their difference, together with a deterministic
    roundoff bound scaled by cond(A), gives the floor the negative-rate
    test must stay below.
    """
    a = eval_family(family, t)
    a_inv = superop.invert(a, sv_threshold)
    l_h = _fd_process_derivative(family, t, h) @ a_inv
    l_h2 = _fd_process_derivative(family, t, h / 2.0) @ a_inv
    gen = (4.0 * l_h2 - l_h) / 3.0
    roundoff = (
        64.0 * a.shape[0] * _EPS * max(1.0, superop.max_abs(a)) * float(np.linalg.norm(a_inv, 1)) / h
    )
    noise = 16.0 * superop.max_abs(l_h - l_h2) + roundoff
    return gen, noise


# ---------------------------------------------------------------------------
# Canonical (GKSL) decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LindbladForm:
    """Canonical generator data: -i[H, .] + sum_k rates[k] * D[ops[k]].

    ``hamiltonian`` is Hermitian and traceless; the jump operators are
    traceless and orthonormal under the Hilbert-Schmidt inner product, with
    ``rates`` (ascending) the eigenvalues of the Kossakowski matrix.
    ``residual`` is the max-norm reconstruction error against the input.
    """

    hamiltonian: np.ndarray = field(repr=False)
    rates: np.ndarray
    lindblad_ops: list[np.ndarray] = field(repr=False)
    kossakowski: np.ndarray = field(repr=False)
    residual: float

    def rebuild(self) -> np.ndarray:
        """Superoperator reconstructed from (H, rates, ops)."""
        out = -1j * superop.commutator_superop(self.hamiltonian)
        for rate, op in zip(self.rates, self.lindblad_ops):
            out = out + rate * superop.dissipator_superop(op)
        return out


def lindblad_decompose(
    generator,
    residual_tol: float = 1e-8,
    pre_tol: float = 1e-6,
) -> LindbladForm:
    """Canonical decomposition of a Hermiticity-preserving trace-annihilating
    generator.

    The generator is expanded over an orthonormal Hermitian basis
    {F_0 = I/sqrt(d), F_1..} as sum_ab a[a,b] F_a rho F_b; the F_0 row and
    column yield the Hamiltonian, and diagonalizing the remaining
    (Kossakowski) block gives rates and jump operators. Inputs that fail the
    preconditions or reconstruct worse than ``residual_tol`` relative are
    rejected with :class:`ResidualTooLargeError`.
    """
    gen = np.asarray(generator, dtype=complex)
    d = superop._superop_side(gen)
    scale = max(1.0, superop.max_abs(gen))

    hp = superop.hermiticity_preserving_defect(gen)
    if hp > pre_tol * scale:
        raise ResidualTooLargeError("generator is not Hermiticity-preserving", hp)
    ta = superop.trace_annihilation_defect(gen)
    if ta > pre_tol * scale:
        raise ResidualTooLargeError("generator is not trace-annihilating", ta)

    basis = superop.hermitian_basis(d)
    n = d * d
    coeff = np.zeros((n, n), dtype=complex)
    for alpha in range(n):
        for beta in range(n):
            probe = np.kron(basis[alpha], basis[beta].T)
            coeff[alpha, beta] = np.sum(probe.conj() * gen)

    b_op = (coeff[0, 0].real / (2.0 * d)) * np.eye(d, dtype=complex)
    for k in range(1, n):
        b_op = b_op + (coeff[k, 0] / np.sqrt(d)) * basis[k]
    ham = 0.5j * (b_op - b_op.conj().T)
    ham = ham - (np.trace(ham) / d) * np.eye(d)

    kossakowski = coeff[1:, 1:]
    kossakowski = 0.5 * (kossakowski + kossakowski.conj().T)
    rates, vecs = np.linalg.eigh(kossakowski)
    ops = [sum(vecs[j, k] * basis[j + 1] for j in range(n - 1)) for k in range(n - 1)]

    form = LindbladForm(
        hamiltonian=ham,
        rates=rates,
        lindblad_ops=ops,
        kossakowski=kossakowski,
        residual=0.0,
    )
    residual = superop.max_abs(gen - form.rebuild())
    if residual > residual_tol * scale:
        raise ResidualTooLargeError("generator does not fit the canonical ansatz", residual)
    return LindbladForm(ham, rates, ops, kossakowski, residual)


# ---------------------------------------------------------------------------
# Trace-distance (information backflow) scan
# ---------------------------------------------------------------------------

def trace_distance(rho1, rho2) -> float:
    """(1/2) * sum |eigenvalues| of the Hermitian difference rho1 - rho2."""
    diff = np.asarray(rho1, dtype=complex) - np.asarray(rho2, dtype=complex)
    eigs = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(eigs)))


@dataclass
class BLPScan:
    """Trace-distance series of an evolved state pair with backflow flags."""

    grid: TimeGrid
    t: np.ndarray
    distance: np.ndarray
    derivative: np.ndarray  # forward quotient at each point; NaN at the last
    flags: list[str]
    backflow: bool

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("t,trace_distance,derivative,flags\n")
        for k in range(len(self.t)):
            out.write(
                f"{_fmt(self.t[k])},{_fmt(self.distance[k])},{_fmt(self.derivative[k])},{self.flags[k]}\n"
            )
        return out.getvalue()


def default_state_pair(dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the first and last basis states."""
    r1 = np.zeros((dim, dim), dtype=complex)
    r2 = np.zeros((dim, dim), dtype=complex)
    r1[0, 0] = 1.0
    r2[dim - 1, dim - 1] = 1.0
    return r1, r2


def blp_scan(
    family: MapFamily,
    grid: TimeGrid,
    pair: tuple[np.ndarray, np.ndarray] | None = None,
    tol: ToleranceConfig = ToleranceConfig(),
) -> BLPScan:
    """Trace distance D(t) of an evolved pair and its discrete derivative.

    The backflow flag fires when any forward difference quotient exceeds
    eig_tol, i.e. when the distance measurably increases.
    """
    _check_grid(family, grid)
    if pair is None:
        pair = default_state_pair(family.dim)
    r1 = superop.validate_density_matrix(pair[0])
    r2 = superop.validate_density_matrix(pair[1])
    v1, v2 = superop.vectorize(r1), superop.vectorize(r2)
    pts = grid.points
    dist = np.empty(len(pts))
    for k, t in enumerate(pts):
        a = eval_family(family, float(t))
        dist[k] = trace_distance(superop.devectorize(a @ v1), superop.devectorize(a @ v2))
    deriv = np.full(len(pts), np.nan)
    deriv[:-1] = np.diff(dist) / grid.spacing
    flags = [
        "backflow" if np.isfinite(deriv[k]) and deriv[k] > tol.eig_tol else ""
        for k in range(len(pts))
    ]
    backflow = bool(np.any(deriv[:-1] > tol.eig_tol))
    return BLPScan(
        grid=grid, t=pts.copy(), distance=dist, derivative=deriv, flags=flags, backflow=backflow
    )


# ---------------------------------------------------------------------------
# Smoothness probe
# ---------------------------------------------------------------------------

def smoothness_probe(
    family: MapFamily, grid: TimeGrid, tol: ToleranceConfig = ToleranceConfig()
) -> ScanReport:
    """Flag grid points that look non-smooth.

    A point is flagged ``nonsmooth`` when the forward and backward
    grid-neighbor difference quotients of A disagree by more than
    ``smoothness_mismatch`` relative, and ``generator_norm`` when the
    extracted generator exceeds ``generator_norm_cap`` in max-norm. Points
    where A(t) itself is singular are flagged ``singular`` (no generator
    exists there to bound).
    """
    _check_grid(family, grid)
    report = _empty_report(grid)
    pts = report.t
    mats = [eval_family(family, float(t)) for t in pts]
    dt = grid.spacing
    for k in range(1, len(pts) - 1):
        fwd = (mats[k + 1] - mats[k]) / dt
        bwd = (mats[k] - mats[k - 1]) / dt
        denom = max(superop.max_abs(fwd), superop.max_abs(bwd))
        if denom == 0.0:
            continue
        mismatch = superop.max_abs(fwd - bwd) / denom
        if mismatch > tol.smoothness_mismatch:
            report.flags[k].append("nonsmooth")
    report.rate_noise_floor = np.full(len(pts), np.nan)
    for k, t in enumerate(pts):
        try:
            gen, noise = _generator_with_noise(family, float(t), tol.fd_step, tol.sv_threshold)
        except SingularMapError:
            report.flags[k].append("singular")
            continue
        except StepTooLargeError:
            continue
        report.generator_norm[k] = superop.max_abs(gen)
        if report.generator_norm[k] > tol.generator_norm_cap:
            report.flags[k].append("generator_norm")
        try:
            form = lindblad_decompose(gen, residual_tol=1e-4, pre_tol=1e-2)
        except ResidualTooLargeError:
            report.flags[k].append("decompose_failed")
            continue
        report.min_rate[k] = float(form.rates[0])
        report.rate_noise_floor[k] = noise
    return report


# ---------------------------------------------------------------------------
# Classifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Evidence:
    t: float
    witness: str
    value: float

    def to_json_dict(self) -> dict:
        return {"t": self.t, "witness": self.witness, "value": self.value}


@dataclass(frozen=True)
class Classification:
    region: str
    evidence: tuple[Evidence, ...]

    def to_json_dict(self) -> dict:
        return {
            "region": self.region,
            "evidence": [e.to_json_dict() for e in self.evidence],
        }


def classify(
    family: MapFamily,
    grid: TimeGrid,
    tol: ToleranceConfig = ToleranceConfig(),
) -> Classification:
    """Place the family in one of the four regions.

    Precedence: smoothness/singularity evidence wins (it invalidates the
    other probes' preconditions), then non-invertibility, then the sign of
    the canonical rates along the grid. Deterministic for a fixed
    configuration.
    """
    _check_grid(family, grid)
    smooth = smoothness_probe(family, grid, tol)
    inv = invertibility_scan(family, grid, tol)

    ni_evidence = tuple(
        Evidence(float(inv.t[k]), "noninvertible", float(inv.min_sv[k]))
        for k in inv.flagged("ni")
    )
    nonc_evidence = []
    for k in smooth.flagged("nonsmooth"):
        nonc_evidence.append(Evidence(float(smooth.t[k]), "nonsmooth", float("nan")))
    for k in smooth.flagged("generator_norm"):
        nonc_evidence.append(Evidence(float(smooth.t[k]), "generator_norm", float(smooth.generator_norm[k])))
    if nonc_evidence:
        return Classification(REGION_NON_C_CLASS, tuple(nonc_evidence) + ni_evidence)
    if ni_evidence:
        return Classification(REGION_NON_INVERTIBLE, ni_evidence)

    negative = []
    floors = smooth.rate_noise_floor
    for k in range(len(smooth.t)):
        rate = smooth.min_rate[k]
        if not np.isfinite(rate):
            continue
        noise = floors[k] if floors is not None and np.isfinite(floors[k]) else 0.0
        threshold = tol.eig_tol * max(1.0, abs(rate)) + noise
        if rate < -threshold:
            negative.append(Evidence(float(smooth.t[k]), "negative_rate", float(rate)))
    if negative:
        return Classification(REGION_NON_MARKOV_INVERTIBLE, tuple(negative))

    finite = np.isfinite(smooth.min_rate)
    if np.any(finite):
        k_min = int(np.nanargmin(np.where(finite, smooth.min_rate, np.inf)))
        support = (Evidence(float(smooth.t[k_min]), "min_rate", float(smooth.min_rate[k_min])),)
    else:
        support = ()
    return Classification(REGION_MARKOV_RHP, support)
