"""Linear stochastic models and temporal-mode output covariances.

This module is the numeric oracle against which the closed forms are
checked.  It builds the quadrature-level drift/diffusion description of
either the full three-mode model (two cavities and the mirror) or the
reduced mirror model obtained by adiabatic elimination, augments the state
with one linear filter accumulator per temporal output mode, and integrates
the joint second-moment equation

    dS/dt = M(t) S + S M(t)^T + B(t) Sigma B(t)^T

from the factorized initial state (cavities vacuum, mirror thermal) to the
end of the pulse.  Filter accumulators integrate the matched exponential
envelopes against the instantaneous output fields, which mix system state
and direct input noise; the shared white-noise channels make the filter
accumulators and the system state co-diffuse, and that cross-diffusion is
exact in this formulation.

Quadrature layout: system modes first, two rows (X, P) per mode, filters
appended in kernel order.  Symmetric ordering, vacuum variance 1/2.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    IntegratorFailure,
    InsufficientTrajectories,
    InvalidParams,
    MissingModes,
)
from .model import DerivedQuantities, ReducedParams, derived_quantities

# canonical mode labels
A_M_OUT = "A_m_out"
A_1_OUT = "A_1_out"
A_2_OUT = "A_2_out"
A_1_IN = "A_1_in"
A_2_IN = "A_2_in"
B_M = "B_m"
B_TILDE = "B_tilde_m"
A_TILDE_1_IN = "A_tilde_1_in"
A_TILDE_2_IN = "A_tilde_2_in"
W_OUT = "W_out"
U_OUT = "U_out"
W_TILDE_IN = "W_tilde_in"
U_TILDE_IN = "U_tilde_in"

DEFAULT_OUTPUT_MODES = (A_1_OUT, A_2_OUT, B_TILDE, A_TILDE_1_IN, A_TILDE_2_IN)


@dataclass(frozen=True)
class NoiseChannel:
    """One bosonic white-noise input; symmetric-ordering intensity is
    ``occupation + 1/2`` per quadrature."""

    name: str
    occupation: float


@dataclass(frozen=True)
class LinearModel:
    """Quadrature-level linear stochastic model ``dz = A z dt + B xi dt``.

    ``mode_labels`` are the system bosonic modes (the mirror last), ``drift``
    the real (2m, 2m) drift matrix, ``noise_input`` the (2m, 2c) routing of
    the 2c noise quadratures into the state, and ``initial_occupations`` the
    thermal occupation of each system mode at the start of the pulse.
    """

    mode_labels: tuple[str, ...]
    drift: np.ndarray
    noise_input: np.ndarray
    noise_channels: tuple[NoiseChannel, ...]
    initial_occupations: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.mode_labels)

    @property
    def noise_intensities(self) -> np.ndarray:
        """Per-quadrature symmetric-ordering intensities, length 2c."""
        return np.repeat([ch.occupation + 0.5 for ch in self.noise_channels], 2)

    @property
    def diffusion(self) -> np.ndarray:
        """Symmetric noise-intensity matrix ``B Sigma B^T``."""
        return (self.noise_input * self.noise_intensities) @ self.noise_input.T

    def channel_index(self, name: str) -> int:
        for i, ch in enumerate(self.noise_channels):
            if ch.name == name:
                return i
        raise MissingModes(f"noise channel {name!r} not in model")


@dataclass(frozen=True)
class KernelTerm:
    """One exponential coupling ``amplitude * exp(rate*t)`` of a temporal mode
    to a system mode or noise channel (``dagger`` for creation-type)."""

    kind: str  # "system" | "noise"
    target: str
    dagger: bool
    amplitude: complex
    rate: complex

    def envelope(self, t: float) -> complex:
        return self.amplitude * cmath.exp(self.rate * t)

    def l2_norm(self, tau: float) -> float:
        """L2 norm of the envelope over [0, tau]."""
        g2 = 2.0 * self.rate.real
        mag2 = abs(self.amplitude) ** 2
        if abs(g2 * tau) < 1e-12:
            return math.sqrt(mag2 * tau)
        return math.sqrt(mag2 * math.expm1(g2 * tau) / g2)


@dataclass(frozen=True)
class TemporalKernel:
    """A temporal output (or input) mode: a labelled list of kernel terms.

    ``direction`` records whether the defining envelope decays from the
    front of the pulse (input side) or grows toward its end (output side).
    The defining envelope of every standard mode is normalized to unit L2
    norm over the pulse, which ``normalization_norm`` exposes for checking.
    """

    label: str
    direction: str
    terms: tuple[KernelTerm, ...]

    def normalization_norm(self, tau: float) -> float:
        """L2 norm of the defining (first) envelope over [0, tau]."""
        return self.terms[0].l2_norm(tau)


def build_full_model(rp: ReducedParams) -> LinearModel:
    """Three-mode rotating-frame model with cavities kept dynamical.

    Cavity j decays at kappa and sits at detuning +/-Delta; each couples to
    the mirror through the two-mode-squeezing (phase-conjugating) term of
    strength g_j; the mirror decays at gamma into a bath of occupation n.
    """
    rp.validate()
    k, D, g1, g2, gm = rp.kappa, rp.Delta, rp.g1, rp.g2, rp.gamma
    drift = np.array([
        [-k,    D,   0.0,  0.0,  0.0, -g1],
        [-D,   -k,   0.0,  0.0, -g1,  0.0],
        [0.0,  0.0, -k,   -D,   0.0, -g2],
        [0.0,  0.0,  D,   -k,  -g2,  0.0],
        [0.0, -g1,  0.0, -g2,  -gm,  0.0],
        [-g1,  0.0, -g2,  0.0,  0.0, -gm],
    ])
    noise = np.zeros((6, 6))
    sk = math.sqrt(2.0 * k)
    sg = math.sqrt(2.0 * gm)
    noise[0, 0] = noise[1, 1] = noise[2, 2] = noise[3, 3] = -sk
    noise[4, 4] = noise[5, 5] = -sg
    return LinearModel(
        mode_labels=("a_1", "a_2", "b_m"),
        drift=drift,
        noise_input=noise,
        noise_channels=(NoiseChannel("a1_in", 0.0), NoiseChannel("a2_in", 0.0),
                        NoiseChannel("b_in", rp.n)),
        initial_occupations=(0.0, 0.0, rp.n0),
    )


def build_reduced_model(rp: ReducedParams) -> LinearModel:
    """Mirror-only model after adiabatic elimination of the cavities.

    The mirror amplitude grows at the net gain G and rotates at delta.  The
    eliminated cavities reappear as two amplified phase-conjugating noise
    channels with rates 2*G_j and phases +/-phi, alongside the mechanical
    damping channel.
    """
    dq = derived_quantities(rp)
    G1, G2, G, delta, phi = dq.G1, dq.G2, dq.G, dq.delta, dq.phi
    gm = rp.gamma
    drift = np.array([[G, -delta], [delta, G]])
    c, s = math.cos(phi), math.sin(phi)
    r1, r2, rg = math.sqrt(2.0 * G1), math.sqrt(2.0 * G2), math.sqrt(2.0 * gm)
    noise = np.array([
        [-r1 * s, r1 * c, r2 * s,  r2 * c, -rg, 0.0],
        [ r1 * c, r1 * s, r2 * c, -r2 * s, 0.0, -rg],
    ])
    return LinearModel(
        mode_labels=("b_m",),
        drift=drift,
        noise_input=noise,
        noise_channels=(NoiseChannel("a1_in", 0.0), NoiseChannel("a2_in", 0.0),
                        NoiseChannel("b_in", rp.n)),
        initial_occupations=(rp.n0,),
    )


def _norms(dq: DerivedQuantities, tau: float) -> tuple[float, float]:
    """(input-side, output-side) kernel normalizations."""
    G = dq.G
    n_in = math.sqrt(2.0 * G / -math.expm1(-2.0 * G * tau))
    n_out = math.sqrt(2.0 * G / math.expm1(2.0 * G * tau))
    return n_in, n_out


def output_kernels(rp: ReducedParams, *, full: bool,
                   which: tuple[str, ...] = DEFAULT_OUTPUT_MODES,
                   ) -> list[TemporalKernel]:
    """Growing-envelope temporal modes of the emitted and incident fields.

    For the full model the cavity output field is ``a_j_in + sqrt(2 kappa)
    a_j``; for the reduced model the eliminated cavity turns it into a
    reflected input plus a phase-conjugated mirror contribution.  Both
    decompositions filter the same physical signal, so either model feeds
    the identical mode definitions.
    """
    dq = derived_quantities(rp)
    _, n_out = _norms(dq, rp.tau)
    zout = complex(dq.G, dq.delta)
    zmir = complex(dq.G, -dq.delta)
    ph1 = cmath.exp(-1j * dq.phi)   # e^{(-1)^j i phi} for j = 1
    ph2 = cmath.exp(+1j * dq.phi)
    sqk = math.sqrt(2.0 * rp.kappa)

    def cavity_out(j: int) -> TemporalKernel:
        ph = ph1 if j == 1 else ph2
        G_j = dq.G1 if j == 1 else dq.G2
        if full:
            terms = (
                KernelTerm("noise", f"a{j}_in", False, ph.conjugate() * n_out, zout),
                KernelTerm("system", f"a_{j}", False, ph.conjugate() * n_out * sqk, zout),
            )
        else:
            terms = (
                KernelTerm("noise", f"a{j}_in", False, -ph * n_out, zout),
                KernelTerm("system", "b_m", True,
                           -1j * math.sqrt(2.0 * G_j) * n_out, zout),
            )
        return TemporalKernel(f"A_{j}_out", "output", terms)

    catalog = {
        A_1_OUT: lambda: cavity_out(1),
        A_2_OUT: lambda: cavity_out(2),
        B_TILDE: lambda: TemporalKernel(B_TILDE, "output", (
            KernelTerm("noise", "b_in", False, complex(n_out), zmir),)),
        A_TILDE_1_IN: lambda: TemporalKernel(A_TILDE_1_IN, "output", (
            KernelTerm("noise", "a1_in", False, ph1 * n_out, zout),)),
        A_TILDE_2_IN: lambda: TemporalKernel(A_TILDE_2_IN, "output", (
            KernelTerm("noise", "a2_in", False, ph2 * n_out, zout),)),
    }
    unknown = set(which) - set(catalog)
    if unknown:
        raise InvalidParams(f"unknown output modes {sorted(unknown)!r}")
    return [catalog[name]() for name in which]


def input_kernels(rp: ReducedParams) -> list[TemporalKernel]:
    """Decaying-envelope temporal modes of the incident fields (front-loaded):
    ``A_1_in``, ``A_2_in`` and the mirror-bath mode ``B_m``."""
    dq = derived_quantities(rp)
    n_in, _ = _norms(dq, rp.tau)
    zin = complex(-dq.G, dq.delta)
    zbath = complex(-dq.G, -dq.delta)
    ph1 = cmath.exp(-1j * dq.phi)
    ph2 = cmath.exp(+1j * dq.phi)
    return [
        TemporalKernel(A_1_IN, "input", (
            KernelTerm("noise", "a1_in", False, ph1 * n_in, zin),)),
        TemporalKernel(A_2_IN, "input", (
            KernelTerm("noise", "a2_in", False, ph2 * n_in, zin),)),
        TemporalKernel(B_M, "input", (
            KernelTerm("noise", "b_in", False, complex(n_in), zbath),)),
    ]


def collective_output_kernels(rp: ReducedParams, *, full: bool = False,
                              ) -> list[TemporalKernel]:
    """Direct filters for the collective modes W_out, U_out and the constant
    of motion U_tilde_in, bypassing the per-mode covariance transform."""
    dq = derived_quantities(rp)
    _, n_out = _norms(dq, rp.tau)
    gamma = dq.gamma
    G = dq.G
    w1, w2, wg = (math.sqrt(dq.G1 / G), math.sqrt(dq.G2 / G),
                  math.sqrt(gamma / G))
    a1, a2, bt, t1, t2 = output_kernels(
        rp, full=full,
        which=(A_1_OUT, A_2_OUT, B_TILDE, A_TILDE_1_IN, A_TILDE_2_IN))

    def scaled(kern: TemporalKernel, w: float) -> tuple[KernelTerm, ...]:
        return tuple(
            KernelTerm(t.kind, t.target, t.dagger, w * t.amplitude, t.rate)
            for t in kern.terms)

    def conj_dag(kern: TemporalKernel, w: complex) -> tuple[KernelTerm, ...]:
        # w * mode^dag : conjugate envelopes, flip dagger flags
        return tuple(
            KernelTerm(t.kind, t.target, not t.dagger,
                       w * t.amplitude.conjugate(), t.rate.conjugate())
            for t in kern.terms)

    w_out = TemporalKernel(W_OUT, "output",
                           scaled(a1, w1) + scaled(a2, w2)
                           + conj_dag(bt, 1j * wg))
    u_out = TemporalKernel(U_OUT, "output",
                           scaled(a1, w2) + scaled(a2, -w1)
                           + conj_dag(bt, 1j * wg))
    u_tilde = TemporalKernel(U_TILDE_IN, "output",
                             scaled(t1, w2) + scaled(t2, -w1)
                             + conj_dag(bt, -1j * wg))
    return [w_out, u_out, u_tilde]


def mirror_output_phase(rp: ReducedParams) -> float:
    """Rotation angle delta*tau that defines the mirror output mode."""
    dq = derived_quantities(rp)
    return dq.delta * rp.tau


@dataclass(frozen=True)
class OutputCovariance:
    """Symmetrized quadrature covariance over a declared list of modes.

    Layout: two rows (X, P) per mode in ``mode_labels`` order.  For Monte
    Carlo results ``standard_errors`` carries the per-entry statistical
    error of the covariance estimate.
    """

    mode_labels: tuple[str, ...]
    sigma: np.ndarray
    standard_errors: np.ndarray | None = None

    def __post_init__(self) -> None:
        nq = 2 * len(self.mode_labels)
        if self.sigma.shape != (nq, nq):
            raise InvalidParams(
                f"sigma shape {self.sigma.shape} does not match "
                f"{len(self.mode_labels)} modes")

    def index(self, label: str, quad: str = "X") -> int:
        if label not in self.mode_labels:
            raise MissingModes(f"mode {label!r} not in covariance "
                               f"(have {list(self.mode_labels)})")
        return 2 * self.mode_labels.index(label) + (0 if quad == "X" else 1)

    def variance(self, label: str, quad: str = "X") -> float:
        i = self.index(label, quad)
        return float(self.sigma[i, i])

    def covariance(self, sel1: tuple[str, str], sel2: tuple[str, str]) -> float:
        return float(self.sigma[self.index(*sel1), self.index(*sel2)])

    def block(self, labels: tuple[str, ...]) -> "OutputCovariance":
        idx = []
        for lab in labels:
            idx.extend((self.index(lab, "X"), self.index(lab, "P")))
        idx = np.asarray(idx)
        se = None
        if self.standard_errors is not None:
            se = self.standard_errors[np.ix_(idx, idx)]
        return OutputCovariance(tuple(labels), self.sigma[np.ix_(idx, idx)], se)

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.sigma)


def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a quadrature covariance matrix.

    Uses the symplectic form of 2x2 blocks [[0, 1], [-1, 0]]; a physical
    state has every eigenvalue >= 1/2 in our units.
    """
    nq = sigma.shape[0]
    if nq % 2 or sigma.shape != (nq, nq):
        raise InvalidParams(f"covariance must be (2n, 2n), got {sigma.shape}")
    omega = np.zeros((nq, nq))
    for k in range(nq // 2):
        omega[2 * k, 2 * k + 1] = 1.0
        omega[2 * k + 1, 2 * k] = -1.0
    ev = np.linalg.eigvals(1j * omega @ sigma)
    # eigenvalues come in +/- pairs; keep one of each
    return np.sort(np.abs(ev))[::2]


class _Assembler:
    """Precomputed routing for the augmented moment equation."""

    def __init__(self, model: LinearModel, kernels: list[TemporalKernel]):
        labels = [k.label for k in kernels]
        if len(set(labels)) != len(labels):
            raise InvalidParams(f"duplicate kernel labels in {labels!r}")
        self.model = model
        self.kernels = kernels
        self.n_sys = 2 * model.dimension
        self.n = self.n_sys + 2 * len(kernels)
        self.n_noise = 2 * len(model.noise_channels)
        self.sig = model.noise_intensities
        sys_index = {lab: i for i, lab in enumerate(model.mode_labels)}
        # (row_x, col_x, dagger, amplitude, rate, into_system?) per term
        self.routes = []
        for k, kern in enumerate(kernels):
            row = self.n_sys + 2 * k
            for t in kern.terms:
                if t.kind == "system":
                    col = 2 * sys_index[t.target]
                    self.routes.append((row, col, t.dagger, t.amplitude,
                                        t.rate, True))
                elif t.kind == "noise":
                    col = 2 * model.channel_index(t.target)
                    self.routes.append((row, col, t.dagger, t.amplitude,
                                        t.rate, False))
                else:
                    raise InvalidParams(f"unknown kernel term kind {t.kind!r}")

    def matrices(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(M(t), B(t)) of the augmented linear system."""
        M = np.zeros((self.n, self.n))
        B = np.zeros((self.n, self.n_noise))
        M[:self.n_sys, :self.n_sys] = self.model.drift
        B[:self.n_sys, :] = self.model.noise_input
        for row, col, dagger, amp, rate, into_sys in self.routes:
            c = amp * cmath.exp(rate * t)
            re, im = c.real, c.imag
            tgt = M if into_sys else B
            s = 1.0 if dagger else -1.0
            tgt[row, col] += re
            tgt[row, col + 1] += s * im
            tgt[row + 1, col] += im
            tgt[row + 1, col + 1] += -s * re
        return M, B

    def initial_covariance(self) -> np.ndarray:
        S0 = np.zeros((self.n, self.n))
        for i, occ in enumerate(self.model.initial_occupations):
            S0[2 * i, 2 * i] = S0[2 * i + 1, 2 * i + 1] = occ + 0.5
        return S0

    def mirror_rotation(self, phase: float) -> np.ndarray:
        """Rotation of the terminal mirror quadratures by ``phase``."""
        R = np.eye(self.n)
        i = self.n_sys - 2  # mirror is the last system mode
        c, s = math.cos(phase), math.sin(phase)
        R[i, i] = c
        R[i, i + 1] = s
        R[i + 1, i] = -s
        R[i + 1, i + 1] = c
        return R

    def output_selection(self) -> tuple[tuple[str, ...], np.ndarray]:
        """Kept labels and quadrature indices: mirror-at-tau plus filters."""
        idx = [self.n_sys - 2, self.n_sys - 1] + list(range(self.n_sys, self.n))
        labels = (A_M_OUT,) + tuple(k.label for k in self.kernels)
        return labels, np.asarray(idx)


def propagate_output_covariance(model: LinearModel,
                                kernels: list[TemporalKernel],
                                tau: float, tol: float = 1e-9, *,
                                terminal_phase: float = 0.0,
                                ) -> OutputCovariance:
    """Deterministic second-moment propagation over one pulse.

    Integrates the joint covariance of the system state and the filter
    accumulators with an adaptive embedded Runge-Kutta pair (DOP853) at
    relative tolerance ``tol``; moments of a linear system are exact, so
    the integration tolerance is the only error source.  The mirror state
    at the end of the pulse is rotated by ``terminal_phase`` and returned
    as the mode ``A_m_out`` alongside all filtered modes.
    """
    if not tau > 0.0:
        raise InvalidParams(f"tau must be > 0, got {tau!r}")
    if not tol > 0.0:
        raise InvalidParams(f"tol must be > 0, got {tol!r}")
    asm = _Assembler(model, kernels)
    n = asm.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        S = y.reshape(n, n)
        M, B = asm.matrices(t)
        dS = M @ S + S @ M.T + (B * asm.sig) @ B.T
        return dS.ravel()

    sol = solve_ivp(rhs, (0.0, tau), asm.initial_covariance().ravel(),
                    method="DOP853", rtol=tol, atol=tol * 1e-3)
    if not sol.success:
        raise IntegratorFailure(f"moment integration failed: {sol.message}")
    S = sol.y[:, -1].reshape(n, n)
    S = 0.5 * (S + S.T)
    R = asm.mirror_rotation(terminal_phase)
    S = R @ S @ R.T
    labels, idx = asm.output_selection()
    return OutputCovariance(labels, S[np.ix_(idx, idx)])


def _transition_maps(asm: _Assembler, tau: float, n_steps: int,
                     substeps: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-step transition matrices and noise-injection square roots.

    Over each grid step the pair (Phi, Q) solves dPhi/dt = M Phi and
    dQ/dt = M Q + Q M^T + V with Phi = I, Q = 0 at the step start; a fixed
    number of classical RK4 substeps integrates them to high accuracy.  The
    sampled update ``z -> Phi z + sqrt(Q) eta`` then has the exact one-step
    distribution for any step size.
    """
    n = asm.n
    h = tau / n_steps
    hs = h / substeps
    phis = np.empty((n_steps, n, n))
    sqrts = np.empty((n_steps, n, n))

    def deriv(t: float, phi: np.ndarray, q: np.ndarray):
        M, B = asm.matrices(t)
        V = (B * asm.sig) @ B.T
        return M @ phi, M @ q + q @ M.T + V

    for k in range(n_steps):
        phi = np.eye(n)
        q = np.zeros((n, n))
        t = k * h
        for _ in range(substeps):
            k1p, k1q = deriv(t, phi, q)
            k2p, k2q = deriv(t + hs / 2, phi + hs / 2 * k1p, q + hs / 2 * k1q)
            k3p, k3q = deriv(t + hs / 2, phi + hs / 2 * k2p, q + hs / 2 * k2q)
            k4p, k4q = deriv(t + hs, phi + hs * k3p, q + hs * k3q)
            phi = phi + hs / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            q = q + hs / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
            t += hs
        q = 0.5 * (q + q.T)
        w, vec = np.linalg.eigh(q)
        sqrts[k] = vec * np.sqrt(np.clip(w, 0.0, None))
        phis[k] = phi
    return phis, sqrts


def monte_carlo_output_covariance(model: LinearModel,
                                  kernels: list[TemporalKernel],
                                  tau: float, trajectories: int, seed: int, *,
                                  n_steps: int = 256, substeps: int = 4,
                                  batch_size: int = 512, threads: int = 1,
                                  terminal_phase: float = 0.0,
                                  se_bound: float | None = None,
                                  ) -> OutputCovariance:
    """Stochastic cross-check of the deterministic propagation.

    Classical complex Gaussian trajectories whose noise covariances equal
    the symmetric-ordered quantum intensities reproduce all symmetrized
    moments of the linear dynamics.  Each trajectory draws from its own
    counter-based Philox stream keyed by (seed, trajectory index), and
    batches are reduced in fixed index order, so the result is reproducible
    bit for bit regardless of the thread count.  The per-step transition
    maps are exact (see ``_transition_maps``), so the step count affects
    only which random numbers are drawn, not the estimator's bias.

    Raises ``InsufficientTrajectories`` for fewer than 10^3 trajectories or
    when the largest standard error exceeds ``se_bound``.
    """
    if trajectories < 1000:
        raise InsufficientTrajectories(
            f"need >= 1000 trajectories, got {trajectories}")
    if not tau > 0.0:
        raise InvalidParams(f"tau must be > 0, got {tau!r}")
    asm = _Assembler(model, kernels)
    n = asm.n
    phis, sqrts = _transition_maps(asm, tau, n_steps, substeps)
    rot = asm.mirror_rotation(terminal_phase)
    init_std = np.sqrt(np.diag(asm.initial_covariance()))
    key_hi = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)

    def run_batch(b0: int) -> tuple[np.ndarray, np.ndarray, int]:
        nb = min(batch_size, trajectories - b0)
        noise = np.empty((n_steps, n, nb))
        z = np.empty((n, nb))
        for j in range(nb):
            gen = np.random.Generator(np.random.Philox(
                key=np.array([key_hi, np.uint64(b0 + j)], dtype=np.uint64)))
            z[:, j] = init_std * gen.standard_normal(n)
            noise[:, :, j] = gen.standard_normal((n_steps, n))
        for k in range(n_steps):
            z = phis[k] @ z + sqrts[k] @ noise[k]
        z = rot @ z
        prod = z[:, None, :] * z[None, :, :]
        return prod.sum(axis=2), (prod ** 2).sum(axis=2), nb

    starts = list(range(0, trajectories, batch_size))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_batch, starts))
    else:
        results = [run_batch(b0) for b0 in starts]

    tot = np.zeros((n, n))
    tot2 = np.zeros((n, n))
    for s1, s2, _ in results:  # fixed index order
        tot += s1
        tot2 += s2
    mean = tot / trajectories
    se = np.sqrt(np.maximum(tot2 / trajectories - mean ** 2, 0.0)
                 / trajectories)

    labels, idx = asm.output_selection()
    sigma = mean[np.ix_(idx, idx)]
    errors = se[np.ix_(idx, idx)]
    if se_bound is not None and float(errors.max()) > se_bound:
        raise InsufficientTrajectories(
            f"max standard error {errors.max():.3g} exceeds bound {se_bound}")
    return OutputCovariance(labels, 0.5 * (sigma + sigma.T), errors)


def collective_transform(oc: OutputCovariance, dq: DerivedQuantities,
                         ) -> OutputCovariance:
    """Exact quadrature-level combination into the collective W/U modes.

    Consumes ``A_1_out``, ``A_2_out`` and the filtered mirror-bath mode and
    returns the covariance over ``W_out`` and ``U_out`` (the conjugated bath
    term swaps X and P roles).  ``A_m_out`` passes through when present, and
    the input-side aliases produce ``W_tilde_in``/``U_tilde_in`` when their
    constituents are present.
    """
    needed = (A_1_OUT, A_2_OUT, B_TILDE)
    for lab in needed:
        if lab not in oc.mode_labels:
            raise MissingModes(f"collective transform needs {lab!r} "
                               f"(have {list(oc.mode_labels)})")
    G = dq.G
    w1, w2, wg = (math.sqrt(dq.G1 / G), math.sqrt(dq.G2 / G),
                  math.sqrt(dq.gamma / G))

    out_labels: list[str] = []
    rows: list[np.ndarray] = []
    nq = oc.sigma.shape[0]

    def row(entries: list[tuple[str, str, float]]) -> np.ndarray:
        v = np.zeros(nq)
        for lab, quad, w in entries:
            v[oc.index(lab, quad)] = w
        return v

    if A_M_OUT in oc.mode_labels:
        out_labels.append(A_M_OUT)
        rows.append(row([(A_M_OUT, "X", 1.0)]))
        rows.append(row([(A_M_OUT, "P", 1.0)]))

    out_labels.append(W_OUT)
    rows.append(row([(A_1_OUT, "X", w1), (A_2_OUT, "X", w2), (B_TILDE, "P", wg)]))
    rows.append(row([(A_1_OUT, "P", w1), (A_2_OUT, "P", w2), (B_TILDE, "X", wg)]))
    out_labels.append(U_OUT)
    rows.append(row([(A_1_OUT, "X", w2), (A_2_OUT, "X", -w1), (B_TILDE, "P", wg)]))
    rows.append(row([(A_1_OUT, "P", w2), (A_2_OUT, "P", -w1), (B_TILDE, "X", wg)]))

    if A_TILDE_1_IN in oc.mode_labels and A_TILDE_2_IN in oc.mode_labels:
        out_labels.append(W_TILDE_IN)
        rows.append(row([(A_TILDE_1_IN, "X", w1), (A_TILDE_2_IN, "X", w2),
                         (B_TILDE, "P", -wg)]))
        rows.append(row([(A_TILDE_1_IN, "P", w1), (A_TILDE_2_IN, "P", w2),
                         (B_TILDE, "X", -wg)]))
        out_labels.append(U_TILDE_IN)
        rows.append(row([(A_TILDE_1_IN, "X", w2), (A_TILDE_2_IN, "X", -w1),
                         (B_TILDE, "P", -wg)]))
        rows.append(row([(A_TILDE_1_IN, "P", w2), (A_TILDE_2_IN, "P", -w1),
                         (B_TILDE, "X", -wg)]))

    T = np.vstack(rows)
    return OutputCovariance(tuple(out_labels), T @ oc.sigma @ T.T)


def output_covariance(rp: ReducedParams, *, engine: str = "reduced",
                      tol: float = 1e-9, collective: bool = True,
                      ) -> OutputCovariance:
    """One-call oracle over the standard mode set.

    Builds the requested model and the standard output kernels, propagates
    through the pulse, and (with ``collective=True``) appends the collective
    modes W_out, U_out, W_tilde_in and U_tilde_in with exact cross moments
    to everything else.
    """
    if engine == "reduced":
        model = build_reduced_model(rp)
    elif engine == "full":
        model = build_full_model(rp)
    else:
        raise InvalidParams(f"engine must be 'reduced' or 'full', got {engine!r}")
    kernels = output_kernels(rp, full=(engine == "full"))
    oc = propagate_output_covariance(model, kernels, rp.tau, tol,
                                     terminal_phase=mirror_output_phase(rp))
    if not collective:
        return oc

    dq = derived_quantities(rp)
    G = dq.G
    w1, w2, wg = (math.sqrt(dq.G1 / G), math.sqrt(dq.G2 / G),
                  math.sqrt(dq.gamma / G))
    nq = oc.sigma.shape[0]

    def row(entries: list[tuple[str, str, float]]) -> np.ndarray:
        v = np.zeros(nq)
        for lab, quad, w in entries:
            v[oc.index(lab, quad)] = w
        return v

    collective_rows = {
        W_OUT: ([(A_1_OUT, "X", w1), (A_2_OUT, "X", w2), (B_TILDE, "P", wg)],
                [(A_1_OUT, "P", w1), (A_2_OUT, "P", w2), (B_TILDE, "X", wg)]),
        U_OUT: ([(A_1_OUT, "X", w2), (A_2_OUT, "X", -w1), (B_TILDE, "P", wg)],
                [(A_1_OUT, "P", w2), (A_2_OUT, "P", -w1), (B_TILDE, "X", wg)]),
        W_TILDE_IN: ([(A_TILDE_1_IN, "X", w1), (A_TILDE_2_IN, "X", w2),
                      (B_TILDE, "P", -wg)],
                     [(A_TILDE_1_IN, "P", w1), (A_TILDE_2_IN, "P", w2),
                      (B_TILDE, "X", -wg)]),
        U_TILDE_IN: ([(A_TILDE_1_IN, "X", w2), (A_TILDE_2_IN, "X", -w1),
                      (B_TILDE, "P", -wg)],
                     [(A_TILDE_1_IN, "P", w2), (A_TILDE_2_IN, "P", -w1),
                      (B_TILDE, "X", -wg)]),
    }
    rows = [np.eye(nq)]
    labels = list(oc.mode_labels)
    for lab, (rx, rp_row) in collective_rows.items():
        labels.append(lab)
        rows.append(row(rx)[None, :])
        rows.append(row(rp_row)[None, :])
    T = np.vstack(rows)
    return OutputCovariance(tuple(labels), T @ oc.sigma @ T.T)


def mode_cross_correlation(oc: OutputCovariance, label1: str, label2: str,
                           ) -> tuple[complex, float | None]:
    """Symmetrized ``<mode1^dag mode2>`` and, for Monte Carlo covariances,
    its linearized standard error on the magnitude."""
    x1, p1 = oc.index(label1, "X"), oc.index(label1, "P")
    x2, p2 = oc.index(label2, "X"), oc.index(label2, "P")
    s = oc.sigma
    value = 0.5 * (s[x1, x2] + s[p1, p2]) + 0.5j * (s[x1, p2] - s[p1, x2])
    if oc.standard_errors is None:
        return value, None
    e = oc.standard_errors
    se_re = 0.5 * math.hypot(e[x1, x2], e[p1, p2])
    se_im = 0.5 * math.hypot(e[x1, p2], e[p1, x2])
    mag = abs(value)
    if mag == 0.0:
        return value, max(se_re, se_im)
    se_mag = math.hypot(value.real * se_re, value.imag * se_im) / mag
    return value, se_mag
