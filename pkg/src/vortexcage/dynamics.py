"""First-order amplitudes after the pulse plus a direct-propagation oracle.

After the envelope has closed, the excited-state coefficients settle to

    B_jk = i G(eps_j, eps_k) M_jk

with the spectral factor G carrying both the rotating Gaussian weight at
detuning (eps_j - eps_k - omega) and its counter-rotating partner at
(eps_j - eps_k + omega).  The oracle integrates the Schroedinger equation in
the interaction picture with the full real field and is used to certify the
perturbative amplitudes in the weak-excitation regime.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import coupling, structure

__all__ = [
    "ExcitationState",
    "PerturbationBreakdownWarning",
    "excite",
    "propagate_oracle",
    "spectral_factor",
    "write_population_table",
]

VALIDITY_THRESHOLD = 0.05


class PerturbationBreakdownWarning(UserWarning):
    pass


def spectral_factor(eps_j, eps_k, omega: float, delta: float):
    """Post-pulse spectral weight sqrt(pi/d) [e^-(D-w)^2/4d + e^-(D+w)^2/4d].

    D = eps_j - eps_k.  Real and symmetric under (D, w) -> (-D, -w); the
    counter-rotating second Gaussian is negligible whenever w and D are
    large against the pulse bandwidth 2 sqrt(delta).
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    d = np.asarray(eps_j) - np.asarray(eps_k)
    pref = math.sqrt(math.pi / delta)
    return pref * (np.exp(-((d - omega) ** 2) / (4.0 * delta))
                   + np.exp(-((d + omega) ** 2) / (4.0 * delta)))


@dataclass(frozen=True, eq=False)
class ExcitationState:
    """Post-pulse amplitudes B[j, k] = i G M for every source k."""

    transitions: coupling.TransitionSet
    spectral: np.ndarray          # real G[j, k]
    amplitudes: np.ndarray        # complex B[j, k]
    validity_metric: float        # max over sources of total excited population
    validity_threshold: float
    breakdown: bool

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def spectral_weights(self) -> np.ndarray:
        """|G|^2 per (target, source) pair, the weights entering the DC sum."""
        return self.spectral**2


def excite(transitions: coupling.TransitionSet, basis: structure.Basis,
           validity_threshold: float = VALIDITY_THRESHOLD,
           warn: bool = True) -> ExcitationState:
    """TDPT amplitudes for every (source k, target j) pair in the set."""
    pulse = transitions.pulse
    eps_j = np.array([basis.orbitals[i].energy for i in transitions.unoccupied])
    eps_k = np.array([basis.orbitals[i].energy for i in transitions.occupied])
    g = spectral_factor(eps_j[:, None], eps_k[None, :], pulse.omega, pulse.delta)
    amps = 1j * g * transitions.matrix
    metric = float(np.max(np.sum(np.abs(amps) ** 2, axis=0)))
    breakdown = metric > validity_threshold
    if breakdown and warn:
        warnings.warn(
            f"excited population {metric:.3e} exceeds first-order validity "
            f"threshold {validity_threshold}", PerturbationBreakdownWarning)
    return ExcitationState(transitions=transitions, spectral=g, amplitudes=amps,
                           validity_metric=metric,
                           validity_threshold=validity_threshold,
                           breakdown=breakdown)


def propagate_oracle(basis: structure.Basis, pulse, grid, dt: float,
                     occupied=None, states=None, t_span=None,
                     norm_tol: float = 1e-8):
    """Directly integrated final coefficients, one occupied source at a time.

    The Hilbert space is spanned by ``states`` (default: all band-2 and
    band-3 orbitals).  The full real field enters as
    H(t) = env(t) [O e^-iwt + O^dag e^+iwt] with O the positive-frequency
    operator matrix; integration is fixed-step RK4 in the interaction
    picture.  Returns (coefficients, states) where coefficients[s, a] is the
    final amplitude of basis state a for source s (interaction picture, so
    post-pulse values are time-independent).

    Raises on carrier-unresolving steps (dt > 0.05 * 2pi/omega) and on norm
    drift beyond ``norm_tol``.
    """
    if states is None:
        states = basis.band_orbitals(2) + basis.band_orbitals(3)
    if occupied is None:
        occupied = [o for o in states if o.occupied]
    if dt > 0.05 * 2.0 * math.pi / pulse.omega:
        raise ValueError(f"dt={dt} too coarse for carrier period "
                         f"{2 * math.pi / pulse.omega:.3f}")
    if t_span is None:
        half = 6.0 / math.sqrt(pulse.delta)
        t_span = (-half, half)
    op = coupling.interaction_matrix(pulse, basis, states, states, grid)
    eps = np.array([o.energy for o in states])
    pos = {o.index: a for a, o in enumerate(states)}
    omega = pulse.omega
    delta = pulse.delta

    def deriv(t, c):
        env = math.exp(-delta * t * t)
        phase = np.exp(1j * eps * t)
        h = env * (op * np.exp(-1j * omega * t) + op.conj().T * np.exp(1j * omega * t))
        # interaction picture: i dc/dt = e^{i eps_a t} H_ab e^{-i eps_b t} c_b
        return -1j * phase * (h @ (c / phase))

    t0, t1 = t_span
    n_steps = int(math.ceil((t1 - t0) / dt))
    coeffs = np.zeros((len(occupied), len(states)), dtype=complex)
    for s, source in enumerate(occupied):
        c = np.zeros(len(states), dtype=complex)
        c[pos[source.index]] = 1.0
        t = t0
        for _ in range(n_steps):
            step = min(dt, t1 - t)
            k1 = deriv(t, c)
            k2 = deriv(t + 0.5 * step, c + 0.5 * step * k1)
            k3 = deriv(t + 0.5 * step, c + 0.5 * step * k2)
            k4 = deriv(t + step, c + step * k3)
            c = c + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += step
        drift = abs(float(np.sum(np.abs(c) ** 2)) - 1.0)
        if drift > norm_tol:
            raise RuntimeError(f"norm drift {drift:.3e} exceeds {norm_tol}; "
                               f"reduce dt")
        coeffs[s] = c
    return coeffs, states


def write_population_table(state: ExcitationState, basis: structure.Basis,
                           path):
    """Text dump: k j eps_k eps_j |M| G |B|^2."""
    ts = state.transitions
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# k j eps_k eps_j abs_m g pop\n")
        for kc, k_idx in enumerate(ts.occupied):
            for jr, j_idx in enumerate(ts.unoccupied):
                fh.write(
                    f"{k_idx} {j_idx} "
                    f"{basis.orbitals[k_idx].energy:.17g} "
                    f"{basis.orbitals[j_idx].energy:.17g} "
                    f"{abs(ts.matrix[jr, kc]):.17g} "
                    f"{state.spectral[jr, kc]:.17g} "
                    f"{abs(state.amplitudes[jr, kc])**2:.17g}\n")
