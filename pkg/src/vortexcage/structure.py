"""Model electronic basis: radial shell bands with parabolic l-dispersion.

Orbitals are shell functions R_n(r) * sum_m C_m Y_lm(theta, phi).  Radial
band profiles are Gaussian shells, orthonormalized across bands (sequential
Gram-Schmidt in band order) so that the full orbital set is orthonormal;
the orthogonalization is what gives the diffuse top band its radial nodes.
Band energies follow E_n + l(l+1)/(2 R^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import numerics
from .units import ev_to_hartree

__all__ = [
    "BandSpec",
    "Basis",
    "Orbital",
    "SymmetryTable",
    "build_basis",
    "default_bands",
    "degenerate_groups",
    "evaluate_gradient",
    "evaluate_orbital",
    "load_symmetry_coefficients",
    "orbital_tables",
    "parabolic_energy",
    "radial_profile",
]

DEFAULT_CAGE_RADIUS = 6.7   # bohr, averaged molecular radius
DEFAULT_ETA = 1e-6          # hartree, degeneracy tolerance for DC interference


@dataclass(frozen=True)
class BandSpec:
    """One radial band: shell geometry, l range, band offset, filling."""

    n: int
    energy_offset: float        # hartree
    l_max: int
    shell_radius: float         # bohr
    shell_width: float          # bohr
    electron_count: int
    # m values occupied in the topmost partially filled shell (spherical
    # mode); None selects the lowest-|m| set.
    partial_shell_m: tuple[int, ...] | None = None


def default_bands() -> tuple[BandSpec, ...]:
    """Bands mirroring a C60-like shell model.

    Band 2 (valence, 60 electrons, l <= 5) and band 3 (diffuse virtual
    shells, l <= 3) are the transition-active pair; band 1 is inert
    bookkeeping.  Offsets are model choices placing the band-2 -> band-3
    gaps inside the 5-18 eV excitation window.
    """
    e2 = -0.30
    return (
        BandSpec(n=1, energy_offset=-0.80, l_max=9, shell_radius=6.7,
                 shell_width=0.45, electron_count=180),
        BandSpec(n=2, energy_offset=e2, l_max=5, shell_radius=6.7,
                 shell_width=0.9, electron_count=60),
        BandSpec(n=3, energy_offset=e2 + ev_to_hartree(8.0), l_max=3,
                 shell_radius=6.7, shell_width=3.0, electron_count=0),
    )


def parabolic_energy(band: BandSpec, l: int, cage_radius: float) -> float:
    """Orbital energy E_n + l(l+1)/(2 R^2) in hartree."""
    if l < 0 or l > band.l_max:
        raise ValueError(f"l={l} outside band {band.n} range [0, {band.l_max}]")
    return band.energy_offset + l * (l + 1) / (2.0 * cage_radius**2)


# ---------------------------------------------------------------------------
# radial shells
# ---------------------------------------------------------------------------

def radial_profile(band: BandSpec, r) -> np.ndarray:
    """Bare normalized shell profile N exp(-(r-R_n)^2 / (2 sigma_n^2)).

    Normalized against the r^2 measure: integral of |R|^2 r^2 dr over
    [0, inf) equals 1.  This is the per-band building block; basis orbitals
    use the cross-band orthonormalized combinations.
    """
    shells = _shell_cache((band,))
    return shells.bare(0, np.asarray(r, dtype=float))


class RadialShellSet:
    """Orthonormalized radial functions built from Gaussian shell profiles."""

    def __init__(self, centers, widths):
        self.centers = np.asarray(centers, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        r_up = float(np.max(self.centers + 8.0 * self.widths))
        r_up = max(r_up, 4.0 * float(np.max(self.centers)))
        rr, ww = numerics.gauss_legendre(600, 0.0, r_up)
        gauss = np.exp(-((rr[None, :] - self.centers[:, None]) ** 2)
                       / (2.0 * self.widths[:, None] ** 2))
        norms = np.sqrt(np.einsum("r,ir->i", ww * rr * rr, gauss**2))
        self.bare_norms = 1.0 / norms
        bare = gauss * self.bare_norms[:, None]
        gram = np.einsum("ir,jr,r->ij", bare, bare, ww * rr * rr)
        # inv(L) rows give sequential Gram-Schmidt combinations of the bare
        # profiles: R_i = sum_j ortho[i, j] bare_j with <R_i|R_j> = delta_ij
        chol = np.linalg.cholesky(gram)
        self.ortho = np.linalg.inv(chol)

    def _bare_all(self, r):
        r = np.asarray(r, dtype=float)
        return self.bare_norms[:, None] * np.exp(
            -((r[None, :] - self.centers[:, None]) ** 2)
            / (2.0 * self.widths[:, None] ** 2))

    def _bare_d_all(self, r):
        r = np.asarray(r, dtype=float)
        g = self._bare_all(r)
        return -(r[None, :] - self.centers[:, None]) / self.widths[:, None] ** 2 * g

    def bare(self, i: int, r):
        return self._bare_all(np.atleast_1d(r))[i].reshape(np.shape(r))

    def values(self, r):
        """Orthonormalized profiles, shape (n_shells, len(r))."""
        return self.ortho @ self._bare_all(r)

    def derivatives(self, r):
        return self.ortho @ self._bare_d_all(r)


_SHELL_CACHE: dict[tuple, RadialShellSet] = {}


def _shell_cache(bands: tuple[BandSpec, ...]) -> RadialShellSet:
    key = tuple((b.shell_radius, b.shell_width) for b in bands)
    if key not in _SHELL_CACHE:
        _SHELL_CACHE[key] = RadialShellSet([k[0] for k in key], [k[1] for k in key])
    return _SHELL_CACHE[key]


# ---------------------------------------------------------------------------
# orbitals and basis assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Orbital:
    index: int
    band: int                 # principal index n
    band_pos: int             # position of the band in Basis.bands
    l: int
    rep_label: str
    lam: int
    energy: float             # hartree
    coeffs: np.ndarray        # complex, length 2l+1, entry m+l
    occupied: bool

    def dominant_m(self) -> int:
        return int(np.argmax(np.abs(self.coeffs))) - self.l


@dataclass(frozen=True, eq=False)
class Basis:
    bands: tuple[BandSpec, ...]
    orbitals: tuple[Orbital, ...]
    cage_radius: float
    shells: RadialShellSet

    spin_degeneracy = 2

    @property
    def l_max(self) -> int:
        return max(b.l_max for b in self.bands)

    def occupied(self) -> list[Orbital]:
        return [o for o in self.orbitals if o.occupied]

    def unoccupied(self) -> list[Orbital]:
        return [o for o in self.orbitals if not o.occupied]

    def band_orbitals(self, n: int) -> list[Orbital]:
        return [o for o in self.orbitals if o.band == n]


def _lowest_m_order(l: int) -> list[int]:
    # 0, -1, +1, -2, +2, ... : symmetric fill order for degenerate shells
    order = [0]
    for m in range(1, l + 1):
        order += [-m, m]
    return order


def _spherical_substates(l: int):
    return [(f"m{m:+d}", m, _one_hot(l, m)) for m in range(-l, l + 1)]


def _one_hot(l: int, m: int) -> np.ndarray:
    c = np.zeros(2 * l + 1, dtype=complex)
    c[m + l] = 1.0
    return c


def build_basis(bands: tuple[BandSpec, ...] | None = None,
                cage_radius: float = DEFAULT_CAGE_RADIUS,
                symmetry_table: "SymmetryTable | None" = None) -> Basis:
    """Enumerate orbitals in (n, l, substate) order with energies and filling.

    In spherical mode coefficients are one-hot in m.  With a symmetry table
    the tabulated (l, rep, lambda) combinations replace the one-hot set for
    every l they cover; substate order then follows the table.
    """
    if bands is None:
        bands = default_bands()
    shells = _shell_cache(bands)
    orbitals: list[Orbital] = []
    index = 0
    for pos, band in enumerate(bands):
        if band.electron_count % 2:
            raise ValueError(f"band {band.n}: odd electron count "
                             f"{band.electron_count} (spin pairing)")
        n_spatial = (band.l_max + 1) ** 2
        n_fill = band.electron_count // 2
        if n_fill > n_spatial:
            raise ValueError(
                f"band {band.n}: {band.electron_count} electrons exceed "
                f"{2 * n_spatial} available slots")
        band_orbs: list[Orbital] = []
        for l in range(band.l_max + 1):
            if symmetry_table is not None and symmetry_table.covers(l):
                subs = symmetry_table.substates(l)
            else:
                subs = _spherical_substates(l)
            energy = parabolic_energy(band, l, cage_radius)
            for rep, lam, coeffs in subs:
                band_orbs.append(Orbital(
                    index=0, band=band.n, band_pos=pos, l=l, rep_label=rep,
                    lam=lam, energy=energy, coeffs=coeffs, occupied=False))
        covered = {l for l in range(band.l_max + 1)
                   if symmetry_table is not None and symmetry_table.covers(l)}
        band_orbs = _apply_occupation(band, band_orbs, n_fill, covered)
        for orb in band_orbs:
            orbitals.append(replace(orb, index=index))
            index += 1
    return Basis(bands=tuple(bands), orbitals=tuple(orbitals),
                 cage_radius=cage_radius, shells=shells)


def _apply_occupation(band, band_orbs, n_fill, table_shells):
    # fill whole shells lowest-l first; a partially filled shell takes the
    # lowest-|m| substates (spherical), the first table rows (when the table
    # covers that l), or an explicit per-band m selection.
    filled = []
    remaining = n_fill
    for l in range(band.l_max + 1):
        shell = [o for o in band_orbs if o.l == l]
        if remaining >= len(shell):
            filled += [replace(o, occupied=True) for o in shell]
            remaining -= len(shell)
        elif remaining > 0:
            if band.partial_shell_m is not None and l not in table_shells:
                if len(band.partial_shell_m) != remaining:
                    raise ValueError(
                        f"band {band.n}: partial_shell_m selects "
                        f"{len(band.partial_shell_m)} substates, need {remaining}")
                chosen = set(band.partial_shell_m)
                filled += [replace(o, occupied=(o.lam in chosen)) for o in shell]
            elif l in table_shells:
                filled += [replace(o, occupied=(k < remaining))
                           for k, o in enumerate(shell)]
            else:
                chosen = set(_lowest_m_order(l)[:remaining])
                filled += [replace(o, occupied=(o.lam in chosen)) for o in shell]
            remaining = 0
        else:
            filled += shell
    return filled


def degenerate_groups(orbitals, eta: float = DEFAULT_ETA):
    """Group orbitals whose energies agree within eta (chained clustering)."""
    ordered = sorted(orbitals, key=lambda o: o.energy)
    groups: list[list[Orbital]] = []
    for orb in ordered:
        if groups and abs(orb.energy - groups[-1][-1].energy) < eta:
            groups[-1].append(orb)
        else:
            groups.append([orb])
    return groups


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _spherical_frame(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    safe_r = np.where(r > 0.0, r, 1.0)
    ct = np.clip(pts[:, 2] / safe_r, -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    return pts, r, safe_r, ct, st, phi


def orbital_tables(basis: Basis, orbitals, points):
    """Vectorized values and gradients for a set of orbitals.

    Returns (psi, grad) with shapes (n_orb, n_pts) and (n_orb, n_pts, 3).
    Gradients assemble the analytic radial and angular derivatives; at
    r = 0 the (regularized) +z-axis limit is used: zero for l >= 2.
    """
    orbitals = list(orbitals)
    pts, r, safe_r, ct, st, phi = _spherical_frame(points)
    npts = len(r)
    lmax = max((o.l for o in orbitals), default=0)
    q, dq = numerics.legendre_q_tables(lmax, ct)
    rad = basis.shells.values(r)
    drad = basis.shells.derivatives(r)
    # powers of sin(theta) up to lmax, plus e^{i m phi} factors
    spow = np.concatenate([np.ones((1, npts)),
                           np.cumprod(np.broadcast_to(st, (lmax + 1, npts))[:lmax],
                                      axis=0)]) if lmax else np.ones((1, npts))
    eimp = np.exp(1j * np.outer(np.arange(-lmax, lmax + 1), phi))

    rhat = np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=1)
    that = np.stack([ct * np.cos(phi), ct * np.sin(phi), -st], axis=1)
    phat = np.stack([-np.sin(phi), np.cos(phi), np.zeros(npts)], axis=1)
    at_origin = r == 0.0

    psi = np.empty((len(orbitals), npts), dtype=complex)
    grad = np.empty((len(orbitals), npts, 3), dtype=complex)
    for k, orb in enumerate(orbitals):
        l, b = orb.l, orb.band_pos
        ang = np.zeros(npts, dtype=complex)       # sum_m C_m Y_lm
        dth = np.zeros(npts, dtype=complex)       # d/dtheta of ang
        dph = np.zeros(npts, dtype=complex)       # (1/sin) d/dphi of ang
        for m in range(-l, l + 1):
            c = orb.coeffs[m + l]
            if c == 0.0:
                continue
            am = abs(m)
            sign = (-1.0) ** am if m < 0 else 1.0
            ph = sign * c * eimp[m + lmax]
            qa, dqa = q[l, am], dq[l, am]
            ang += ph * qa * spow[am]
            d = -dqa * spow[am] * st
            if am:
                d = d + am * ct * spow[am - 1] * qa
                dph += ph * (1j * m) * qa * spow[am - 1]
            dth += ph * d
        psi[k] = rad[b] * ang
        inv_r = 1.0 / safe_r
        grad[k] = (drad[b] * ang)[:, None] * rhat \
            + (rad[b] * inv_r * dth)[:, None] * that \
            + (rad[b] * inv_r * dph)[:, None] * phat
        if np.any(at_origin):
            psi[k, at_origin] = rad[b][at_origin] * ang[at_origin] if l == 0 \
                else 0.0
            if l >= 2:
                grad[k, at_origin] = 0.0
            else:
                # regularized +z-axis limit: radial slope times the angular
                # factor evaluated at the pole
                lim = (drad[b][at_origin] * ang[at_origin])[:, None] * \
                    np.array([0.0, 0.0, 1.0]) if l == 0 else \
                    (drad[b][at_origin])[:, None] * _l1_axis_limit(orb)
                grad[k, at_origin] = lim
    return psi, grad


def _l1_axis_limit(orb):
    c0 = math.sqrt(3.0 / (4.0 * math.pi))
    c1 = math.sqrt(3.0 / (8.0 * math.pi))
    cm1, c_0, cp1 = orb.coeffs
    return np.array([
        c1 * (cm1 - cp1),
        -1j * c1 * (cm1 + cp1),
        c0 * c_0,
    ])


def evaluate_orbital(orbital: Orbital, basis: Basis, point) -> complex:
    """R_nl(r) * sum_m C_m Y_lm at a single point."""
    psi, _ = orbital_tables(basis, [orbital], np.atleast_2d(point))
    return complex(psi[0, 0])


def evaluate_gradient(orbital: Orbital, basis: Basis, point) -> np.ndarray:
    """Analytic Cartesian gradient of the orbital at a single point."""
    _, grad = orbital_tables(basis, [orbital], np.atleast_2d(point))
    return grad[0, 0]


# ---------------------------------------------------------------------------
# symmetry-adapted coefficient tables
# ---------------------------------------------------------------------------

class SymmetryTable:
    """Tabulated coefficient sets replacing one-hot m substates.

    ``groups`` maps l -> ordered list of (rep_label, lam, coeffs); order
    follows first appearance in the source file.
    """

    def __init__(self, groups: dict[int, list]):
        self.groups = groups

    def covers(self, l: int) -> bool:
        return l in self.groups

    def substates(self, l: int):
        return [(rep, lam, c.copy()) for rep, lam, c in self.groups[l]]


def load_symmetry_coefficients(path) -> SymmetryTable:
    """Parse a coefficient table: columns "l rep lam m re im", '#' comments.

    Each (l, rep, lam) row group must be normalized (|deviation| <= 1e-8),
    each l block must contain exactly 2l+1 mutually orthogonal substates.
    """
    raw: dict[tuple[int, str, int], np.ndarray] = {}
    order: list[tuple[int, str, int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            cols = text.split()
            if len(cols) != 6:
                raise ValueError(
                    f"{path}:{lineno}: expected 6 columns 'l rep lam m re im', "
                    f"got {len(cols)}")
            try:
                l = int(cols[0])
                lam = int(cols[2])
                m = int(cols[3])
                re, im = float(cols[4]), float(cols[5])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if l < 0 or abs(m) > l:
                raise ValueError(f"{path}:{lineno}: |m|={abs(m)} exceeds l={l}")
            key = (l, cols[1], lam)
            if key not in raw:
                raw[key] = np.zeros(2 * l + 1, dtype=complex)
                order.append(key)
            raw[key][m + l] += re + 1j * im
    groups: dict[int, list] = {}
    for key in order:
        l, rep, lam = key
        coeffs = raw[key]
        norm = float(np.sum(np.abs(coeffs) ** 2))
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(
                f"{path}: substate (l={l}, rep={rep}, lam={lam}) has "
                f"|C|^2={norm:.3e}, deviates from 1 by more than 1e-8")
        groups.setdefault(l, []).append((rep, lam, coeffs))
    for l, subs in groups.items():
        if len(subs) != 2 * l + 1:
            raise ValueError(
                f"{path}: l={l} block has {len(subs)} substates, needs {2 * l + 1}")
        mat = np.array([c for _, _, c in subs])
        off = mat @ mat.conj().T - np.eye(len(subs))
        if np.max(np.abs(off)) > 1e-8:
            raise ValueError(
                f"{path}: l={l} substates are not mutually orthonormal "
                f"(max deviation {np.max(np.abs(off)):.3e})")
    return SymmetryTable(groups)
