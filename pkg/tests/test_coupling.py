import math

import numpy as np
import pytest

from vortexcage import beam, coupling, numerics, structure

from conftest import make_pulse


class UniformField:
    """Constant real A_x stub (matches the field duck interface)."""

    def __init__(self, amplitude=1.0):
        self.amplitude = amplitude

    def spatial_amplitude(self, points):
        n = len(np.atleast_2d(points))
        return (np.full(n, self.amplitude, dtype=complex),
                np.zeros(n, dtype=complex))


class TestApplyInteraction:
    def test_constant_field_reduces_to_gradient_term(self, basis):
        # zero divergence: H psi = -i a dpsi/dx exactly
        field = UniformField(0.8)
        orb = next(o for o in basis.band_orbitals(2) if o.l == 1)
        pts = np.array([[1.0, 2.0, -0.5], [4.0, -3.0, 2.0]])
        got = coupling.apply_interaction(field, orb, basis, pts)[0]
        _, grad = structure.orbital_tables(basis, [orb], pts)
        expected = -1j * 0.8 * grad[0, :, 0]
        assert np.abs(got - expected).max() == 0.0

    def test_operator_identity_oracle(self, basis, pulse_m1):
        # independent assembly -(i/2)[d_x(A psi) + A d_x psi] with the
        # product derivative taken by finite differences
        rng = np.random.default_rng(41)
        orb = next(o for o in basis.band_orbitals(2) if o.l == 2)
        h = 2e-3
        for _ in range(50):
            pt = rng.uniform(-1, 1, 3)
            pt *= rng.uniform(3.0, 10.0) / np.linalg.norm(pt)
            got = coupling.apply_interaction(pulse_m1, orb, basis,
                                             pt[None, :])[0, 0]

            def a_psi(x):
                a = pulse_m1.spatial_amplitude(x[None, :])[0][0]
                return a * structure.evaluate_orbital(orb, basis, x)

            def central(step_h):
                step = np.array([step_h, 0.0, 0.0])
                return (a_psi(pt + step) - a_psi(pt - step)) / (2 * step_h)

            # Richardson-extrapolated derivative of the product A psi
            d_apsi = (4.0 * central(h / 2) - central(h)) / 3.0
            a_here = pulse_m1.spatial_amplitude(pt[None, :])[0][0]
            _, grad = structure.orbital_tables(basis, [orb], pt[None, :])
            oracle = -0.5j * (d_apsi + a_here * grad[0, 0, 0])
            assert got == pytest.approx(oracle, rel=1e-8, abs=1e-18)

    def test_azimuthal_fourier_content(self, basis):
        # centered m=1 beam on an l=0 orbital: only e^{i0 phi} and
        # e^{i2 phi} components survive (e^{i phi} times sigma+-)
        pulse = make_pulse(1)
        orb = next(o for o in basis.band_orbitals(2) if o.l == 0)
        nphi = 32
        phi = 2 * math.pi * np.arange(nphi) / nphi
        r, z = 5.0, 2.0
        pts = np.stack([r * np.cos(phi), r * np.sin(phi),
                        np.full(nphi, z)], axis=1)
        vals = coupling.apply_interaction(pulse, orb, basis, pts)[0]
        comps = np.fft.fft(vals) / nphi
        mags = np.abs(comps)
        keep = {0, 2}
        for k in range(nphi):
            if k not in keep:
                assert mags[k] < 1e-12 * mags.max()


class TestMatrixElement:
    def test_gaussian_beam_dipole_selection(self, basis, grid):
        pulse = make_pulse(0)
        ts = coupling.build_transition_set(basis, pulse, grid, prune=False)
        mmax = ts.max_abs()
        for jr, j in enumerate(ts.unoccupied):
            for kc, k in enumerate(ts.occupied):
                dm = basis.orbitals[j].lam - basis.orbitals[k].lam
                if dm not in (-1, 1):
                    assert abs(ts.matrix[jr, kc]) < 1e-12 * mmax

    def test_vortex_m2_selection(self, basis, grid):
        pulse = make_pulse(2)
        ts = coupling.build_transition_set(basis, pulse, grid, prune=False)
        mmax = ts.max_abs()
        for jr, j in enumerate(ts.unoccupied):
            for kc, k in enumerate(ts.occupied):
                dm = basis.orbitals[j].lam - basis.orbitals[k].lam
                if dm not in (1, 3):
                    assert abs(ts.matrix[jr, kc]) < 1e-12 * mmax

    def test_parity_selection(self, basis, grid):
        for m_oam in (1, 2):
            pulse = make_pulse(m_oam)
            ts = coupling.build_transition_set(basis, pulse, grid, prune=False)
            mmax = ts.max_abs()
            for jr, j in enumerate(ts.unoccupied):
                for kc, k in enumerate(ts.occupied):
                    oj, ok = basis.orbitals[j], basis.orbitals[k]
                    if (ok.l + oj.l + abs(m_oam) + 1) % 2 == 1:
                        assert abs(ts.matrix[jr, kc]) < 1e-10 * mmax

    def test_offset_beam_dipole_dominance(self, basis, grid):
        # at rho0 = rho_max the molecule sees a locally plane wave, so
        # |delta l| = 1 entries dominate all others by >= 10x
        pulse = make_pulse(1, rho0=beam.rho_max(1, make_pulse(1).waist))
        ts = coupling.build_transition_set(basis, pulse, grid, prune=False)
        dip, rest = 0.0, 0.0
        for jr, j in enumerate(ts.unoccupied):
            for kc, k in enumerate(ts.occupied):
                v = abs(ts.matrix[jr, kc])
                if abs(basis.orbitals[j].l - basis.orbitals[k].l) == 1:
                    dip = max(dip, v)
                else:
                    rest = max(rest, v)
        assert dip >= 10.0 * rest

    def test_single_element_matches_set(self, basis, grid, pulse_m1, ts_m1):
        jr, kc = np.unravel_index(np.argmax(np.abs(ts_m1.matrix)),
                                  ts_m1.matrix.shape)
        k = basis.orbitals[ts_m1.occupied[kc]]
        j = basis.orbitals[ts_m1.unoccupied[jr]]
        val = coupling.matrix_element(basis, k, j, pulse_m1, grid)
        assert val == pytest.approx(ts_m1.matrix[jr, kc], rel=1e-12)

    def test_convergence_warning_on_coarse_grid(self, basis, pulse_m1):
        coarse = numerics.build_grid(0.0, 26.8, 16, 12)
        k = next(o for o in basis.band_orbitals(2) if o.occupied and o.l == 1)
        j = next(o for o in basis.band_orbitals(3) if o.l == 2)
        with pytest.warns(coupling.ConvergenceWarning):
            coupling.matrix_element(basis, k, j, pulse_m1, coarse,
                                    check_convergence=True)


class TestTransitionSet:
    def test_table_shape(self, ts_m1):
        assert ts_m1.matrix.shape == (16, 30)
        assert len(ts_m1.occupied) == 30
        assert len(ts_m1.unoccupied) == 16

    def test_zero_amplitude(self, basis, grid):
        pulse = make_pulse(1, a0=0.0)
        ts = coupling.build_transition_set(basis, pulse, grid)
        assert not np.any(ts.matrix)

    def test_linearity_in_a0(self, basis, grid):
        t1 = coupling.build_transition_set(basis, make_pulse(2, a0=0.03),
                                           grid, prune=False)
        t2 = coupling.build_transition_set(basis, make_pulse(2, a0=0.06),
                                           grid, prune=False)
        assert np.abs(t2.matrix - 2.0 * t1.matrix).max() == 0.0

    def test_pruning_bookkeeping(self, basis, grid):
        ts = coupling.build_transition_set(basis, make_pulse(1), grid,
                                           prune=True)
        scale = ts.max_abs()
        for jr, kc in ts.pruned:
            assert ts.matrix[jr, kc] == 0.0
        unpruned = np.abs(ts.matrix[np.abs(ts.matrix) > 0.0])
        if unpruned.size:
            assert unpruned.min() >= 1e-14 * scale

    def test_static_field_hermitian(self, basis, grid):
        field = UniformField(0.5)
        orbs = basis.band_orbitals(2) + basis.band_orbitals(3)
        mat = coupling.interaction_matrix(field, basis, orbs, orbs, grid)
        dev = np.abs(mat - mat.conj().T).max()
        assert dev < 1e-10 * np.abs(mat).max()

    def test_requires_orbitals(self, basis, grid):
        with pytest.raises(ValueError):
            coupling.build_transition_set(basis, make_pulse(1), grid,
                                          occupied=[], unoccupied=None)

    def test_translation_consistency(self, basis, grid, pulse_m1):
        # substituting u = r - rho0: a beam offset by +rho0 integrated in
        # cage coordinates equals the centered beam integrated against
        # orbitals displaced to u + rho0
        rho0 = 3.0
        occ = [o for o in basis.band_orbitals(2) if o.occupied][:4]
        unocc = basis.band_orbitals(3)[:4]
        offset_pulse = make_pulse(1, rho0=rho0)
        m_offset = coupling.interaction_matrix(offset_pulse, basis, unocc,
                                               occ, grid)
        centered = make_pulse(1)
        shifted_pts = grid.points + np.array([rho0, 0.0, 0.0])
        a_x, div = centered.spatial_amplitude(grid.points)
        psi_o, grad_o = structure.orbital_tables(basis, occ, shifted_pts)
        psi_u, _ = structure.orbital_tables(basis, unocc, shifted_pts)
        applied = -0.5j * div * psi_o - 1j * a_x * grad_o[:, :, 0]
        m_shift = np.einsum("jn,n,kn->jk", psi_u.conj(), grid.weights, applied)
        scale = np.abs(m_offset).max()
        assert np.abs(m_offset - m_shift).max() < 1e-8 * scale

    def test_rotation_phase_invariance(self, basis, grid, pulse_m1, ts_m1):
        # rotating every substate about z (coefficients pick up e^{-i m a})
        # multiplies each element by a pure phase; |M| is invariant
        alpha = 0.73
        occ = [o for o in basis.band_orbitals(2) if o.occupied][:5]
        unocc = basis.band_orbitals(3)[:5]

        def rotated(orb):
            coeffs = orb.coeffs.copy()
            m = orb.lam
            coeffs[m + orb.l] *= np.exp(-1j * m * alpha)
            return structure.Orbital(
                index=orb.index, band=orb.band, band_pos=orb.band_pos,
                l=orb.l, rep_label=orb.rep_label, lam=orb.lam,
                energy=orb.energy, coeffs=coeffs, occupied=orb.occupied)

        plain = coupling.interaction_matrix(pulse_m1, basis, unocc, occ, grid)
        rot = coupling.interaction_matrix(pulse_m1, basis,
                                          [rotated(o) for o in unocc],
                                          [rotated(o) for o in occ], grid)
        assert np.abs(np.abs(rot) - np.abs(plain)).max() < \
            1e-12 * np.abs(plain).max()
        # and the phases compensate as e^{i(m_k - m_j) alpha}
        for jr, oj in enumerate(unocc):
            for kc, ok in enumerate(occ):
                expect = plain[jr, kc] * np.exp(1j * (oj.lam - ok.lam) * alpha)
                assert abs(rot[jr, kc] - expect) < 1e-12 * np.abs(plain).max()

    def test_dump_format(self, basis, ts_m1, tmp_path):
        path = tmp_path / "transitions.dat"
        coupling.write_transition_table(ts_m1, basis, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# k j l_k m_k l_j m_j")
        assert len(lines) == 1 + 30 * 16
        cols = lines[1].split()
        assert len(cols) == 8
