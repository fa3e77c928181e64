import math
import warnings

import numpy as np
import pytest

from bslab.bskernel import (MAX_ATOMS, AccuracyWarning, AssemblyError, KRangeError,
                            assemble_P, assemble_Q, assemble_R, decomposition_residual,
                            green_kernel, r_form)
from bslab.measure import (Atom, PanelKind, circle, from_atoms, grid_density, point_atom,
                           polyline, radial_density, segment)
from bslab.specfun import EULER_GAMMA, i0, k0, k0_remainder

import oracles

TWO_PI = 2 * math.pi


def constructor_measures():
    return [
        circle(1.0, 256),
        segment((0, 0), (1, 0), 128),
        polyline([(0, 0), (1, 0), (1, 1)], 64),
        radial_density(3.0, 16, 8),
        grid_density({"name": "gaussian"}, (-3, 3, -3, 3), 16, 16),
    ]


def quiet_Q(m, k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AccuracyWarning)
        return assemble_Q(m, k)


# ---- green_kernel


def test_green_kernel_far():
    assert green_kernel(1.0, 1.0, 0.01) == pytest.approx(oracles.K0[1] / TWO_PI, rel=1e-14)


def test_green_kernel_self_panel_curve():
    expected = (-math.log(0.05) - EULER_GAMMA + 1 - math.log(0.005)) / TWO_PI
    assert green_kernel(0.1, 0.0, 0.01, "curve") == pytest.approx(expected, rel=1e-14)
    assert green_kernel(0.1, 0.004, 0.01, PanelKind.CURVE) == pytest.approx(expected, rel=1e-14)


def test_green_kernel_self_panel_area():
    expected = (-math.log(0.05) - EULER_GAMMA + 0.5 - math.log(0.01)) / TWO_PI
    assert green_kernel(0.1, 0.0, 0.01, "area") == pytest.approx(expected, rel=1e-14)


def test_self_panel_average_matches_quadrature():
    # (1/h) int_{-h/2}^{h/2} K0(k|s|) ds, done by brute force
    k, h = 0.1, 0.01
    s = (np.arange(200000) + 0.5) / 200000 * (h / 2)
    brute = np.mean(k0(k * s)) / TWO_PI
    assert green_kernel(k, 0.0, h) == pytest.approx(brute, rel=1e-6)


def test_wide_panel_warns_and_uses_quadrature():
    k, h = 20.0, 0.05
    with pytest.warns(AccuracyWarning):
        val = green_kernel(k, 0.0, h)
    s = (np.arange(400000) + 0.5) / 400000 * (h / 2)
    assert val == pytest.approx(np.mean(k0(k * s)) / TWO_PI, rel=1e-6)


def test_green_kernel_decreases_in_k():
    ks = np.geomspace(1e-3, 10, 30)
    vals = [green_kernel(k, 0.7, 0.01) for k in ks]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# ---- assemble_Q


def test_q_circle_top_eigenvalue():
    M = assemble_Q(circle(1, 512), 0.1)
    top = M.eigvalsh()[-1]
    assert abs(top - oracles.I0K0[0.1]) <= 1e-3 * oracles.I0K0[0.1]


def test_q_single_atom():
    h = 0.02
    m = from_atoms([Atom((0.3, 0.1), h, h, PanelKind.CURVE)])
    M = assemble_Q(m, 0.5)
    expected = h * (-math.log(0.25) - EULER_GAMMA + 1 - math.log(h / 2)) / TWO_PI
    assert M.entries.shape == (1, 1)
    assert M.entries[0, 0] == pytest.approx(expected, rel=1e-14)


def test_q_exact_symmetry_and_nonnegative():
    for m in constructor_measures():
        for k in (1e-3, 0.1, 1.0):
            E = quiet_Q(m, k).entries
            assert np.array_equal(E, E.T)
            assert np.all(E >= 0)


def test_q_entrywise_monotone_in_k():
    for m in constructor_measures():
        lo, hi = quiet_Q(m, 0.05).entries, quiet_Q(m, 0.5).entries
        assert np.all(hi <= lo)
        assert np.all(np.diag(hi) < np.diag(lo))


def test_q_positive_semidefinite():
    rng = np.random.default_rng(7)
    for m in constructor_measures():
        for k in (1e-3, 0.1, 1.0):
            E = quiet_Q(m, k).entries
            V = rng.standard_normal((200, m.n))
            assert np.all(np.einsum("ij,jk,ik->i", V, E, V) >= 0)
            ev = np.linalg.eigvalsh(E)
            assert ev[0] >= -1e-10 * ev[-1], m.label


def test_q_deterministic():
    m = polyline([(0, 0), (1, 0), (1, 1)], 64)
    assert assemble_Q(m, 0.3).entries.tobytes() == assemble_Q(m, 0.3).entries.tobytes()


def test_q_circle_eigenvector_is_constant_function():
    m = circle(1, 256)
    M = assemble_Q(m, 0.2)
    _, V = np.linalg.eigh(M.entries)
    v = V[:, -1] * np.sign(V[:, -1].sum())
    u = M.sqrt_w / np.linalg.norm(M.sqrt_w)
    assert np.linalg.norm(v - u) <= 1e-10
    f = M.to_function(v)
    assert np.ptp(f) <= 1e-10 * np.abs(f).max()


def test_q_apply_and_quadratic_form():
    m = circle(1, 128)
    M = assemble_Q(m, 0.1)
    f = np.ones(m.n)
    # Q1 = I0(k) K0(k) on the unit circle, up to the discretisation
    assert np.allclose(M.apply(f), i0(0.1) * k0(0.1), rtol=2e-3)
    assert M.quadratic_form() == pytest.approx(M.quadratic_form(f))


def test_q_errors():
    with pytest.raises(AssemblyError):
        assemble_Q(point_atom(), 0.1)
    with pytest.raises(KRangeError):
        assemble_Q(circle(1, 8), 1e-9)
    with pytest.raises(KRangeError):
        assemble_Q(circle(1, 8), 2e3)
    with pytest.raises(AssemblyError):
        assemble_Q(segment((0, 0), (1, 0), MAX_ATOMS + 1), 0.1)


def test_coincident_atoms_share_panel_value():
    h = 0.01
    m = from_atoms([Atom((0.0, 0.0), h, h, PanelKind.CURVE)] * 2)
    E = assemble_Q(m, 0.1).entries
    assert E[0, 1] == E[0, 0] == E[1, 1]


# ---- P and R


def test_p_rank_one():
    m = circle(1, 300)
    P = assemble_P(m)
    ev = P.eigvalsh()
    assert ev[-1] == pytest.approx(1.0, abs=1e-12)
    assert abs(ev[-2]) <= 1e-12
    assert np.trace(P.entries) == pytest.approx(m.total_mass / TWO_PI, rel=1e-14)
    s = np.linalg.svd(P.entries, compute_uv=False)
    assert s[1] <= 1e-12 * s[0]


def test_r_form_circle_r2():
    assert r_form(circle(2, 512)) == pytest.approx(oracles.circle_r_form(2), rel=1e-3)


def test_r_form_circle_r1_first_order():
    # the r = 1 form is small (ln 2 - C_E cancels), so the O(h) error of the
    # panel-average diagonal shows up at 2.4e-3 relative for n = 512
    exact = oracles.circle_r_form(1)
    errs = [r_form(circle(1, n)) - exact for n in (512, 1024, 2048)]
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=1e-6)
    assert errs[2] / errs[1] == pytest.approx(0.5, abs=1e-6)
    assert abs(errs[2]) <= 1e-3 * exact
    assert abs(errs[0]) <= 3e-3 * exact


def test_r_norm_bounded_under_refinement():
    a, b = assemble_R(circle(1, 512)).norm(), assemble_R(circle(1, 1024)).norm()
    assert abs(a - b) <= 1e-2 * a


def test_r_diagonal_rule():
    h = 0.01
    m = from_atoms([Atom((0.0, 0.0), h, h, PanelKind.CURVE),
                    Atom((1.0, 0.0), h, h, PanelKind.AREA)])
    E = assemble_R(m).entries
    ln2 = math.log(2)
    assert E[0, 0] == pytest.approx(h * (ln2 - EULER_GAMMA + 1 - math.log(h / 2)) / TWO_PI)
    assert E[1, 1] == pytest.approx(h * (ln2 - EULER_GAMMA + 0.5 - math.log(h)) / TWO_PI)
    assert E[0, 1] == pytest.approx(h * (ln2 - EULER_GAMMA) / TWO_PI)


# ---- decomposition S = Q + ln k P - R


def test_residual_diagonal_exactly_zero():
    for m in constructor_measures():
        S, _ = decomposition_residual(m, 0.01)
        assert np.all(np.diag(S.entries) == 0.0)


def test_residual_equals_difference():
    m = circle(1, 64)
    k = 0.05
    S, _ = decomposition_residual(m, k)
    diff = assemble_Q(m, k).entries + math.log(k) * assemble_P(m).entries - assemble_R(m).entries
    assert np.allclose(S.entries, diff, atol=1e-14)


def test_residual_entries_are_macdonald_remainder():
    m = circle(1, 32)
    k = 0.1
    S, _ = decomposition_residual(m, k)
    i, j = 0, 5
    rho = m.distances[i, j]
    expected = math.sqrt(m.weights[i] * m.weights[j]) * k0_remainder(k * rho) / TWO_PI
    assert S.entries[i, j] == pytest.approx(expected, rel=1e-14)


def test_residual_order_ratio():
    m = circle(1, 256)
    n2 = decomposition_residual(m, 1e-2)[1]
    n3 = decomposition_residual(m, 1e-3)[1]
    predicted = (1e-4 * abs(math.log(1e-2))) / (1e-6 * abs(math.log(1e-3)))
    assert predicted / 2 <= n2 / n3 <= predicted * 2


def test_residual_k_range():
    with pytest.raises(KRangeError):
        decomposition_residual(circle(1, 8), 0.6)
