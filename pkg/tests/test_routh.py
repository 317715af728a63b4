"""Product-space reduction: momentum map, the inverse-momentum solver, the
reduced Lagrangian and flow, orbit pairing, and reconstruction."""
import numpy as np
import pytest

from magreduce import lie, maglag, models, numerics, routh
from magreduce.lie import AlgebraVector, CoVector
from magreduce.maglag import RegularityError
from magreduce.numerics import StepperChoice


def abelian_lagrangian(sdim=1, gdim=2):
    """Shape oscillator coupled to an abelian group with identity metric."""
    return routh.quadratic_invariant_lagrangian(
        sdim, lie.translations(gdim),
        a_block=np.eye(sdim), b_block=np.zeros((sdim, gdim)),
        c_block=np.eye(gdim),
        potential=lambda x: 0.5 * float(np.atleast_1d(x)[0] ** 2),
        dpotential=lambda x: np.atleast_1d(x))


def generic_lagrangian():
    """Non-mechanical invariant Lagrangian (quartic in the group velocity)
    exercising the Newton path of the momentum inversion."""
    spec = lie.translations(2)

    def ell(x, xd, xi):
        return (0.5 * float(xd @ xd) + 0.5 * float(xi @ xi)
                + 0.05 * float(xi @ xi) ** 2 + 0.1 * x[0] * xi[0])

    def dell_dxi(x, xd, xi):
        return xi + 0.2 * float(xi @ xi) * xi + np.array([0.1 * x[0], 0.0])

    return routh.InvariantLagrangian(sdim=1, group=spec, ell=ell,
                                     dell_dxi=dell_dxi)


def test_momentum_map_identity_is_fibre_derivative(rotor_params, rng):
    lag = models.rotor_lagrangian(rotor_params)
    xd = rng.normal(size=1)
    w = rng.normal(size=3)
    out = routh.momentum_map(lag, np.zeros(1), xd, lie.identity(lie.so3()),
                             AlgebraVector(w))
    assert np.max(np.abs(out.coords - lag.group_momentum(np.zeros(1), xd, w))) < 1e-14


def test_momentum_map_rotor_display(rotor_params, rng):
    lam = rotor_params.lam
    j3 = rotor_params.inertia_rotor[2]
    lag = models.rotor_lagrangian(rotor_params)
    for _ in range(20):
        xd = rng.normal(size=1)
        w = rng.normal(size=3)
        f2 = lag.group_momentum(np.zeros(1), xd, w)
        expected = np.array([lam[0] * w[0], lam[1] * w[1],
                             lam[2] * w[2] + j3 * xd[0]])
        assert np.max(np.abs(f2 - expected)) < 1e-12


def test_momentum_map_equivariance(rotor_params, rng):
    spec = lie.so3()
    lag = models.rotor_lagrangian(rotor_params)
    for _ in range(100):
        g = lie.sample_element(spec, rng)
        gp = lie.sample_element(spec, rng)
        xd = rng.normal(size=1)
        xi = AlgebraVector(rng.normal(size=3))
        left = routh.momentum_map(lag, np.zeros(1), xd,
                                  lie.compose(spec, gp, g), xi)
        right = lie.coadjoint(spec, lie.inverse(spec, gp),
                              routh.momentum_map(lag, np.zeros(1), xd, g, xi))
        assert np.max(np.abs(left.coords - right.coords)) <= 1e-10


def test_solve_chi_rotor_closed_form(rotor_params, rng):
    lam = rotor_params.lam
    j3 = rotor_params.inertia_rotor[2]
    lag = models.rotor_lagrangian(rotor_params)
    for _ in range(20):
        xd = rng.normal(size=1)
        m = rng.normal(size=3)
        chi = routh.solve_chi(lag, np.zeros(1), xd, CoVector(m)).coords
        expected = np.array([m[0] / lam[0], m[1] / lam[1],
                             (m[2] - j3 * xd[0]) / lam[2]])
        assert np.max(np.abs(chi - expected)) < 1e-12


def test_solve_chi_identity_metric(rng):
    lag = abelian_lagrangian()
    nu = CoVector(rng.normal(size=2))
    chi = routh.solve_chi(lag, [0.2], [0.1], nu)
    assert np.max(np.abs(chi.coords - nu.coords)) < 1e-12


def test_solve_chi_round_trip_random_mechanical(rng):
    # random SPD group metrics; the round trip holds at 1e-10
    for _ in range(100):
        w = rng.normal(size=(3, 3))
        c = w @ w.T + 3.0 * np.eye(3)
        b = rng.normal(size=(1, 3))
        lag = routh.quadratic_invariant_lagrangian(
            1, lie.so3(), a_block=[[2.0 + rng.uniform()]], b_block=b, c_block=c)
        xd = rng.normal(size=1)
        nu = CoVector(rng.normal(size=3))
        chi = routh.solve_chi(lag, np.zeros(1), xd, nu)
        back = lag.group_momentum(np.zeros(1), xd, chi.coords)
        assert np.max(np.abs(back - nu.coords)) <= 1e-10


def test_solve_chi_newton_path_round_trip(rng):
    lag = generic_lagrangian()
    for _ in range(50):
        x = rng.normal(size=1)
        xd = rng.normal(size=1)
        nu = CoVector(rng.normal(size=2))
        chi = routh.solve_chi(lag, x, xd, nu)
        back = lag.group_momentum(x, xd, chi.coords)
        assert np.max(np.abs(back - nu.coords)) <= 1e-10


def test_routhian_zero_state():
    params = models.RotorParams(inertia_body=(2.0, 2.0, 1.0),
                                inertia_rotor=(0.0, 0.0, 1.0))
    lag = models.rotor_lagrangian(params)
    r = routh.routhian(lag, np.zeros(1), np.zeros(1), CoVector(np.zeros(3)))
    assert abs(r) < 1e-15


def test_routhian_rotor_display(rotor_params, rng):
    lam = rotor_params.lam
    j3 = rotor_params.inertia_rotor[2]
    i3 = rotor_params.inertia_body[2]
    lag = models.rotor_lagrangian(rotor_params)
    for _ in range(100):
        xd = rng.normal(size=1)
        m = rng.normal(size=3)
        r = routh.routhian(lag, np.zeros(1), xd, CoVector(m))
        expected = (0.5 * (j3 * i3 / lam[2] * xd[0] ** 2
                           - m[0] ** 2 / lam[0] - m[1] ** 2 / lam[1]
                           - m[2] ** 2 / lam[2])
                    + j3 / lam[2] * xd[0] * m[2])
        assert abs(r - expected) <= 1e-10


def test_routhian_cross_formula(rotor_params, rng):
    lag = models.rotor_lagrangian(rotor_params)
    for _ in range(100):
        xd = rng.normal(size=1)
        m = CoVector(rng.normal(size=3))
        assert abs(routh.routhian(lag, np.zeros(1), xd, m)
                   - routh.routhian_mechanical(lag, np.zeros(1), xd, m)) <= 1e-10


def test_routhian_mechanical_requires_flag():
    lag = generic_lagrangian()
    with pytest.raises(ValueError):
        routh.routhian_mechanical(lag, [0.0], [0.0], CoVector([0.0, 0.0]))


def test_routhian_mechanical_pure_potential():
    lag = abelian_lagrangian()
    r = routh.routhian_mechanical(lag, [0.7], np.zeros(1), CoVector(np.zeros(2)))
    assert abs(r + 0.5 * 0.49) < 1e-12


def test_reduced_field_rotor_displays(rotor_params, rng):
    sys = models.rotor_reduced_system(rotor_params, CoVector([1.0, 0.0, 0.0]))
    for _ in range(100):
        x = rng.normal(size=1)
        xd = rng.normal(size=1)
        m = rng.normal(size=3)
        st = routh.ReducedState(x, xd, CoVector(m))
        _, xdd, nudot = routh.reduced_vector_field(sys, st)
        mdot, xdd_exp = models.rotor_reduced_field_closed_form(rotor_params, x, xd, m)
        assert np.max(np.abs(nudot.coords - mdot)) <= 1e-10
        assert abs(xdd[0] - xdd_exp) <= 1e-10


def test_reduced_field_abelian_plain_el():
    lag = abelian_lagrangian()
    sys = routh.ReducedRouthSystem(lag, mu=CoVector(np.zeros(2)))
    st = routh.ReducedState([0.4], [0.1], CoVector(np.zeros(2)))
    xdot, xdd, nudot = routh.reduced_vector_field(sys, st)
    assert np.array_equal(nudot.coords, np.zeros(2))
    assert abs(xdd[0] + 0.4) < 1e-12      # plain oscillator on the shape


def test_reduced_field_right_invariant_sign(rotor_params):
    lag = models.rotor_lagrangian(rotor_params)
    st = routh.ReducedState([0.0], [0.3], CoVector([0.5, -0.2, 0.8]))
    left = routh.ReducedRouthSystem(lag, mu=st.nu, side="left")
    right = routh.ReducedRouthSystem(lag, mu=st.nu, side="right")
    _, _, nudot_l = routh.reduced_vector_field(left, st)
    _, _, nudot_r = routh.reduced_vector_field(right, st)
    assert np.max(np.abs(nudot_l.coords + nudot_r.coords)) < 1e-14


def test_reduced_field_momentum_equation_residual(rotor_params, rng):
    # the momentum equation holds against a basis-duality oracle at 1e-12
    lag = models.rotor_lagrangian(rotor_params)
    sys = routh.ReducedRouthSystem(lag, mu=CoVector([1.0, 0, 0]))
    eye = np.eye(3)
    for _ in range(20):
        st = routh.ReducedState(rng.normal(size=1), rng.normal(size=1),
                                CoVector(rng.normal(size=3)))
        _, _, nudot = routh.reduced_vector_field(sys, st)
        chi = routh.solve_chi(lag, st.x, st.xdot, st.nu)
        for j in range(3):
            eta = AlgebraVector(eye[j])
            lhs = nudot.coords[j]
            rhs = lie.pair(st.nu, lie.bracket(lie.so3(), chi, eta))
            assert abs(lhs - rhs) <= 1e-12


def test_casimir_derivative_pointwise(rotor_params, rng):
    sys = models.rotor_reduced_system(rotor_params, CoVector([1.0, 0, 0]))
    for _ in range(50):
        st = routh.ReducedState(rng.normal(size=1), rng.normal(size=1),
                                CoVector(rng.normal(size=3)))
        _, _, nudot = routh.reduced_vector_field(sys, st)
        # d|m|^2/dt = 2 m . mdot vanishes by the triple-product identity
        assert abs(2.0 * st.nu.coords @ nudot.coords) <= 1e-12


def test_integrate_reduced_relative_equilibrium(rotor_params, rk4_fine):
    m0 = CoVector([0.0, 0.0, 0.7])
    sys = models.rotor_reduced_system(rotor_params, m0)
    traj = routh.integrate_reduced(sys, routh.ReducedState([0.0], [0.3], m0),
                                   2.0, rk4_fine)
    assert np.max(np.abs(traj.states[:, 2:] - m0.coords)) < 1e-12
    assert np.max(np.abs(traj.states[:, 1] - 0.3)) < 1e-12


def test_integrate_reduced_monitors(rotor_params):
    m0 = CoVector([0.8, 0.2, 0.3])
    sys = models.rotor_reduced_system(rotor_params, m0)
    traj = routh.integrate_reduced(sys, routh.ReducedState([0.0], [0.2], m0),
                                   10.0, StepperChoice(kind="rk4", h=1e-3))
    norms = np.linalg.norm(traj.states[:, 2:], axis=1)
    assert np.max(np.abs(norms - norms[0])) <= 1e-9
    assert traj.report.entries["casimir_momentum_norm_drift"] <= 1e-9
    assert traj.report.entries["energy_drift"] <= 1e-8


def test_kks_form_antisymmetry_and_bilinearity(rng):
    spec = lie.so3()
    for _ in range(50):
        nu = CoVector(rng.normal(size=3))
        a = AlgebraVector(rng.normal(size=3))
        b = AlgebraVector(rng.normal(size=3))
        assert routh.kks_form(spec, nu, a, a) == 0.0
        lhs = routh.kks_form(spec, nu, a, b)
        assert abs(lhs + routh.kks_form(spec, nu, b, a)) <= 1e-14
        two = routh.kks_form(spec, nu, 2.0 * a, b)
        assert abs(two - 2.0 * lhs) <= 1e-14 * max(1.0, abs(lhs))


def test_kks_form_so3_example():
    val = routh.kks_form(lie.so3(), CoVector([0, 0, 1.0]),
                         AlgebraVector([1.0, 0, 0]), AlgebraVector([0, 1.0, 0]))
    assert abs(val - 1.0) < 1e-15


def test_reconstruct_zero_velocity_stays():
    lag = abelian_lagrangian()
    sys = routh.ReducedRouthSystem(lag, mu=CoVector(np.zeros(2)))
    traj = routh.integrate_reduced(sys, routh.ReducedState([0.2], [0.0],
                                                           CoVector(np.zeros(2))),
                                   1.0, StepperChoice(kind="rk4", h=1e-2))
    g0 = lie.identity(lie.translations(2))
    gs = routh.reconstruct(sys, traj, g0)
    assert np.max(np.abs(gs[-1].payload)) < 1e-14


def test_reconstruct_rotor_momentum_conservation(rotor_params):
    m0 = CoVector([0.8, 0.2, 0.3])
    sys = models.rotor_reduced_system(rotor_params, m0)
    traj = routh.integrate_reduced(sys, routh.ReducedState([0.0], [0.2], m0),
                                   10.0, StepperChoice(kind="rk4", h=1e-3))
    spec = lie.so3()
    gs = routh.reconstruct(sys, traj, lie.identity(spec))
    mu = m0.coords
    worst = 0.0
    for i in range(0, len(gs), 200):
        nu_t = CoVector(traj.states[i, 2:])
        j = lie.coadjoint(spec, lie.inverse(spec, gs[i]), nu_t)
        worst = max(worst, float(np.max(np.abs(j.coords - mu))))
    assert worst <= 1e-6


def test_quadratic_lagrangian_matches_fd_twin(rng):
    # the analytic supply agrees with a purely FD-backed twin
    c = np.diag([2.0, 3.0, 1.5])
    b = np.array([[0.3, -0.2, 0.5]])
    lag = routh.quadratic_invariant_lagrangian(
        1, lie.so3(), [[1.7]], b, c,
        potential=lambda x: float(np.cos(x[0])),
        dpotential=lambda x: np.array([-np.sin(x[0])]))
    twin = routh.InvariantLagrangian(sdim=1, group=lie.so3(), ell=lag.ell)
    x, xd = rng.normal(size=1), rng.normal(size=1)
    xi = rng.normal(size=3)
    assert np.max(np.abs(lag.grad_x(x, xd, xi) - twin.grad_x(x, xd, xi))) < 1e-8
    assert np.max(np.abs(lag.group_momentum(x, xd, xi)
                         - twin.group_momentum(x, xd, xi))) < 1e-8
    assert np.max(np.abs(lag.jac_xi_xi(x, xd, xi)
                         - twin.jac_xi_xi(x, xd, xi))) < 1e-5


def test_validate_mechanical(rotor_params, rng):
    lag = models.rotor_lagrangian(rotor_params)
    samples = [(rng.normal(size=1), rng.normal(size=1), rng.normal(size=3))
               for _ in range(10)]
    routh.validate_mechanical(lag, samples)   # positive metric passes
    bad = routh.quadratic_invariant_lagrangian(
        1, lie.so3(), [[1.0]], [[0.0, 0.0, 0.0]], np.diag([1.0, 1.0, -0.5]))
    with pytest.raises(ValueError, match="positive definite"):
        routh.validate_mechanical(bad, samples)


def test_g_regularity_error_reported():
    spec = lie.translations(1)

    def ell(x, xd, xi):
        return 0.5 * float(xd @ xd) + np.exp(xi[0])  # dell/dxi never reaches -1

    lag = routh.InvariantLagrangian(sdim=1, group=spec, ell=ell)
    with pytest.raises(RegularityError):
        routh.solve_chi(lag, [0.0], [0.0], CoVector([-1.0]))
