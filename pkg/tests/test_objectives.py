import numpy as np
import pytest

from conftest import rand_spd, rand_sym, rel_err
from qipsolve.errors import DomainViolation, ValidationError
from qipsolve.linmap import KrausMap, partial_transpose_map
from qipsolve.matfun import INVERSE, NEG_LOG, NEG_SQRT, neg_power, symmetrize, vec
from qipsolve.objectives import (
    TraceObjective,
    barrier_eval,
    composite_eval,
    composite_value,
    map_barrier_eval,
    phi_eval,
)
from qipsolve.oracle import fd_gradient, fd_hessian_action

ALL_GENERATORS = [INVERSE, NEG_LOG, NEG_SQRT, neg_power(0.37)]


def separable_ppt_state(rng, n1, n2):
    n = n1 * n2
    x = sum(np.kron(rand_spd(rng, n1, 0.2), rand_spd(rng, n2, 0.2)) for _ in range(3))
    x = x / np.trace(x) + 0.05 * np.eye(n)
    return symmetrize(x / np.trace(x))


class TestTraceObjective:
    def test_weight_must_be_psd(self, rng):
        c = rand_sym(rng, 3)
        c -= (np.linalg.eigvalsh(c).min() - 0.5) * np.eye(3)  # make one eig negative
        with pytest.raises(ValidationError):
            TraceObjective(-c, INVERSE)

    def test_zero_weight(self, rng):
        obj = TraceObjective(np.zeros((3, 3)), NEG_LOG)
        b = phi_eval(obj, rand_spd(rng, 3))
        assert b.value == 0.0
        assert np.all(b.gradient == 0.0)
        assert np.all(b.hessian == 0.0)


class TestPhiEval:
    def test_inverse_identity_case(self):
        obj = TraceObjective(np.eye(2), INVERSE)
        b = phi_eval(obj, np.eye(2))
        assert b.value == pytest.approx(2.0)
        assert np.allclose(b.gradient, vec(-np.eye(2)))
        # d^2/dt^2 Tr((I + t xi)^{-1}) = 2 Tr(xi^2) at t=0, so H == 2 I
        assert np.allclose(b.hessian, 2.0 * np.eye(4), atol=1e-12)

    def test_inverse_identity_fd_quadratic_form(self, rng):
        obj = TraceObjective(np.eye(2), INVERSE)
        b = phi_eval(obj, np.eye(2))
        xi = rand_sym(rng, 2)
        h = 1e-4
        vals = [np.trace(np.linalg.inv(np.eye(2) + t * xi)) for t in (-h, 0.0, h)]
        fd2 = (vals[0] - 2 * vals[1] + vals[2]) / h**2
        quad = vec(xi) @ (b.hessian @ vec(xi))
        assert quad == pytest.approx(fd2, rel=1e-5)

    def test_neglog_weight_equal_to_point(self, rng):
        x = rand_spd(rng, 4)
        obj = TraceObjective(x, NEG_LOG)
        b = phi_eval(obj, x, want_hessian=False)
        # <grad, I> = -Tr(C X^{-1}) = -n when C = X
        assert np.trace(b.gradient.reshape(4, 4, order="F")) == pytest.approx(-4.0, rel=1e-10)
        g_fd = fd_gradient(lambda y: phi_eval(obj, y, False).value, x)
        assert rel_err(b.gradient, g_fd) <= 1e-6

    @pytest.mark.parametrize("n", [3, 5])
    def test_gradient_and_hessian_vs_fd(self, rng, n):
        for gen in ALL_GENERATORS:
            c = rand_spd(rng, n, 0.1)
            obj = TraceObjective(c, gen)
            x = rand_spd(rng, n)
            b = phi_eval(obj, x)
            g_fd = fd_gradient(lambda y: phi_eval(obj, y, False).value, x)
            assert rel_err(b.gradient, g_fd) <= 1e-6, gen.kind
            xi = rand_sym(rng, n)
            act_fd = fd_hessian_action(
                lambda y: phi_eval(obj, y, False).gradient, x, xi)
            assert rel_err(b.hessian @ vec(xi), act_fd) <= 1e-5, gen.kind

    def test_hessian_symmetric_psd(self, rng):
        for gen in ALL_GENERATORS:
            c = rand_spd(rng, 4, 0.1)
            x = rand_spd(rng, 4)
            h = phi_eval(TraceObjective(c, gen), x).hessian
            assert np.linalg.norm(h - h.T) <= 1e-9 * np.linalg.norm(h)
            hnorm = np.linalg.norm(h, 2)
            assert np.linalg.eigvalsh(h).min() >= -1e-7 * hnorm

    def test_domain_violation(self, rng):
        obj = TraceObjective(np.eye(3), NEG_LOG)
        x = rand_sym(rng, 3)
        x -= (np.linalg.eigvalsh(x).min() + 1.0) * np.eye(3)
        with pytest.raises(DomainViolation):
            phi_eval(obj, x)

    def test_map_output_domain_violation(self, rng):
        # partial transpose of an entangled state is indefinite
        bell = np.zeros((4, 4))
        bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
        x = symmetrize(0.95 * bell + 0.05 * np.eye(4) / 4)
        pt = partial_transpose_map(2, 2)
        obj = TraceObjective(np.eye(4), NEG_LOG, map=pt)
        with pytest.raises(DomainViolation):
            phi_eval(obj, x)

    def test_through_kraus_map_vs_fd(self, rng):
        k_factors = [rng.standard_normal((6, 4)) * 0.4 for _ in range(2)]
        lmap = KrausMap(k_factors)
        obj = TraceObjective(rand_spd(rng, 6, 0.1), NEG_SQRT, map=lmap)
        x = rand_spd(rng, 4)
        b = phi_eval(obj, x)
        g_fd = fd_gradient(lambda y: phi_eval(obj, y, False).value, x)
        assert rel_err(b.gradient, g_fd) <= 1e-6
        xi = rand_sym(rng, 4)
        act_fd = fd_hessian_action(lambda y: phi_eval(obj, y, False).gradient, x, xi)
        assert rel_err(b.hessian @ vec(xi), act_fd) <= 1e-5


class TestBarrier:
    def test_identity(self):
        b = barrier_eval(np.eye(3))
        assert b.value == pytest.approx(0.0)
        assert np.allclose(b.gradient, vec(-np.eye(3)))
        assert np.allclose(b.hessian, np.eye(9), atol=1e-13)

    def test_diag_case(self):
        b = barrier_eval(np.diag([2.0, 1.0]), want_hessian=False)
        assert b.value == pytest.approx(-np.log(2.0))
        assert np.allclose(b.gradient, vec(np.diag([-0.5, -1.0])))

    def test_hessian_action_vs_fd(self, rng):
        x = rand_spd(rng, 4)
        b = barrier_eval(x)
        xi = rand_sym(rng, 4)
        act_fd = fd_hessian_action(lambda y: barrier_eval(y, False).gradient, x, xi)
        assert rel_err(b.hessian @ vec(xi), act_fd) <= 1e-6

    def test_domain(self, rng):
        with pytest.raises(DomainViolation):
            barrier_eval(-np.eye(3))

    def test_map_barrier_vs_fd(self, rng):
        pt = partial_transpose_map(2, 2)
        x = separable_ppt_state(rng, 2, 2)
        b = map_barrier_eval(pt, x)
        g_fd = fd_gradient(lambda y: map_barrier_eval(pt, y, False).value, x)
        assert rel_err(b.gradient, g_fd) <= 1e-6
        xi = rand_sym(rng, 4) * 0.01
        act_fd = fd_hessian_action(lambda y: map_barrier_eval(pt, y, False).gradient, x, xi)
        assert rel_err(b.hessian @ vec(xi), act_fd) <= 1e-5


class TestComposite:
    def test_beta_zero_is_pure_barrier(self, rng):
        x = rand_spd(rng, 3)
        obj = TraceObjective(rand_spd(rng, 3, 0.1), INVERSE)
        comp = composite_eval(0.0, [obj], [None], x)
        bar = barrier_eval(x)
        assert comp.value == pytest.approx(bar.value)
        assert np.allclose(comp.gradient, bar.gradient)
        assert np.allclose(comp.hessian, bar.hessian)

    def test_additivity(self, rng):
        x = rand_spd(rng, 3)
        obj = TraceObjective(rand_spd(rng, 3, 0.1), INVERSE)
        beta = 2.5
        comp = composite_eval(beta, [obj], [None], x)
        phi = phi_eval(obj, x)
        bar = barrier_eval(x)
        assert comp.value == pytest.approx(beta * phi.value + bar.value)
        assert np.allclose(comp.gradient, beta * phi.gradient + bar.gradient)
        assert np.allclose(comp.hessian, beta * phi.hessian + bar.hessian)

    def test_ree_composite_vs_fd(self, rng):
        c = separable_ppt_state(rng, 2, 2)
        x = separable_ppt_state(rng, 2, 2)
        pt = partial_transpose_map(2, 2)
        terms = [TraceObjective(c, NEG_LOG)]
        beta = 3.0
        b = composite_eval(beta, terms, [None, pt], x)
        g_fd = fd_gradient(lambda y: composite_value(beta, terms, [None, pt], y), x)
        assert rel_err(b.gradient, g_fd) <= 1e-6
        xi = rand_sym(rng, 4) * 0.01
        act_fd = fd_hessian_action(
            lambda y: composite_eval(beta, terms, [None, pt], y, False).gradient, x, xi)
        assert rel_err(b.hessian @ vec(xi), act_fd) <= 1e-5

    def test_error_names_offending_term(self, rng):
        bell = np.zeros((4, 4))
        bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
        x = symmetrize(0.95 * bell + 0.05 * np.eye(4) / 4)  # PD but not PPT
        pt = partial_transpose_map(2, 2)
        with pytest.raises(DomainViolation, match="barrier term 1"):
            composite_eval(1.0, [TraceObjective(np.eye(4), NEG_LOG)], [None, pt], x)


class TestCompatibilityInequality:
    def test_spot_check(self, rng):
        # |D^3 phi| <= 3 D^2 phi sqrt(D^2 B) for anti-monotone trace objectives
        from qipsolve.oracle import fd_cubic_form

        for gen in ALL_GENERATORS:
            for _ in range(5):
                n = 4
                c = rand_spd(rng, n, 0.1)
                obj = TraceObjective(c, gen)
                x = rand_spd(rng, n)
                xi = rand_sym(rng, n)
                d2phi = float(vec(xi) @ (phi_eval(obj, x).hessian @ vec(xi)))
                d2b = float(vec(xi) @ (barrier_eval(x).hessian @ vec(xi)))
                d3 = fd_cubic_form(lambda y: phi_eval(obj, y).hessian, x, xi)
                bound = 3.0 * d2phi * np.sqrt(d2b)
                assert abs(d3) <= bound + 1e-4 * max(1.0, bound)
