import numpy as np
import pytest

from beamselect import (
    PAPER_PRINTED,
    ChannelConfig,
    dpc_precoder,
    dpc_sum_rate,
    det_sum_rate,
    generate_channel,
    qr_positive_diag,
    to_beamspace,
    trial_seed,
    upper_bound,
    water_fill,
)
from beamselect.errors import DegenerateSelectionError, InvalidInputError


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestQrPositiveDiag:
    def test_identity(self):
        f = qr_positive_diag(np.eye(3))
        np.testing.assert_allclose(f.Q, np.eye(3), atol=1e-14)
        np.testing.assert_allclose(f.R, np.eye(3), atol=1e-14)

    def test_scalar(self):
        f = qr_positive_diag([[2.0]])
        np.testing.assert_allclose(f.Q, [[1.0]])
        np.testing.assert_allclose(f.R, [[2.0]])

    def test_random_reconstruction(self):
        rng = np.random.default_rng(1)
        A = random_complex(rng, (8, 4))
        f = qr_positive_diag(A)
        assert np.linalg.norm(f.Q @ f.R - A) / np.linalg.norm(A) < 1e-12
        assert np.linalg.norm(f.Q.conj().T @ f.Q - np.eye(4)) < 1e-12
        d = np.diagonal(f.R)
        assert np.all(np.abs(d.imag) == 0.0)
        assert np.min(d.real) > 0

    def test_upper_triangular(self):
        rng = np.random.default_rng(2)
        f = qr_positive_diag(random_complex(rng, (6, 6)))
        np.testing.assert_allclose(f.R, np.triu(f.R))

    def test_scale_covariance(self):
        rng = np.random.default_rng(3)
        A = random_complex(rng, (7, 3))
        base = qr_positive_diag(A).diag
        scaled = qr_positive_diag(2.5 * A).diag
        np.testing.assert_allclose(scaled, 2.5 * base, rtol=1e-12)

    def test_rank_deficient_rejected(self):
        A = np.ones((4, 2), dtype=complex)
        with pytest.raises(DegenerateSelectionError):
            qr_positive_diag(A)


class TestDpcPrecoder:
    def test_identity_channel(self):
        P = dpc_precoder(qr_positive_diag(np.eye(4)))
        np.testing.assert_allclose(P, np.eye(4), atol=1e-14)

    def test_orthogonal_rows_give_diag_of_norms(self):
        # channel rows orthogonal with norms 2 and 3
        H = np.array([[2.0, 0.0, 0.0], [0.0, 3.0, 0.0]], dtype=complex)
        f = qr_positive_diag(H.conj().T)
        P = dpc_precoder(f)
        np.testing.assert_allclose(H @ P, np.diag([2.0, 3.0]), atol=1e-12)

    def test_random_diagonalization(self):
        rng = np.random.default_rng(5)
        H = random_complex(rng, (8, 16))  # 8 users, 16 beams
        f = qr_positive_diag(H.conj().T)
        eff = H @ dpc_precoder(f)
        off = eff - np.diag(np.diagonal(eff))
        assert np.max(np.abs(off)) < 1e-9 * np.max(np.abs(np.diagonal(eff)))
        np.testing.assert_allclose(np.diagonal(eff).real, f.diag, rtol=1e-10)


class TestWaterFill:
    def test_symmetric(self):
        a = water_fill([1.0, 1.0], 2.0)
        np.testing.assert_allclose(a.lambdas, [1.0, 1.0])
        assert a.beta == pytest.approx(2.0)

    def test_weak_user_dropped(self):
        # joint water level 50.375 would give the weak user -49.625
        a = water_fill([4.0, 0.01], 0.5)
        np.testing.assert_allclose(a.lambdas, [0.5, 0.0])
        assert a.beta == pytest.approx(0.75)
        np.testing.assert_array_equal(a.active_set, [0])

    def test_equal_gains_split_evenly(self):
        a = water_fill([3.3] * 5, 7.0)
        np.testing.assert_allclose(a.lambdas, np.full(5, 1.4))

    def test_budget_respected(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            g = rng.uniform(0.01, 10.0, size=rng.integers(1, 9))
            P = rng.uniform(0.1, 100.0)
            a = water_fill(g, P)
            assert a.lambdas.sum() == pytest.approx(P, abs=1e-9 * P)
            assert np.all(a.lambdas >= 0)
            # KKT: active users sit at the water level
            act = a.lambdas > 0
            np.testing.assert_allclose(a.lambdas[act] + 1.0 / g[act], a.beta, rtol=1e-9)

    def test_perturbation_never_improves(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            g = rng.uniform(0.05, 5.0, size=6)
            P = rng.uniform(0.5, 50.0)
            a = water_fill(g, P)

            def objective(lam):
                return np.sum(np.log2(1.0 + g * lam))

            base = objective(a.lambdas)
            eps = 1e-4 * P
            act = np.flatnonzero(a.lambdas > eps)
            for i in act:
                for j in act:
                    if i == j:
                        continue
                    lam = a.lambdas.copy()
                    lam[i] -= eps
                    lam[j] += eps
                    assert objective(lam) <= base + 1e-12

    def test_invalid_inputs(self):
        with pytest.raises(InvalidInputError):
            water_fill([], 1.0)
        with pytest.raises(InvalidInputError):
            water_fill([1.0], 0.0)
        with pytest.raises(InvalidInputError):
            water_fill([0.0, 1.0], 1.0)


class TestDpcSumRate:
    def test_single_user_single_beam(self):
        h = np.array([[1.7 + 0.4j]])
        g = abs(h[0, 0]) ** 2
        P = 3.0
        rep = dpc_sum_rate(h, [0], [0], P)
        assert rep.sum_rate == pytest.approx(np.log2(1 + g * P), rel=1e-12)

    def test_two_orthogonal_equal_users(self):
        g = 2.0
        h = np.sqrt(g) * np.eye(2, 4, dtype=complex)
        P = 5.0
        rep = dpc_sum_rate(h, [0, 1], [0, 1, 2, 3], P)
        assert rep.sum_rate == pytest.approx(2 * np.log2(1 + g * P / 2), rel=1e-12)

    def test_rate_is_a_set_function(self):
        rng = np.random.default_rng(11)
        h = random_complex(rng, (5, 9))
        a = dpc_sum_rate(h, [3, 0, 2], [8, 1, 4], 10.0).sum_rate
        b = dpc_sum_rate(h, [0, 2, 3], [1, 4, 8], 10.0).sum_rate
        assert a == pytest.approx(b, rel=1e-14)

    def test_printed_variant_matches_log2_beta_r(self):
        rng = np.random.default_rng(12)
        h = random_complex(rng, (3, 6))
        rep = dpc_sum_rate(h, [0, 1, 2], range(6), 50.0, variant=PAPER_PRINTED)
        r = rep.gains  # the printed variant fills over r_u directly
        expected = np.sum(np.maximum(np.log2(rep.allocation.beta * r), 0.0))
        assert rep.sum_rate == pytest.approx(expected, rel=1e-10)

    def test_det_route_consistency_via_precoder(self):
        # det form evaluated on the precoder-diagonalized channel with the
        # water-filled loads reproduces the QR-route rate exactly
        rng = np.random.default_rng(13)
        for _ in range(20):
            h = random_complex(rng, (4, 4))
            P = float(rng.uniform(1.0, 1000.0))
            rep = dpc_sum_rate(h, range(4), range(4), P)
            f = qr_positive_diag(h.conj().T)
            eff = h @ dpc_precoder(f)
            rxx = np.diag(rep.allocation.lambdas / P).astype(complex)
            assert det_sum_rate(eff, rxx, P) == pytest.approx(rep.sum_rate, abs=1e-9)

    def test_det_uniform_dominates_qr_uniform(self):
        # log-majorization: eigenvalues of the Gram matrix spread more than
        # the squared QR diagonal, so the determinant form with uniform
        # power cannot fall below the QR rate at uniform power
        rng = np.random.default_rng(14)
        for _ in range(50):
            U = int(rng.integers(2, 6))
            B = int(rng.integers(U, 8))
            h = random_complex(rng, (U, B))
            P = float(rng.uniform(0.5, 500.0))
            r = qr_positive_diag(h.conj().T).diag
            qr_uniform = np.sum(np.log2(1.0 + r**2 * P / U))
            det_uniform = det_sum_rate(h, np.eye(B) / B, P * B / U)
            assert det_uniform >= qr_uniform - 1e-9

    def test_per_user_rates_sum(self):
        rng = np.random.default_rng(15)
        h = random_complex(rng, (4, 7))
        rep = dpc_sum_rate(h, range(4), range(7), 20.0)
        assert rep.sum_rate == pytest.approx(rep.per_user_rates.sum())
        assert np.all(rep.per_user_rates >= 0)

    def test_degenerate_selection_rejected(self):
        h = np.ones((3, 5), dtype=complex)  # duplicate user rows
        with pytest.raises(DegenerateSelectionError):
            dpc_sum_rate(h, [0, 1], range(5), 10.0)

    def test_empty_selection_rejected(self):
        h = np.ones((2, 2), dtype=complex)
        with pytest.raises(InvalidInputError):
            dpc_sum_rate(h, [], [0], 1.0)

    def test_more_users_than_beams_rejected(self):
        rng = np.random.default_rng(16)
        h = random_complex(rng, (3, 4))
        with pytest.raises(InvalidInputError):
            dpc_sum_rate(h, [0, 1, 2], [0, 1], 1.0)


class TestDetSumRate:
    def test_zero_channel(self):
        assert det_sum_rate(np.zeros((2, 3)), np.eye(3) / 3, 5.0) == pytest.approx(0.0)

    def test_identity_case(self):
        # I + 2 * I * (1/2) = 2I -> 2 * log2(2) = 2
        assert det_sum_rate(np.eye(2), np.eye(2) / 2, 2.0) == pytest.approx(2.0)

    def test_matches_eigenvalue_sum(self):
        rng = np.random.default_rng(17)
        H = random_complex(rng, (4, 6))
        rho = 3.0
        got = det_sum_rate(H, np.eye(6) / 6, rho)
        evals = np.linalg.eigvalsh(H @ H.conj().T / 6)
        expected = np.sum(np.log2(1 + rho * evals))
        assert got == pytest.approx(expected, rel=1e-10)

    def test_non_psd_rejected(self):
        with pytest.raises(InvalidInputError):
            det_sum_rate(np.eye(2), np.diag([0.5, -0.5]), 1.0)


class TestUpperBound:
    def test_single_user_capacity(self):
        rng = np.random.default_rng(18)
        h = random_complex(rng, (1, 8))
        P = 7.0
        ub = upper_bound(h, 1, P)
        assert ub == pytest.approx(np.log2(1 + P * np.linalg.norm(h) ** 2), rel=1e-12)

    def test_single_beam_rate_below_bound(self):
        rng = np.random.default_rng(19)
        h = random_complex(rng, (1, 8))
        P = 7.0
        best = int(np.argmax(np.abs(h[0])))
        achieved = dpc_sum_rate(h, [0], [best], P).sum_rate
        assert achieved <= upper_bound(h, 1, P) + 1e-12

    def test_orthogonal_single_beam_users_attain_bound(self):
        # each user's power confined to one distinct beam: discarding the
        # other beams costs nothing
        gains = np.array([1.5, 0.9, 2.2])
        h = np.zeros((3, 8), dtype=complex)
        for k, g in enumerate(gains):
            h[k, 2 * k + 1] = g
        P = 10.0
        bound = upper_bound(h, 3, P)
        achieved = dpc_sum_rate(h, [0, 1, 2], [1, 3, 5], P).sum_rate
        assert achieved == pytest.approx(bound, abs=1e-9)

    def test_random_trial_bound_dominates_algorithms(self):
        from beamselect import algorithm1, algorithm2, algorithm3

        cfg = ChannelConfig(K=8, N=32)
        h = to_beamspace(generate_channel(cfg, trial_seed(21, 0))).data
        P = 10 ** 2.0
        bound = upper_bound(h, 4, P)
        for alg in (algorithm1, algorithm2, algorithm3):
            sel = alg(h, 4)
            rate = dpc_sum_rate(h, sel.users, sel.beams, P).sum_rate
            assert rate <= bound + 1e-9


class TestLemmaInvariants:
    def test_appendix_identity_quick(self):
        # prod r_u = sqrt(det Gamma) on random full-rank instances
        rng = np.random.default_rng(22)
        for _ in range(50):
            U = int(rng.integers(1, 8))
            B = int(rng.integers(U, 10))
            h = random_complex(rng, (U, B))
            r = qr_positive_diag(h.conj().T).diag
            sign, logdet = np.linalg.slogdet(h @ h.conj().T)
            assert sign.real > 0
            assert abs(np.exp(np.sum(np.log(r)) - 0.5 * logdet) - 1.0) < 1e-9

    def test_det_monotone_in_beams(self):
        rng = np.random.default_rng(23)
        h = random_complex(rng, (3, 12))
        order = rng.permutation(12)
        logdets = []
        for size in range(3, 13):
            sub = h[:, order[:size]]
            logdets.append(np.linalg.slogdet(sub @ sub.conj().T)[1])
        assert np.all(np.diff(logdets) >= np.log(1 - 1e-12))

    def test_zero_beam_column_keeps_det(self):
        rng = np.random.default_rng(24)
        h = random_complex(rng, (3, 5))
        g1 = np.linalg.det(h @ h.conj().T)
        h2 = np.hstack([h, np.zeros((3, 1))])
        g2 = np.linalg.det(h2 @ h2.conj().T)
        assert g2 == pytest.approx(g1, rel=1e-12)

    def test_rate_monotone_in_beams_high_power(self):
        cfg = ChannelConfig(K=6, N=20)
        h = to_beamspace(generate_channel(cfg, trial_seed(25, 0))).data
        users = [0, 2, 5]
        order = np.random.default_rng(25).permutation(20)
        rates = [
            dpc_sum_rate(h, users, order[:size], 1e3).sum_rate for size in range(3, 12)
        ]
        assert np.all(np.diff(rates) >= -1e-6)

    def test_rate_increases_with_users_high_power(self):
        cfg = ChannelConfig(K=6, N=24)
        h = to_beamspace(generate_channel(cfg, trial_seed(26, 0))).data
        from beamselect import select_users

        users, _ = select_users(h, 4)
        rates = []
        for m in range(1, 5):
            rep = dpc_sum_rate(h, users[:m], range(24), 1e3)
            assert rep.allocation.active_set.size == m  # adequate power
            rates.append(rep.sum_rate)
        assert np.all(np.diff(rates) > 0)
