import numpy as np
import pytest

from beamselect import (
    PAPER_CONVENTION,
    UNITARY_CONVENTION,
    ChannelConfig,
    dft_matrix,
    generate_channel,
    read_channel_dump,
    steering_vector,
    to_beamspace,
    trial_seed,
    write_channel_dump,
)
from beamselect.channel import DUMP_HEADER, DUMP_MAGIC
from beamselect.errors import InvalidConfigError, InvalidInputError


class TestSteeringVector:
    def test_zero_frequency_is_all_ones(self):
        v = steering_vector(0.0, 4)
        np.testing.assert_allclose(v.entries, np.ones(4))

    def test_pi_alternates(self):
        v = steering_vector(np.pi, 2)
        np.testing.assert_allclose(v.entries, [1, -1], atol=1e-15)

    def test_quarter_turn(self):
        v = steering_vector(np.pi / 2, 4)
        np.testing.assert_allclose(v.entries, [1, 1j, -1, -1j], atol=1e-15)

    def test_unit_modulus(self):
        v = steering_vector(1.2345, 64)
        np.testing.assert_allclose(np.abs(v.entries), 1.0)

    def test_zero_length_rejected(self):
        with pytest.raises(InvalidInputError):
            steering_vector(0.0, 0)


class TestDftMatrix:
    def test_n1(self):
        np.testing.assert_allclose(dft_matrix(1), [[1.0]])

    def test_n2_paper(self):
        np.testing.assert_allclose(dft_matrix(2), 0.5 * np.array([[1, 1], [1, -1]]), atol=1e-15)

    def test_paper_product_is_scaled_identity(self):
        F = dft_matrix(8)
        np.testing.assert_allclose(F @ F.conj().T, np.eye(8) / 8, atol=1e-12)

    def test_unitary_product_is_identity(self):
        F = dft_matrix(8, UNITARY_CONVENTION)
        np.testing.assert_allclose(F @ F.conj().T, np.eye(8), atol=1e-12)

    def test_entry_formula(self):
        F = dft_matrix(5)
        a, b = 3, 4
        assert F[a, b] == pytest.approx(np.exp(-2j * np.pi * a * b / 5) / 5)

    def test_unknown_convention(self):
        with pytest.raises(InvalidInputError):
            dft_matrix(4, "bogus")


class TestGenerateChannel:
    def test_single_los_path_is_steering_row(self):
        # one user, one path; force theta=0 by zero AoD range and LoS power 0 dB
        cfg = ChannelConfig(K=1, N=8, paths_per_user=1, aod_limit_deg=0.0)
        H = generate_channel(cfg, 3)
        # the only randomness left is the gain phase
        gain = H.paths[0][0].gain
        np.testing.assert_allclose(H.data[0], gain * np.ones(8), atol=1e-12)
        assert abs(gain) == pytest.approx(1.0)

    def test_same_seed_bit_identical(self):
        cfg = ChannelConfig(K=5, N=16)
        a = generate_channel(cfg, 77)
        b = generate_channel(cfg, 77)
        assert np.array_equal(a.data, b.data)

    def test_different_seed_differs(self):
        cfg = ChannelConfig(K=5, N=16)
        a = generate_channel(cfg, 77)
        b = generate_channel(cfg, 78)
        assert not np.array_equal(a.data, b.data)

    def test_row_matches_stored_paths(self):
        cfg = ChannelConfig(K=3, N=12)
        H = generate_channel(cfg, 5)
        n = np.arange(12)
        for k in range(3):
            row = sum(
                p.gain * np.exp(1j * n * np.pi * np.sin(p.angle_of_departure))
                for p in H.paths[k]
            )
            np.testing.assert_allclose(H.data[k], row, rtol=1e-12)

    @pytest.mark.parametrize("model", ["constant", "rayleigh"])
    def test_mean_path_powers(self, model):
        # Table values: LoS 0 dB, two NLoS at -10 dB; 1e4 path samples
        cfg = ChannelConfig(K=40, N=256, paths_per_user=3, gain_model=model)
        gains = []
        trials = int(np.ceil(1e4 / (40 * 3)))
        for t in range(trials):
            H = generate_channel(cfg, trial_seed(9, t))
            gains.extend(
                [abs(p.gain) ** 2 for user in H.paths for p in user]
            )
        gains = np.array(gains).reshape(-1, 3)
        mean = gains.mean(axis=0)
        np.testing.assert_allclose(mean, [1.0, 0.1, 0.1], rtol=0.05)

    def test_aod_within_range(self):
        cfg = ChannelConfig(K=10, N=4)
        H = generate_channel(cfg, 1)
        aods = [p.angle_of_departure for user in H.paths for p in user]
        assert all(-np.pi / 2 <= a <= np.pi / 2 for a in aods)

    def test_invalid_config(self):
        with pytest.raises(InvalidConfigError):
            ChannelConfig(K=0, N=4)
        with pytest.raises(InvalidConfigError):
            ChannelConfig(K=4, N=4, paths_per_user=0)


class TestToBeamspace:
    def test_identity_channel_gives_dft(self):
        H = np.eye(6, dtype=complex)
        bc = to_beamspace(H)
        np.testing.assert_allclose(bc.data, dft_matrix(6), atol=1e-12)

    def test_matches_explicit_matrix_product(self):
        rng = np.random.default_rng(0)
        H = rng.standard_normal((4, 16)) + 1j * rng.standard_normal((4, 16))
        for conv in (PAPER_CONVENTION, UNITARY_CONVENTION):
            bc = to_beamspace(H, conv)
            ref = H @ dft_matrix(16, conv)
            assert np.linalg.norm(bc.data - ref) / np.linalg.norm(ref) < 1e-12

    def test_grid_aligned_path_concentrates(self):
        # single path at u = 2*pi*p/N lands entirely in beam p
        N, p = 16, 5
        gain = 0.7 - 0.2j
        row = gain * steering_vector(2 * np.pi * p / N, N).entries
        bc = to_beamspace(row[None, :], UNITARY_CONVENTION)
        mags = np.abs(bc.data[0])
        assert np.argmax(mags) == p
        assert mags[p] == pytest.approx(np.sqrt(N) * abs(gain), rel=1e-12)
        others = np.delete(mags, p)
        assert np.max(others) < 1e-10

    def test_parseval_under_unitary(self):
        rng = np.random.default_rng(3)
        H = rng.standard_normal((5, 32)) + 1j * rng.standard_normal((5, 32))
        bc = to_beamspace(H, UNITARY_CONVENTION)
        assert np.linalg.norm(bc.data) == pytest.approx(np.linalg.norm(H), rel=1e-10)

    def test_steering_orthogonality_on_grid(self):
        N = 32
        a1 = steering_vector(2 * np.pi * 3 / N, N).entries
        a2 = steering_vector(2 * np.pi * 9 / N, N).entries
        assert abs(np.vdot(a1, a2)) / N < 1e-12

    def test_steering_crosscorrelation_shrinks_with_n(self):
        u1, u2 = 0.3, 1.1
        vals = []
        for N in (32, 128, 512):
            a1 = steering_vector(u1, N).entries
            a2 = steering_vector(u2, N).entries
            vals.append(abs(np.vdot(a1, a2)) / N)
        assert vals[2] < vals[1] < vals[0]


class TestChannelDump:
    def test_round_trip_beamspace(self, tmp_path):
        cfg = ChannelConfig(K=3, N=8)
        bc = to_beamspace(generate_channel(cfg, 11))
        path = tmp_path / "chan.bsch"
        write_channel_dump(path, bc)
        data, conv = read_channel_dump(path)
        assert conv == PAPER_CONVENTION
        np.testing.assert_array_equal(data, bc.data)

    def test_round_trip_antenna_domain(self, tmp_path):
        cfg = ChannelConfig(K=2, N=4)
        H = generate_channel(cfg, 11)
        path = tmp_path / "chan.bsch"
        write_channel_dump(path, H)
        data, conv = read_channel_dump(path)
        assert conv is None
        np.testing.assert_array_equal(data, H.data)

    def test_header_layout(self, tmp_path):
        cfg = ChannelConfig(K=2, N=4)
        bc = to_beamspace(generate_channel(cfg, 1))
        path = tmp_path / "chan.bsch"
        write_channel_dump(path, bc)
        raw = path.read_bytes()
        assert DUMP_HEADER.size == 24
        assert raw[:4] == DUMP_MAGIC
        K = int.from_bytes(raw[4:8], "little")
        N = int.from_bytes(raw[8:12], "little")
        assert (K, N) == (2, 4)
        assert raw[12] == 1  # paper convention byte
        assert len(raw) == 24 + 2 * 8 * K * N

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bsch"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(InvalidInputError):
            read_channel_dump(path)
