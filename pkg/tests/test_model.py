import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointconst.model import (
    ChannelSet,
    Constellation,
    MessageSpace,
    PowerConstraint,
    ZeroChannel,
    enumerate_joint_messages,
    noise_var_from_snr,
    normalize_channel,
    simulate_observations,
)
from jointconst.streams import substream

SQ2 = np.sqrt(2.0) / 2.0


class TestMessageSpace:
    def test_two_binary_users(self):
        space = MessageSpace(sizes=(2, 2))
        assert enumerate_joint_messages(space) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_single_user(self):
        space = MessageSpace(sizes=(2,))
        assert enumerate_joint_messages(space) == [(0,), (1,)]

    def test_mixed_radix_order(self):
        space = MessageSpace(sizes=(2, 3))
        msgs = enumerate_joint_messages(space)
        assert len(msgs) == 6
        assert msgs[5] == (1, 2)

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ValueError):
            MessageSpace(sizes=(2, 1))

    @given(st.lists(st.integers(min_value=2, max_value=5), min_size=1, max_size=5))
    def test_index_tuple_roundtrip(self, sizes):
        space = MessageSpace(sizes=tuple(sizes))
        for i in range(space.total):
            assert space.tuple_to_index(space.index_to_tuple(i)) == i

    def test_digits_of_user_matches_enumeration(self):
        space = MessageSpace(sizes=(2, 3, 2))
        msgs = enumerate_joint_messages(space)
        for k in range(3):
            expected = [m[k] for m in msgs]
            assert list(space.digits_of_user(k)) == expected


class TestNormalizeChannel:
    def test_scaled_axis(self):
        g, zeta = normalize_channel(np.array([[2.0], [0.0]]))
        assert g == pytest.approx(4.0)
        assert np.allclose(zeta, [[1.0], [0.0]])

    def test_already_unit_norm(self):
        h = np.array([[1.0], [0.0]], dtype=complex)
        g, zeta = normalize_channel(h)
        assert g == pytest.approx(1.0)
        assert np.allclose(zeta, h)

    def test_diagonal_direction(self):
        g, zeta = normalize_channel(np.array([[1.0], [1.0]]))
        assert g == pytest.approx(2.0)
        assert np.allclose(zeta, [[SQ2], [SQ2]])

    def test_zero_channel_raises(self):
        with pytest.raises(ZeroChannel):
            normalize_channel(np.zeros((2, 1)))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50)
    def test_norm_identity(self, draw_seed):
        rng = np.random.default_rng(draw_seed)
        h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        g, zeta = normalize_channel(h)
        assert np.sum(np.abs(zeta) ** 2) == pytest.approx(1.0, abs=1e-12)
        assert g * np.sum(np.abs(zeta) ** 2) == pytest.approx(
            np.sum(np.abs(h) ** 2), rel=1e-12
        )


class TestNoiseVarFromSnr:
    def test_zero_db(self):
        assert noise_var_from_snr(0.0, 1.0) == pytest.approx(1.0)

    def test_six_db(self):
        assert noise_var_from_snr(6.0, 1.0) == pytest.approx(0.251188643150958, rel=1e-12)

    def test_eight_db(self):
        assert noise_var_from_snr(8.0, 1.0) == pytest.approx(0.15848931924611134, rel=1e-12)

    def test_strictly_decreasing(self):
        grid = [noise_var_from_snr(s, 2.0) for s in np.linspace(-10, 20, 31)]
        assert all(a > b for a, b in zip(grid, grid[1:]))

    @given(st.floats(min_value=1e-6, max_value=1e6))
    def test_roundtrip(self, var):
        snr = 10.0 * np.log10(3.0 / var)
        assert noise_var_from_snr(snr, 3.0) == pytest.approx(var, rel=1e-12)

    def test_rejects_nonpositive_power(self):
        with pytest.raises(ValueError):
            noise_var_from_snr(0.0, 0.0)


def _scalar_setup(noise_var):
    space = MessageSpace(sizes=(2,))
    const = Constellation(points=np.array([[1.0 + 0j], [-1.0 + 0j]]))
    chan = ChannelSet.from_normalized([np.array([[1.0 + 0j]])], [noise_var])
    return space, const, chan


class TestSimulateObservations:
    def test_noiseless_limit(self):
        space, const, chan = _scalar_setup(1e-300)
        msgs = np.array([0, 1, 0, 1])
        batch = simulate_observations(const, chan, 0, msgs, substream(0, "n"))
        clean = const.points[msgs] @ chan.zeta[0].conj()
        assert np.allclose(batch.y, clean, atol=1e-100)

    def test_sample_mean_converges(self):
        _, const, chan = _scalar_setup(0.5)
        n = 40_000
        msgs = np.zeros(n, dtype=int)
        batch = simulate_observations(const, chan, 0, msgs, substream(1, "n"))
        # real part has variance noise_var, so its mean-estimate std is known
        bound = 3.0 * np.sqrt(0.5) / np.sqrt(n)
        assert abs(np.mean(batch.y.real) - 1.0) < bound

    def test_noise_moments(self):
        _, const, chan = _scalar_setup(0.37)
        n = 100_000
        msgs = np.zeros(n, dtype=int)
        batch = simulate_observations(const, chan, 0, msgs, substream(2, "n"))
        resid = batch.y - const.points[msgs] @ chan.zeta[0].conj()
        # each real dimension carries noise_var
        assert np.var(resid.real) == pytest.approx(0.37, rel=0.05)
        assert np.var(resid.imag) == pytest.approx(0.37, rel=0.05)

    def test_bit_identical_given_seed(self):
        _, const, chan = _scalar_setup(0.5)
        msgs = np.array([0, 1, 1, 0, 1])
        a = simulate_observations(const, chan, 0, msgs, substream(3, "noise"))
        b = simulate_observations(const, chan, 0, msgs, substream(3, "noise"))
        assert np.array_equal(a.y, b.y)

    def test_rejects_bad_indices(self):
        _, const, chan = _scalar_setup(0.5)
        with pytest.raises(ValueError):
            simulate_observations(const, chan, 0, np.array([5]), substream(0, "n"))


class TestDomainTypes:
    def test_constellation_rejects_nan(self):
        with pytest.raises(ValueError):
            Constellation(points=np.array([[np.nan + 0j]]))

    def test_constellation_immutable(self):
        const = Constellation(points=np.ones((2, 2), dtype=complex))
        with pytest.raises(ValueError):
            const.points[0, 0] = 0.0

    def test_channelset_requires_unit_norm(self):
        with pytest.raises(ValueError):
            ChannelSet(
                zeta=np.array([[[2.0 + 0j]]]), gain=np.array([1.0]), noise_var=np.array([1.0])
            )

    def test_channelset_requires_positive_noise(self):
        with pytest.raises(ValueError):
            ChannelSet.from_normalized([np.array([[1.0 + 0j]])], [0.0])

    def test_channelset_from_raw_channels(self):
        chan = ChannelSet.from_raw_channels([np.array([[2.0 + 0j]])], sigma2=1.0)
        assert chan.gain[0] == pytest.approx(4.0)
        assert chan.noise_var[0] == pytest.approx(0.25)

    def test_stacked_concatenates_users(self):
        chan = ChannelSet.from_normalized(
            [np.array([[1.0 + 0j], [0.0 + 0j]]), np.array([[0.0 + 0j], [1.0 + 0j]])],
            [1.0, 1.0],
        )
        assert np.allclose(chan.stacked(), np.eye(2))

    def test_power_constraint_requires_cap_above_budget(self):
        with pytest.raises(ValueError):
            PowerConstraint(mean_power=2.0, peak_antenna_power=1.0)
