import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qamlink.modem import (
    SUPPORTED_ORDERS,
    bandwidth_plan,
    build_constellation,
    demap_hard,
    ebn0_for_ber,
    evm_rms,
    map_bits,
    theoretical_ber,
)

orders = pytest.mark.parametrize("order", SUPPORTED_ORDERS)


class TestConstellation:
    def test_rejects_unsupported_order(self):
        for bad in (2, 8, 32, 128, 512):
            with pytest.raises(ValueError):
                build_constellation(bad)

    @orders
    def test_unit_average_energy(self, order):
        cmap = build_constellation(order)
        assert np.mean(np.abs(cmap.points) ** 2) == pytest.approx(1.0, abs=1e-12)

    @orders
    def test_labels_are_a_bijection(self, order):
        cmap = build_constellation(order)
        assert cmap.points.size == order
        assert np.unique(cmap.points).size == order

    def test_qpsk_points(self):
        cmap = build_constellation(4)
        expected = {(s * 0.5 ** 0.5, t * 0.5 ** 0.5) for s in (-1, 1) for t in (-1, 1)}
        got = {(round(p.real, 12), round(p.imag, 12)) for p in cmap.points}
        assert got == {(round(a, 12), round(b, 12)) for a, b in expected}

    def test_raw_grid_energy_before_scaling(self):
        """The odd-integer grid averages 2(M-1)/3 before normalization."""
        for order, raw in ((16, 10.0), (256, 170.0)):
            cmap = build_constellation(order)
            scale = math.sqrt(2.0 * (order - 1) / 3.0)
            raw_energy = np.mean(np.abs(cmap.points * scale) ** 2)
            assert raw_energy == pytest.approx(raw, rel=1e-12)

    def test_16qam_corner_magnitude(self):
        cmap = build_constellation(16)
        assert np.abs(cmap.points).max() == pytest.approx(1.3416407864998738, rel=1e-12)

    @orders
    def test_gray_adjacency_exhaustive(self, order):
        """Grid neighbours along I or Q differ in exactly one label bit."""
        cmap = build_constellation(order)
        step = cmap.min_distance()
        index_of = {(round(p.real, 9), round(p.imag, 9)): label
                    for label, p in enumerate(cmap.points)}
        checked = 0
        for label, p in enumerate(cmap.points):
            for di, dq in ((step, 0.0), (0.0, step)):
                key = (round(p.real + di, 9), round(p.imag + dq, 9))
                if key in index_of:
                    neighbour = index_of[key]
                    assert bin(label ^ neighbour).count("1") == 1
                    checked += 1
        side = int(math.isqrt(order))
        assert checked == 2 * side * (side - 1)


class TestMapping:
    def test_empty_bits(self):
        cmap = build_constellation(16)
        assert map_bits([], cmap).size == 0

    def test_all_zero_byte_maps_to_label_zero(self):
        cmap = build_constellation(256)
        assert map_bits(np.zeros(8, dtype=np.uint8), cmap)[0] == cmap.points[0]

    def test_random_bits_land_on_constellation(self):
        cmap = build_constellation(16)
        rng = np.random.default_rng(5)
        symbols = map_bits(rng.integers(0, 2, 16, dtype=np.uint8), cmap)
        assert symbols.size == 4
        for s in symbols:
            assert np.min(np.abs(cmap.points - s)) < 1e-12

    def test_ragged_bit_count_rejected(self):
        cmap = build_constellation(16)
        with pytest.raises(ValueError):
            map_bits([0, 1, 0], cmap)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(SUPPORTED_ORDERS), st.data())
    def test_roundtrip(self, order, data):
        cmap = build_constellation(order)
        n_sym = data.draw(st.integers(min_value=1, max_value=64))
        bits = np.array(
            data.draw(st.lists(st.integers(0, 1),
                               min_size=n_sym * cmap.bits_per_symbol,
                               max_size=n_sym * cmap.bits_per_symbol)),
            dtype=np.uint8)
        assert np.array_equal(demap_hard(map_bits(bits, cmap), cmap), bits)

    def test_small_displacement_keeps_bits(self):
        cmap = build_constellation(256)
        rng = np.random.default_rng(11)
        bits = rng.integers(0, 2, 8 * 500, dtype=np.uint8)
        symbols = map_bits(bits, cmap)
        angles = rng.uniform(0, 2 * np.pi, symbols.size)
        offset = 0.49 * cmap.min_distance() / 2.0 * np.exp(1j * angles)
        assert np.array_equal(demap_hard(symbols + offset, cmap), bits)

    @orders
    def test_midpoint_tie_goes_to_smaller_label(self, order):
        cmap = build_constellation(order)
        half = cmap.bits_per_symbol // 2
        levels, labels = cmap.axis_levels, cmap.axis_labels
        for k in range(levels.size - 1):
            mid = 0.5 * (levels[k] + levels[k + 1])
            q_label = labels[0]
            sample = np.array([mid + 1j * levels[0]])
            winner = min((labels[k] << half) | q_label,
                         (labels[k + 1] << half) | q_label)
            got = demap_hard(sample, cmap)
            expected = ((winner >> np.arange(cmap.bits_per_symbol - 1, -1, -1)) & 1)
            assert np.array_equal(got, expected.astype(np.uint8))


class TestBandwidthPlan:
    def test_paper_rates(self):
        plan = bandwidth_plan(1e9, 256)
        assert plan.symbol_rate_hz == pytest.approx(125e6)
        assert plan.null_to_null_hz == pytest.approx(250e6)
        assert bandwidth_plan(1e9, 4).null_to_null_hz == pytest.approx(1000e6)

    def test_tiny_rate(self):
        plan = bandwidth_plan(2.0, 4)
        assert plan.symbol_rate_hz == 1.0
        assert plan.null_to_null_hz == 2.0

    def test_identities(self):
        for order in SUPPORTED_ORDERS:
            plan = bandwidth_plan(3e8, order)
            assert plan.null_to_null_hz == 2.0 * plan.symbol_rate_hz
            assert plan.symbol_rate_hz * plan.bits_per_symbol == plan.bit_rate_bps

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            bandwidth_plan(0.0, 4)
        with pytest.raises(ValueError):
            bandwidth_plan(1e9, 5)


class TestTheoreticalBer:
    def test_256qam_at_published_ebn0(self):
        """The nearest-neighbour curve gives ~1.4e-6 at 23.39 dB, comfortably
        under the 1e-5 design point the link budget is built around."""
        ber = theoretical_ber(256, 23.39)
        assert ber <= 1e-5
        assert ber == pytest.approx(1.366318380176548e-06, rel=1e-9)

    def test_qpsk_classic_point(self):
        ber = theoretical_ber(4, 9.6)
        assert ber == pytest.approx(9.736176018578627e-06, rel=1e-9)
        assert 5e-6 < ber < 2e-5

    def test_infinite_ebn0(self):
        assert theoretical_ber(256, math.inf) == 0.0

    def test_strictly_decreasing_in_ebn0(self):
        # stop before the Gaussian tail underflows to exactly zero
        grid = np.arange(-5.0, 24.0, 0.5)
        for order in SUPPORTED_ORDERS:
            ber = theoretical_ber(order, grid)
            assert np.all(np.diff(ber) < 0.0)

    def test_increasing_in_order_at_fixed_ebn0(self):
        for ebn0 in (6.0, 10.0, 15.0, 20.0):
            values = [theoretical_ber(order, ebn0) for order in SUPPORTED_ORDERS]
            assert values == sorted(values)

    def test_capped_at_half(self):
        assert theoretical_ber(4, -60.0) <= 0.5


class TestEbn0ForBer:
    def test_256qam_inversion(self):
        assert ebn0_for_ber(256, 1e-5) == pytest.approx(22.503, abs=0.02)

    def test_roundtrip(self):
        target = theoretical_ber(4, 10.0)
        assert ebn0_for_ber(4, target) == pytest.approx(10.0, abs=0.01)

    def test_consistency_with_forward_curve(self):
        for order in SUPPORTED_ORDERS:
            for target in (1e-2, 1e-4, 1e-6):
                ebn0 = ebn0_for_ber(order, target)
                assert theoretical_ber(order, ebn0) == pytest.approx(target, rel=0.01)

    def test_unreachable_target_stays_finite_and_monotone(self):
        """256-QAM never reaches BER 0.4; the inversion pins to the search
        floor instead of diverging."""
        high = ebn0_for_ber(256, 0.4)
        assert math.isfinite(high) and high < 0.0
        targets = (0.4, 0.2, 0.05, 1e-3, 1e-6)
        results = [ebn0_for_ber(256, t) for t in targets]
        assert results == sorted(results)

    def test_rejects_out_of_range_target(self):
        for bad in (0.0, 0.5, 1.0, -0.1):
            with pytest.raises(ValueError):
                ebn0_for_ber(4, bad)


class TestEvm:
    def test_identical_sequences(self):
        ref = np.array([1 + 1j, -1 + 1j, 0.5 - 0.25j])
        assert evm_rms(ref, ref) == pytest.approx(0.0, abs=1e-12)

    def test_pure_gain_is_not_error(self):
        ref = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
        assert evm_rms(ref, 2.0 * ref) == pytest.approx(0.0, abs=1e-9)

    def test_fixed_offset_four_symbols(self):
        """Offset orthogonal to the reference on average: closed-form value
        evaluated inline with plain complex arithmetic."""
        ref = [1 + 0j, 1j, -1 + 0j, -1j]
        meas = [r + 0.05 for r in ref]
        scale = sum(m.conjugate() * r for m, r in zip(meas, ref)) / sum(
            abs(m) ** 2 for m in meas)
        err = sum(abs(scale * m - r) ** 2 for m, r in zip(meas, ref)) / 4
        expected = 100.0 * math.sqrt(err / 1.0)
        got = evm_rms(ref, meas)
        assert got == pytest.approx(expected, abs=1e-9)
        assert got == pytest.approx(5.0, abs=0.1)

    @settings(max_examples=50, deadline=None)
    @given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3,
                              allow_nan=False, allow_infinity=False))
    def test_invariant_under_complex_scaling(self, scale):
        rng = np.random.default_rng(17)
        ref = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        meas = ref + 0.1 * (rng.standard_normal(64) + 1j * rng.standard_normal(64))
        base = evm_rms(ref, meas)
        assert evm_rms(ref, scale * meas) == pytest.approx(base, rel=1e-6)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            evm_rms([1 + 0j], [1 + 0j, 2 + 0j])
        with pytest.raises(ValueError):
            evm_rms([0j, 0j], [1 + 0j, 1 + 0j])
        with pytest.raises(ValueError):
            evm_rms([], [])
