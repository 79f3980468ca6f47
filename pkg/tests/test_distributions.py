"""Distribution construction, marginals, parities, datasets, image ingestion."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import bornlab as bl
from bornlab.distributions import all_parities, walsh_hadamard_transform


def random_distribution(n, seed, concentration=1.0):
    rng = np.random.default_rng(seed)
    return bl.Distribution.from_dense(rng.dirichlet(np.full(2**n, concentration)), n)


class TestDistribution:
    def test_entries_positive_and_normalized(self):
        d = bl.Distribution.from_pairs(2, [("00", 0.5), ("11", 0.5), ("01", 0.0)])
        assert d.support_size == 2
        assert d.prob("01") == 0.0

    def test_rejects_bad_normalization(self):
        with pytest.raises(ValueError):
            bl.Distribution.from_pairs(1, [("0", 0.6), ("1", 0.5)])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            bl.Distribution.from_pairs(1, [("0", 0.5), ("0", 0.5)])

    def test_dense_round_trip(self):
        d = random_distribution(4, 0)
        assert np.allclose(bl.Distribution.from_dense(d.to_dense(), 4).to_dense(), d.to_dense())

    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=30, deadline=None)
    def test_sum_is_one(self, n, seed):
        d = random_distribution(n, seed)
        assert abs(sum(p for _, p in d.items()) - 1.0) < 1e-9

    def test_csv_round_trip(self, tmp_path):
        d = random_distribution(3, 5)
        path = tmp_path / "d.csv"
        d.write_csv(path)
        back = bl.Distribution.read_csv(path)
        assert back == d
        # headerless: the GHZ dataset serializes to exactly two lines
        ghz = bl.make_dataset("GHZ", 6)
        ghz.write_csv(path)
        assert len(path.read_text().strip().splitlines()) == 2


class TestSubsetMask:
    def test_sorts_and_validates(self):
        mask = bl.SubsetMask((3, 1, 2), n=5)
        assert mask.indices == (1, 2, 3)
        with pytest.raises(ValueError):
            bl.SubsetMask((1, 1), n=3)
        with pytest.raises(ValueError):
            bl.SubsetMask((4,), n=3)

    def test_usable_with_marginal_and_parity(self):
        d = bl.make_dataset("GHZ", 4)
        mask = bl.SubsetMask((0, 2), n=4)
        assert bl.marginal(d, mask.indices).support_size == 2
        assert bl.average_parity(d, mask.indices) == pytest.approx(1.0)


class TestEmpirical:
    def test_counts_to_probabilities(self):
        bits = np.array([[0, 0, 0]] * 3 + [[1, 1, 1]])
        samples = bl.SampleSet(3, bits, 4, seed=0)
        emp = bl.empirical_distribution(samples)
        assert emp.prob("000") == pytest.approx(0.75)
        assert emp.prob("111") == pytest.approx(0.25)

    def test_single_string_gives_point_mass(self):
        bits = np.zeros((100, 2), dtype=np.uint8)
        emp = bl.empirical_distribution(bl.SampleSet(2, bits, 100, seed=0))
        assert emp.as_dict() == {"00": 1.0}

    def test_uniform_sampling_small_but_nonzero_tvd(self):
        uniform = bl.Distribution.from_dense(np.full(16, 1 / 16), 4)
        samples = bl.sample_bitstrings(uniform, 16, seed=12)
        emp = bl.empirical_distribution(samples)
        tvd = bl.total_variation(emp, uniform)
        assert 0.0 < tvd < 2.0


class TestMarginal:
    def test_ghz_single_bit(self):
        ghz = bl.make_dataset("GHZ", 3)
        m = bl.marginal(ghz, {1})
        assert m.prob("0") == pytest.approx(0.5)
        assert m.prob("1") == pytest.approx(0.5)

    def test_point_mass_projection(self):
        d = bl.Distribution.point_mass("101")
        assert bl.marginal(d, {0, 2}).as_dict() == {"11": 1.0}

    def test_parity_dataset_two_bit_marginal_is_uniform(self):
        parity = bl.make_dataset("PARITY3", 3)
        m = bl.marginal(parity, {0, 1})
        for s in ("00", "01", "10", "11"):
            assert m.prob(s) == pytest.approx(0.25)

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError):
            bl.marginal(bl.make_dataset("GHZ", 3), set())

    @given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=25, deadline=None)
    def test_marginal_sums_to_one_and_composes(self, n, seed):
        d = random_distribution(n, seed)
        rng = np.random.default_rng(seed + 1)
        size = rng.integers(1, n + 1)
        subset = sorted(rng.choice(n, size=size, replace=False).tolist())
        m = bl.marginal(d, subset)
        assert abs(sum(p for _, p in m.items()) - 1.0) < 1e-9
        if size > 1:
            inner = sorted(rng.choice(size, size=size - 1, replace=False).tolist())
            via_positions = bl.marginal(m, inner)
            direct = bl.marginal(d, [subset[i] for i in inner])
            assert via_positions == direct or np.allclose(
                via_positions.to_dense(), direct.to_dense(), atol=1e-12
            )

    def test_product_distribution_marginal_factorizes(self):
        p = np.array([0.3, 0.8, 0.5])
        dense = np.array(
            [
                np.prod([row[i] if b else 1 - row[i] for i, b in enumerate(bits)])
                for row in [p]
                for bits in itertools.product((0, 1), repeat=3)
            ]
        )
        d = bl.Distribution.from_dense(dense, 3)
        m = bl.marginal(d, {0, 2})
        assert m.prob("11") == pytest.approx(0.3 * 0.5)
        assert m.prob("01") == pytest.approx(0.7 * 0.5)


class TestAverageParity:
    def test_ghz_even_odd(self):
        ghz = bl.make_dataset("GHZ", 4)
        assert bl.average_parity(ghz, {0, 1}) == pytest.approx(1.0)
        assert bl.average_parity(ghz, {2}) == pytest.approx(0.0)
        assert bl.average_parity(ghz, {0, 1, 2}) == pytest.approx(0.0)
        assert bl.average_parity(ghz, {0, 1, 2, 3}) == pytest.approx(1.0)

    def test_uniform_is_zero_point_mass_is_signed(self):
        uniform = bl.Distribution.from_dense(np.full(8, 1 / 8), 3)
        assert bl.average_parity(uniform, {0, 2}) == pytest.approx(0.0)
        d = bl.Distribution.point_mass("11")
        assert bl.average_parity(d, {0, 1}) == pytest.approx(1.0)
        assert bl.average_parity(d, {0}) == pytest.approx(-1.0)

    def test_empty_subset(self):
        assert bl.average_parity(bl.make_dataset("GHZ", 2), set()) == 1.0

    def test_matches_marginal_brute_force(self):
        for n in (3, 5):
            d = random_distribution(n, n)
            for size in range(1, n + 1):
                for subset in itertools.combinations(range(n), size):
                    m = bl.marginal(d, subset)
                    brute = sum(
                        p * (-1) ** s.count("1") for s, p in m.items()
                    )
                    assert bl.average_parity(d, subset) == pytest.approx(brute, abs=1e-12)

    def test_parseval_marginal_reconstruction(self):
        # k-bit marginals recover from subset parities:
        # m(x_A) = 2^-|A| sum_{B subseteq A} (-1)^{parity of x on B} z_B
        for n in (2, 4, 6):
            d = random_distribution(n, 100 + n)
            rng = np.random.default_rng(n)
            subset = tuple(sorted(rng.choice(n, size=min(3, n), replace=False).tolist()))
            m = bl.marginal(d, subset)
            for s, p in m.items():
                bits = [int(c) for c in s]
                total = 0.0
                for r in range(len(subset) + 1):
                    for positions in itertools.combinations(range(len(subset)), r):
                        z = bl.average_parity(d, [subset[i] for i in positions])
                        sign = (-1) ** sum(bits[i] for i in positions)
                        total += sign * z
                assert p == pytest.approx(total / 2 ** len(subset), abs=1e-10)

    def test_all_parities_matches_average_parity(self):
        d = random_distribution(5, 77)
        z = all_parities(d)
        for size in range(6):
            for subset in itertools.combinations(range(5), size):
                mask = sum(1 << (5 - 1 - i) for i in subset)
                assert z[mask] == pytest.approx(bl.average_parity(d, subset), abs=1e-12)

    def test_wht_involution(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(32)
        assert np.allclose(walsh_hadamard_transform(walsh_hadamard_transform(v)) / 32, v)


class TestTotalVariation:
    def test_identical_distributions(self):
        d = random_distribution(3, 3)
        assert bl.total_variation(d, d) == 0.0

    def test_disjoint_point_masses(self):
        assert bl.total_variation(
            bl.Distribution.point_mass("00"), bl.Distribution.point_mass("11")
        ) == pytest.approx(2.0)

    def test_half_overlap(self):
        p = bl.Distribution.point_mass("0")
        q = bl.Distribution.from_pairs(1, [("0", 0.5), ("1", 0.5)])
        assert bl.total_variation(p, q) == pytest.approx(1.0)

    def test_symmetry_and_length_mismatch(self):
        p, q = random_distribution(3, 1), random_distribution(3, 2)
        assert bl.total_variation(p, q) == pytest.approx(bl.total_variation(q, p))
        with pytest.raises(ValueError):
            bl.total_variation(p, random_distribution(2, 1))


class TestDatasets:
    def test_ghz(self):
        d = bl.make_dataset("GHZ", 3)
        assert d.as_dict() == {"000": 0.5, "111": 0.5}

    def test_cardinality(self):
        d = bl.make_dataset("CARDINALITY", 4)
        assert d.support_size == 6
        for s, p in d.items():
            assert s.count("1") == 2
            assert p == pytest.approx(1 / 6)

    def test_parity3_marginals_match_uniform_but_full_parity_differs(self):
        d = bl.make_dataset("PARITY3", 3)
        uniform = bl.Distribution.from_dense(np.full(8, 1 / 8), 3)
        for size in (1, 2):
            for subset in itertools.combinations(range(3), size):
                assert bl.average_parity(d, subset) == pytest.approx(
                    bl.average_parity(uniform, subset), abs=1e-15
                )
        assert bl.average_parity(d, (0, 1, 2)) == pytest.approx(1.0)

    def test_random_k_distinct_and_seeded(self):
        d1 = bl.make_dataset("RANDOM_K", 6, k=10, seed=4)
        d2 = bl.make_dataset("RANDOM_K", 6, k=10, seed=4)
        assert d1 == d2
        assert d1.support_size == 10

    def test_random_k_too_large(self):
        with pytest.raises(ValueError):
            bl.make_dataset("RANDOM_K", 2, k=5)

    def test_parity3_needs_three_bits(self):
        with pytest.raises(ValueError):
            bl.make_dataset("PARITY3", 4)

    def test_point_zero(self):
        assert bl.make_dataset("POINT_ZERO", 5).as_dict() == {"00000": 1.0}


class TestImageIngestion:
    def test_all_zero_image_maps_to_zero_string(self, tmp_path):
        path = tmp_path / "img.txt"
        path.write_text("0 0\n0 0\n")
        d = bl.ingest_image_dataset(path)
        assert d.as_dict() == {"0000": 1.0}

    def test_two_identical_images_give_point_mass(self, tmp_path):
        path = tmp_path / "img.txt"
        path.write_text("1 0\n0 1\n\n1 0\n0 1\n")
        d = bl.ingest_image_dataset(path)
        assert d.support_size == 1

    def test_threshold_from_dataset_mean(self, tmp_path):
        # pixels {1,0} and {0,1}: mean 0.5, threshold 0.05, so 1 -> hit, 0 -> miss
        path = tmp_path / "img.txt"
        path.write_text("1 0\n\n0 1\n")
        d = bl.ingest_image_dataset(path, threshold_factor=0.1)
        assert d.as_dict() == {"10": 0.5, "01": 0.5}

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "img.txt"
        path.write_text("1 0\n0 1 1\n")
        with pytest.raises(ValueError):
            bl.ingest_image_dataset(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "img.txt"
        path.write_text("\n")
        with pytest.raises(ValueError):
            bl.ingest_image_dataset(path)

    def test_row_major_bit_order(self, tmp_path):
        path = tmp_path / "img.txt"
        path.write_text("9 0\n0 9\n\n0 0\n0 9\n")
        d = bl.ingest_image_dataset(path)
        assert d.prob("1001") == pytest.approx(0.5)
        assert d.prob("0001") == pytest.approx(0.5)
