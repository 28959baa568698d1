import math

import numpy as np
import pytest

from bcilm import (ConfigError, DataFormatError, Population,
                   generate_population, load_population,
                   rescale_min_distance, write_population)


class TestGenerate:
    def test_coordinates_in_range(self):
        pop = generate_population(1000, (100, 300), (100, 300), rng_seed=4)
        assert pop.n == 1000
        assert pop.coords[:, 0].min() >= 100 and pop.coords[:, 0].max() <= 300
        assert pop.coords[:, 1].min() >= 100 and pop.coords[:, 1].max() <= 300

    def test_single_individual(self):
        pop = generate_population(1, (0, 1), (0, 1), rng_seed=0)
        assert pop.distance_matrix.shape == (1, 1)
        assert pop.distance_matrix[0, 0] == 0.0

    def test_seed_determinism(self):
        a = generate_population(50, (0, 10), (0, 10), rng_seed=9)
        b = generate_population(50, (0, 10), (0, 10), rng_seed=9)
        c = generate_population(50, (0, 10), (0, 10), rng_seed=10)
        assert np.array_equal(a.coords, b.coords)
        assert not np.array_equal(a.coords, c.coords)

    def test_invalid_range_rejected(self):
        with pytest.raises(ConfigError):
            generate_population(5, (3, 3), (0, 1), rng_seed=0)
        with pytest.raises(ConfigError):
            generate_population(5, (0, 1), (2, 1), rng_seed=0)
        with pytest.raises(ConfigError):
            generate_population(0, (0, 1), (0, 1), rng_seed=0)


class TestDistances:
    def test_hand_computed_values(self):
        pop = Population([[0, 0], [3, 4], [0, 8]])
        d = pop.distance_matrix
        assert d[0, 1] == pytest.approx(5.0, abs=1e-12)
        assert d[1, 2] == pytest.approx(math.sqrt(9 + 16), abs=1e-12)
        assert d[0, 2] == pytest.approx(8.0, abs=1e-12)

    def test_matches_euclidean_everywhere(self):
        pop = generate_population(40, (0, 50), (0, 50), rng_seed=2)
        for i in range(pop.n):
            for j in range(pop.n):
                expected = math.dist(pop.coords[i], pop.coords[j])
                assert abs(pop.distance_matrix[i, j] - expected) <= 1e-9

    def test_symmetric_zero_diagonal(self):
        pop = generate_population(30, (0, 10), (0, 10), rng_seed=5)
        d = pop.distance_matrix
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0.0)

    def test_immutable(self):
        pop = generate_population(5, (0, 1), (0, 1), rng_seed=1)
        with pytest.raises(ValueError):
            pop.coords[0, 0] = 99.0
        with pytest.raises(ValueError):
            pop.distance_matrix[0, 1] = 1.0


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path):
        pop = generate_population(20, (0, 10), (0, 10), rng_seed=7)
        path = tmp_path / "pop.csv"
        write_population(pop, path)
        loaded = load_population(path)
        assert np.array_equal(loaded.coords, pop.coords)

    def test_two_row_distance(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text("id,x,y\n0,0,0\n1,1,0\n")
        pop = load_population(path)
        assert pop.distance_matrix[0, 1] == 1.0

    def test_duplicate_id_reports_line(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text("id,x,y\n0,0,0\n0,1,0\n")
        with pytest.raises(DataFormatError, match=r":3: duplicate id 0"):
            load_population(path)

    def test_non_numeric_reports_line(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text("id,x,y\n0,0,0\n1,one,0\n")
        with pytest.raises(DataFormatError, match=r":3"):
            load_population(path)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text("id,x\n0,0\n")
        with pytest.raises(DataFormatError):
            load_population(path)

    def test_binary_covariate_column(self, tmp_path):
        path = tmp_path / "farms.csv"
        path.write_text("id,x,y,z\n0,0,0,1\n1,1,0,0\n2,2,0,1\n")
        pop = load_population(path)
        assert pop.covariate_names == ("z",)
        assert pop.covariates.shape == (3, 1)
        assert np.array_equal(pop.covariate_column(0), [1.0, 0.0, 1.0])

    def test_non_contiguous_ids_rejected(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text("id,x,y\n1,0,0\n2,1,0\n")
        with pytest.raises(DataFormatError, match="0..1"):
            load_population(path)

    def test_row_order_irrelevant(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text("id,x,y\n1,5,0\n0,0,0\n")
        pop = load_population(path)
        assert pop.coords[0, 0] == 0.0 and pop.coords[1, 0] == 5.0


class TestRescale:
    def test_scales_up_to_target(self):
        pop = Population([[0, 0], [0.25, 0], [1, 1]])
        scaled = rescale_min_distance(pop, 1.0)
        off = scaled.distance_matrix[~np.eye(3, dtype=bool)]
        assert off.min() == pytest.approx(1.0, abs=1e-12)

    def test_already_above_target_unchanged(self):
        pop = Population([[0, 0], [2, 0]])
        assert rescale_min_distance(pop, 1.0) is pop

    def test_ratios_preserved(self):
        pop = generate_population(15, (0, 0.5), (0, 0.5), rng_seed=3)
        scaled = rescale_min_distance(pop, 1.0)
        mask = ~np.eye(pop.n, dtype=bool)
        ratio = scaled.distance_matrix[mask] / pop.distance_matrix[mask]
        assert np.all(np.abs(ratio / ratio[0] - 1.0) <= 1e-12)

    def test_coincident_points_error(self):
        pop = Population([[1, 1], [1, 1]])
        with pytest.raises(ValueError, match="coincident"):
            rescale_min_distance(pop, 1.0)

    def test_doubling_example(self):
        pop = Population([[0, 0], [0.5, 0]])
        scaled = rescale_min_distance(pop, 1.0)
        assert scaled.distance_matrix[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert scaled.coords[1, 0] == pytest.approx(1.0, abs=1e-12)
