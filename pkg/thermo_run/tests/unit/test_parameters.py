import math
import unittest

import numpy as np

from thermo_run.models.parameters import (
    alpha_grid, mcmullen_row_weights, random_carpet, random_fiber_weights,
    random_markov_measure, random_mcmullen_pattern, random_mixing_shift, random_potential
)
from thermo_run.models.shift_space import validate_mixing


class TestAlphaGrid(unittest.TestCase):
    def test_open_grid_excludes_endpoints(self):
        grid = alpha_grid({'start': 0.0, 'stop': 0.5, 'num': 4})
        self.assertEqual(len(grid), 4)
        self.assertAlmostEqual(grid[0], 0.1)
        self.assertAlmostEqual(grid[-1], 0.4)

    def test_closed_grid(self):
        grid = alpha_grid({'start': 0.0, 'stop': 1.0, 'num': 3, 'open': False})
        self.assertEqual(grid, [0.0, 0.5, 1.0])

    def test_explicit_list_is_sorted(self):
        self.assertEqual(alpha_grid([0.3, 0.1, 0.2]), [0.1, 0.2, 0.3])

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            alpha_grid({'start': 0.0, 'num': 3})
        with self.assertRaises(ValueError):
            alpha_grid({'start': 1.0, 'stop': 0.0, 'num': 3})
        with self.assertRaises(ValueError):
            alpha_grid({'start': 0.0, 'stop': 1.0, 'num': 0})


class TestRandomSystems(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(42)

    def test_random_mixing_shift(self):
        for _ in range(20):
            space = random_mixing_shift(self.rng, max_symbols=4)
            self.assertTrue(validate_mixing(space)[0])
            self.assertLessEqual(space.symbol_count, 4)

    def test_random_potential_covers_allowed_words(self):
        space = random_mixing_shift(self.rng)
        potential = random_potential(self.rng, space, depth=2)
        potential.check_against(space)

    def test_random_markov_measure_is_compatible(self):
        space = random_mixing_shift(self.rng)
        measure = random_markov_measure(self.rng, space)
        measure.check_compatible(space)

    def test_random_carpet_and_fiber_weights(self):
        system = random_carpet(self.rng)
        weights = random_fiber_weights(self.rng, system)
        self.assertEqual(len(weights), system.row_count)
        for row, w in zip(system.rows, weights):
            self.assertEqual(w.shape, (len(row.columns),))
            self.assertAlmostEqual(float(w.sum()), 1.0)

    def test_random_mcmullen_pattern(self):
        counts = random_mcmullen_pattern(self.rng, 4, 3)
        self.assertEqual(len(counts), 3)
        self.assertGreaterEqual(sum(counts), 2)
        self.assertTrue(all(0 <= r <= 4 for r in counts))

    def test_generators_are_reproducible(self):
        first = random_mixing_shift(np.random.default_rng(7))
        second = random_mixing_shift(np.random.default_rng(7))
        self.assertEqual(first.transitions.tolist(), second.transitions.tolist())


class TestMcMullenWeights(unittest.TestCase):
    def test_row_weights(self):
        weights = mcmullen_row_weights(3, 2, [2, 1])
        exponent = math.log(2) / math.log(3)
        self.assertAlmostEqual(weights[0], 2 ** exponent / (2 ** exponent + 1))
        self.assertAlmostEqual(float(weights.sum()), 1.0)

    def test_empty_rows_are_dropped(self):
        self.assertEqual(len(mcmullen_row_weights(4, 3, [2, 0, 2])), 2)


if __name__ == '__main__':
    unittest.main()
