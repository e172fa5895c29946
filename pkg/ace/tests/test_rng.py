import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, strategies as st

from ace.rng import RngState, Stage

u64 = st.integers(min_value=0, max_value=2 ** 64 - 1)


class RngStateTests(SimpleTestCase):
    @given(u64, st.integers(0, 1000))
    def test_same_seed_and_counter_give_the_same_stream(self, seed, counter):
        a = RngState(seed, counter).generator().random(5)
        b = RngState(seed, counter).generator().random(5)
        np.testing.assert_array_equal(a, b)

    def test_counter_changes_the_stream(self):
        self.assertFalse(np.array_equal(RngState(20230531).generator().random(4),
                                        RngState(20230531, 1).generator().random(4)))

    def test_derived_streams_depend_on_every_key(self):
        root = RngState(1)
        seeds = {root.seed_for(Stage.ATTACK, 7, i) for i in range(50)}
        self.assertEqual(len(seeds), 50)
        self.assertNotEqual(root.seed_for(Stage.PROXY, 0), root.seed_for(Stage.FOREIGN_PROXY, 0))
        self.assertEqual(root.derive(Stage.EVAL, 3), RngState(1).derive(Stage.EVAL, 3))

    def test_seed_must_fit_in_64_bits(self):
        with self.assertRaises(ValueError):
            RngState(2 ** 64)
        with self.assertRaises(ValueError):
            RngState(-1)
