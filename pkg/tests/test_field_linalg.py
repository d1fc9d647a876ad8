import unittest

import numpy as np

from src.exceptions.exceptions import (
    DimensionMismatchError,
    DuplicatePsiError,
    InvalidModulusError,
    SingularMatrixError,
    ZeroInverseError,
)
from src.utils.field_linalg import get_field, inv, mat_inv, mat_mul, power_row, rank, solve, stack, to_field, vandermonde


class FieldTest(unittest.TestCase):
    def test_prime_fields_are_cached(self):
        self.assertIs(get_field(13), get_field(13))
        self.assertEqual(get_field(13).order, 13)

    def test_composite_modulus_rejected(self):
        with self.assertRaises(InvalidModulusError):
            get_field(12)
        with self.assertRaises(InvalidModulusError):
            get_field(1)

    def test_inverse(self):
        GF = get_field(13)
        self.assertEqual(int(inv(GF(3)) * GF(3)), 1)
        self.assertEqual(int(inv(GF(2))), 7)
        with self.assertRaises(ZeroInverseError):
            inv(GF(0))

    def test_to_field_reduces_negatives(self):
        GF = get_field(13)
        self.assertEqual(to_field(GF, [-1, 14, 26]).tolist(), [12, 1, 0])


class LinearAlgebraTest(unittest.TestCase):
    def setUp(self):
        self.GF = get_field(13)

    def test_rank(self):
        GF = self.GF
        self.assertEqual(rank(GF([[1, 2], [2, 4]])), 1)
        self.assertEqual(rank(GF([[1, 2], [3, 4]])), 2)
        self.assertEqual(rank(GF.Zeros((0, 3))), 0)

    def test_singular_inverse_rejected(self):
        with self.assertRaises(SingularMatrixError):
            mat_inv(self.GF([[1, 2], [2, 4]]))
        with self.assertRaises(DimensionMismatchError):
            mat_inv(self.GF([[1, 2, 3], [4, 5, 6]]))

    def test_solve(self):
        GF = self.GF
        A = GF([[2, 1], [1, 3]])
        x = GF([5, 7])
        self.assertTrue(np.array_equal(solve(A, A @ x), x))

    def test_mat_mul_shape_check(self):
        with self.assertRaises(DimensionMismatchError):
            mat_mul(self.GF([[1, 2]]), self.GF([[1, 2]]))

    def test_vandermonde(self):
        psi = vandermonde(self.GF, [1, 2, 3, 4], 3)
        self.assertEqual(psi.tolist(), [[1, 1, 1], [1, 2, 4], [1, 3, 9], [1, 4, 3]])
        self.assertEqual(power_row(self.GF, 4, 3).tolist(), [1, 4, 3])

    def test_vandermonde_rejects_repeated_points(self):
        with self.assertRaises(DuplicatePsiError):
            vandermonde(self.GF, [1, 14], 2)

    def test_stack_keeps_width_when_empty(self):
        self.assertEqual(stack(self.GF, [], 3).shape, (0, 3))
        self.assertEqual(stack(self.GF, [self.GF([1, 2]), self.GF([3, 4])], 2).tolist(), [[1, 2], [3, 4]])


if __name__ == "__main__":
    unittest.main()
