"""Prime-field arithmetic and the small dense linear algebra the codec needs.

Matrices are galois FieldArrays; numpy's linalg functions dispatch to the
field-aware implementations.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

import galois
import numpy as np

from src.exceptions.exceptions import (
    DimensionMismatchError,
    DuplicatePsiError,
    InvalidModulusError,
    SingularMatrixError,
    ZeroInverseError,
)


@lru_cache(maxsize=None)
def get_field(q: int) -> type[galois.FieldArray]:
    """Return the cached GF(q) class for a prime q."""
    if q < 2 or not galois.is_prime(q):
        raise InvalidModulusError(f"Field modulus must be prime, got {q}")
    return galois.GF(q)


def as_ints(values) -> np.ndarray:
    """Plain int64 view of field elements or integer sequences."""
    arr = np.asarray(values)
    if isinstance(arr, galois.FieldArray):
        arr = arr.view(np.ndarray)
    return arr.astype(np.int64)


def to_field(GF: type[galois.FieldArray], values) -> galois.FieldArray:
    """Lift integers (possibly negative or >= q) into canonical residues."""
    return GF(np.mod(as_ints(values), GF.order))


def inv(a: galois.FieldArray) -> galois.FieldArray:
    if int(a) == 0:
        raise ZeroInverseError("Zero has no multiplicative inverse")
    return type(a)(1) / a


def mat_mul(A: galois.FieldArray, B: galois.FieldArray) -> galois.FieldArray:
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimensionMismatchError(f"Cannot multiply {A.shape} by {B.shape}")
    return A @ B


def rank(A: galois.FieldArray) -> int:
    """Row rank over the field (Gaussian elimination)."""
    if A.size == 0:
        return 0
    return int(np.linalg.matrix_rank(A))


def mat_inv(A: galois.FieldArray) -> galois.FieldArray:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"Only square matrices are invertible, got {A.shape}")
    if rank(A) < A.shape[0]:
        raise SingularMatrixError(f"Matrix of size {A.shape[0]} is singular")
    return np.linalg.inv(A)


def solve(A: galois.FieldArray, b: galois.FieldArray) -> galois.FieldArray:
    """Solve A x = b for square nonsingular A."""
    if A.shape[0] != b.shape[0]:
        raise DimensionMismatchError(f"Right-hand side {b.shape} does not match {A.shape}")
    return mat_inv(A) @ b


def vandermonde(GF: type[galois.FieldArray], psis: Sequence[int], D: int) -> galois.FieldArray:
    """Row j is [1, psi_j, ..., psi_j^(D-1)]."""
    reduced = [int(p) % GF.order for p in psis]
    if len(set(reduced)) != len(reduced):
        raise DuplicatePsiError(f"Evaluation points must be distinct, got {list(psis)}")
    q = GF.order
    return GF([[pow(p, d, q) for d in range(D)] for p in reduced])


def power_row(GF: type[galois.FieldArray], psi: int, D: int) -> galois.FieldArray:
    """The column Psi_f = [1, psi, ..., psi^(D-1)] used for repair and routing."""
    q = GF.order
    return GF([pow(int(psi) % q, d, q) for d in range(D)])


def stack(GF: type[galois.FieldArray], rows: Iterable[galois.FieldArray], width: int) -> galois.FieldArray:
    """Stack 1-d field rows into a matrix, keeping an explicit width for empty input."""
    rows = [as_ints(r) for r in rows]
    if not rows:
        return GF.Zeros((0, width))
    return GF(np.vstack(rows))
