"""Independent reference computations used as ground truth in tests.

Nothing here goes through the interpreter or the transforms: plain Python
loops only, so expected values are produced by a second route.
"""

from __future__ import annotations


def matmul_ref(a: list, b: list, c0: list, n: int) -> list:
    """C = C0 + A*B over row-major n*n matrices."""
    out = list(c0)
    for row in range(n):
        for col in range(n):
            total = 0
            for k in range(n):
                total += a[row * n + k] * b[k * n + col]
            out[row * n + col] = c0[row * n + col] + total
    return out


def stencil_ref(matrix: list, n: int) -> list:
    """In-place row-major 9-point averaging over the interior, sequential."""
    out = list(matrix)
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            total = (out[(i - 1) * n + (j - 1)] + out[(i - 1) * n + j] +
                     out[(i - 1) * n + (j + 1)] + out[i * n + (j - 1)] +
                     out[i * n + j] + out[i * n + (j + 1)] +
                     out[(i + 1) * n + (j - 1)] + out[(i + 1) * n + j] +
                     out[(i + 1) * n + (j + 1)])
            out[i * n + j] = total / 9.0
    return out


def array_init_ref(length: int) -> list:
    return list(range(length))


def dependent_sum_ref(length: int) -> int:
    return sum(range(length))


def nested_accumulate_ref(length: int) -> list:
    inner = sum(range(length))
    return [i * inner for i in range(length)]


def reciprocal_sum_ref(length: int) -> float:
    """Matches the generated kernel exactly, including the i=0 division."""
    total = 0.0
    for i in range(length):
        if i == 0:
            total += float("inf")
        else:
            total += 1.0 / float(i)
    return total


def unroll_iteration_counts(trip: int, factor: int) -> tuple[int, int]:
    """(main-body points, remainder points) for checked partial unrolling."""
    if factor == 1:
        return trip, 0
    return factor * (trip // factor), trip % factor
