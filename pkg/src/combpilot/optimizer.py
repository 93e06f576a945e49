"""Reference-channel selection for projection-based phase correction.

A set of D reference channels defines a D x 2 selection matrix Q (rows
[1, d]); estimates on the references propagate to all L channels through
T @ pinv(Q). Under i.i.d. per-reference estimation errors the projected
error power is proportional to ||T Q^+||_F^2, so the best reference set
minimizes that Frobenius norm. Both an exhaustive search and the
closed-form optimum (extreme channels, split low/high) are provided and
must agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numpy.typing import NDArray

from .model import mixing_matrix

# Exhaustive enumeration guard: C(L, D) above this is refused.
MAX_ENUMERATION = 100_000


@dataclass(frozen=True)
class ReferenceSet:
    """Reference channel indices with the derived projection matrices."""

    n_channels: int
    indices: tuple[int, ...]
    q: NDArray[np.float64]  # D x 2, rows [1, d_i]
    q_pinv: NDArray[np.float64]  # 2 x D Moore-Penrose inverse
    proj: NDArray[np.float64]  # L x D, equals T @ q_pinv

    @property
    def d(self) -> int:
        return len(self.indices)


def build_reference_set(n_channels: int, indices) -> ReferenceSet:
    """Materialize Q, its pseudoinverse and the L x D projection matrix.

    Q always has full column rank for >= 2 distinct indices, so the
    pseudoinverse is the plain normal-equations solve (Q^T Q)^-1 Q^T with
    an exact 2 x 2 inverse.
    """
    m_max = (n_channels - 1) // 2
    if n_channels < 3 or n_channels % 2 == 0:
        raise ValueError(f"n_channels must be odd and >= 3, got {n_channels}")
    idx = tuple(sorted(int(i) for i in indices))
    if len(idx) < 2:
        raise ValueError("need at least 2 reference channels (rank-2 Q)")
    if len(set(idx)) != len(idx):
        raise ValueError(f"reference indices must be distinct, got {idx}")
    if idx[0] < -m_max or idx[-1] > m_max:
        raise ValueError(f"reference indices {idx} outside [-{m_max}, {m_max}]")

    d = len(idx)
    q = np.empty((d, 2))
    q[:, 0] = 1.0
    q[:, 1] = idx
    s1 = float(q[:, 1].sum())
    s2 = float((q[:, 1] ** 2).sum())
    det = d * s2 - s1 * s1  # > 0 for distinct indices
    gram_inv = np.array([[s2, -s1], [-s1, float(d)]]) / det
    q_pinv = gram_inv @ q.T
    proj = mixing_matrix(n_channels) @ q_pinv
    return ReferenceSet(n_channels=n_channels, indices=idx, q=q, q_pinv=q_pinv, proj=proj)


def frobenius_criterion(rs: ReferenceSet) -> float:
    """||T Q^+||_F^2, the i.i.d.-error amplification of the projection.

    Summed with fsum so that mirrored sets (negated indices), whose
    projection entries are bitwise-identical up to permutation, give
    bitwise-identical criteria.
    """
    return math.fsum((rs.proj * rs.proj).ravel().tolist())


def enumerate_criteria(n_channels: int, d: int) -> list[tuple[tuple[int, ...], float]]:
    """(indices, criterion) for every size-d subset, in lexicographic order."""
    m_max = (n_channels - 1) // 2
    if not 2 <= d <= n_channels:
        raise ValueError(f"d must be in [2, {n_channels}], got {d}")
    n_subsets = math.comb(n_channels, d)
    if n_subsets > MAX_ENUMERATION:
        raise ValueError(
            f"C({n_channels},{d}) = {n_subsets} subsets exceeds the enumeration "
            f"guard of {MAX_ENUMERATION}"
        )
    out = []
    for subset in combinations(range(-m_max, m_max + 1), d):
        rs = build_reference_set(n_channels, subset)
        out.append((subset, frobenius_criterion(rs)))
    return out


def brute_force_optimal(n_channels: int, d: int) -> tuple[ReferenceSet, float]:
    """Exhaustive minimizer of the criterion; first (lexicographic) winner on ties."""
    best_subset = None
    best_crit = math.inf
    for subset, crit in enumerate_criteria(n_channels, d):
        if crit < best_crit:
            best_subset = subset
            best_crit = crit
    return build_reference_set(n_channels, best_subset), best_crit


def closed_form_optimal(n_channels: int, d: int) -> ReferenceSet:
    """Optimal set without search: ceil(d/2) lowest and floor(d/2) highest channels."""
    m_max = (n_channels - 1) // 2
    if not 2 <= d <= n_channels:
        raise ValueError(f"d must be in [2, {n_channels}], got {d}")
    n_low = (d + 1) // 2
    n_high = d // 2
    low = range(-m_max, -m_max + n_low)
    high = range(m_max - n_high + 1, m_max + 1)
    return build_reference_set(n_channels, list(low) + list(high))


def d_opt_heuristic(n_channels: int, pilot_rate: float) -> int:
    """Conjectured best reference count at a fixed pilot rate: max(2, ceil(rate * L))."""
    if n_channels < 3 or n_channels % 2 == 0:
        raise ValueError(f"n_channels must be odd and >= 3, got {n_channels}")
    if not 0 < pilot_rate <= 1:
        raise ValueError(f"pilot_rate must be in (0, 1], got {pilot_rate}")
    # round() first to keep float dust (e.g. (1/7)*7 != 1.0) out of the ceiling
    return max(2, math.ceil(round(pilot_rate * n_channels, 9)))
