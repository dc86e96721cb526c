"""Jackknife estimate of the limiting variance used by the half-normal law.

For observation i, let g(i) be the average of (symmetrized psi_1 minus
symmetrized psi_3) over all 3-subsets of the remaining rows, with row i
occupying the first argument slot. The estimate is

    sigma0_sq = (n - 1) / (n - 4)^2 * sum_i g(i)^2

``jackknife_brute`` evaluates g(i) by literal subset enumeration through
``symmetrized_psi_pair``. ``jackknife_fast`` collapses the same average to
row-sum statistics of the kernel matrices; the reduction is gated on the
brute oracle in CI because every term in it is easy to get subtly wrong.

Reduction (N = n - 1, all diagonals zeroed; u_i = sum_p a_ip b_ip,
r/c the row sums of A~/B~, p_i = (A~ c)_i, q_i = (B~ r)_i,
T1 = sum u_i, Sig3 = r.c - T1, and Sig3(-i) = Sig3 - r_i c_i - p_i - q_i + 3 u_i
the triple sum avoiding index i):

    g1(i) = u_i / (2N) + (T1 - 2 u_i) / (2 N (N-1))
    g3(i) = (r_i c_i + p_i + q_i - 3 u_i) / (4 N (N-1))
            + Sig3(-i) / (4 N (N-1) (N-2))
    g(i)  = g1(i) - g3(i)

g1 collects the 3 pairs containing i (each subset element appears with
probability 3/N) and the 3 pairs inside the subset (probability
6/(N(N-1)) per fixed pair); g3 splits the 24 ordered triples of the
4-point set by where i sits (apex, second, third, absent).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data_model import KernelPairSpec, Sample
from .errors import fail
from .kernels import PairKernelMatrices, build_pair_matrices
from .ustat import TupleBudget, symmetrized_psi_pair


@dataclass(frozen=True)
class JackknifeEstimate:
    sigma0_sq: float
    n: int
    method: str  # "brute" | "fast"

    def __post_init__(self):
        if not (self.sigma0_sq >= 0.0) or not math.isfinite(self.sigma0_sq):
            raise fail("NONFINITE", f"sigma0_sq={self.sigma0_sq!r}")

    @property
    def sigma0(self) -> float:
        return math.sqrt(self.sigma0_sq)


def _require_pair(spec: KernelPairSpec):
    if not spec.is_pair_dependent:
        raise fail("PAIR_KERNEL_REQUIRED", f"no jackknife for {spec.id} (arity {spec.m})")


def jackknife_brute(
    sample: Sample, spec: KernelPairSpec, budget: Optional[TupleBudget] = None
) -> JackknifeEstimate:
    """Literal enumeration of the jackknife display; O(n^4) and budget-capped."""
    _require_pair(spec)
    m = spec.m
    n = sample.n
    if budget is None:
        budget = TupleBudget.default_for(m)
    if n <= m:
        raise fail("TOO_SMALL", f"need n > {m}, got n={n}")
    budget.check(n, m)
    mats = build_pair_matrices(sample, spec)
    total = 0.0
    for i in range(n):
        others = [j for j in range(n) if j != i]
        vals = []
        for subset in itertools.combinations(others, m - 1):
            idx = (i,) + subset
            vals.append(
                symmetrized_psi_pair(mats, 1, idx) - symmetrized_psi_pair(mats, 3, idx)
            )
        g = math.fsum(vals) / len(vals)
        total += g * g
    return JackknifeEstimate((n - 1) / (n - m) ** 2 * total, n, "brute")


def jackknife_fast(mats: PairKernelMatrices) -> JackknifeEstimate:
    """O(n^2) reduction of the jackknife display; equals the brute value to 1e-10."""
    _require_pair(mats.spec)
    n = mats.n
    m = mats.spec.m
    if n <= m:
        raise fail("TOO_SMALL", f"need n > {m}, got n={n}")
    at = np.array(mats.a, dtype=np.float64)
    bt = np.array(mats.b, dtype=np.float64)
    np.fill_diagonal(at, 0.0)
    np.fill_diagonal(bt, 0.0)
    r = at.sum(axis=1)
    c = bt.sum(axis=1)
    u = (at * bt).sum(axis=1)
    t1 = float(u.sum())
    p = at @ c
    q = bt @ r
    sig3 = float(r @ c) - t1
    sig3_minus_i = sig3 - r * c - p - q + 3.0 * u

    big_n = n - 1
    g1 = u / (2.0 * big_n) + (t1 - 2.0 * u) / (2.0 * big_n * (big_n - 1))
    g3 = (r * c + p + q - 3.0 * u) / (4.0 * big_n * (big_n - 1)) + sig3_minus_i / (
        4.0 * big_n * (big_n - 1) * (big_n - 2)
    )
    g = g1 - g3
    sigma0_sq = (n - 1) / (n - m) ** 2 * float(g @ g)
    return JackknifeEstimate(sigma0_sq, n, "fast")
