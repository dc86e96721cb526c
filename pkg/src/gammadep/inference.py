"""P-values and decisions: the permutation procedure, the half-normal
asymptotic p-value, and the three p-value combiners.

Permutation flow for one sample (B replicates):

1. scaled statistics on the original sample, one per exponent;
2. for b = 1..B permute the y rows only and recompute the statistics
   (kernel matrices are built once: permuting y rows permutes the rows and
   columns of B, so each replicate is a gather plus O(n^2) reductions);
3. per-exponent p-values for all B+1 pool members by leave-one-out ranking
   inside the shared pool, with the add-one rule (1 + count)/(B + 1);
4. combined statistics (fisher / min / cauchy) for every pool member from
   its p-value vector;
5. combined p-value for the original by ranking its combined statistic
   against the B permuted ones, add-one again.

Every permutation is a pure function of (seed, b) through a counter-based
generator, so reports are identical regardless of thread count or
execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data_model import (
    CombinedResult,
    Gamma,
    GammaResult,
    GammaSet,
    KernelPairSpec,
    Sample,
    TestReport,
    has_half_normal_limit,
    is_infinity,
)

from .errors import fail
from .metric import gamma_stats
from .ustat import TupleBudget, stat_core_for
from .variance import jackknife_fast

COMBINERS = ("fisher", "min", "cauchy")

_MASK64 = (1 << 64) - 1


def _mix64(z: int) -> int:
    """splitmix64 finalizer; the fixed mixing function behind per-b streams."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, *path: int) -> int:
    """Deterministic 64-bit child seed for a (master, path...) address."""
    out = _mix64(master & _MASK64)
    for part in path:
        out = _mix64(out ^ _mix64((part + 1) & _MASK64))
    return out


@dataclass(frozen=True)
class PermutationPlan:
    """Permutation budget plus the seed that fixes every replicate."""

    b_count: int = 200
    seed: Optional[int] = None

    def __post_init__(self):
        if self.b_count < 1:
            raise fail("BAD_PLAN", f"b_count must be positive, got {self.b_count}")
        if self.seed is not None and not (0 <= int(self.seed) <= _MASK64):
            raise fail("BAD_PLAN", "seed must fit in 64 bits")

    def permutation(self, b: int, n: int) -> np.ndarray:
        """The b-th permutation of range(n); pure function of (seed, b)."""
        if self.seed is None:
            raise fail("SEED_REQUIRED", "plan has no seed")
        k0 = derive_seed(self.seed, b)
        k1 = _mix64(k0 ^ 0xD6E8FEB86659FD93)
        rng = np.random.Generator(np.random.Philox(key=np.array([k0, k1], dtype=np.uint64)))
        return rng.permutation(n)


@dataclass(frozen=True)
class PValueVector:
    """Per-exponent p-values in candidate-set order."""

    gammas: tuple
    values: tuple

    def __post_init__(self):
        if len(self.gammas) != len(self.values):
            raise fail("BAD_PLAN", "gamma/value length mismatch")

    def __iter__(self):
        return iter(self.values)

    def per_gamma(self) -> dict:
        return {g: p for g, p in zip(self.gammas, self.values)}


def _pvals(p) -> np.ndarray:
    return np.asarray(list(p), dtype=np.float64)


def combine_fisher(p) -> float:
    """Sum of -2 log p; larger means more evidence against independence."""
    arr = _pvals(p)
    if np.any(arr <= 0.0):
        raise fail("ZERO_P", "fisher combination needs p > 0")
    return float(np.sum(-2.0 * np.log(arr)))


def combine_min(p) -> float:
    """Negative of the smallest p-value (so larger = stronger evidence)."""
    arr = _pvals(p)
    return float(-np.min(arr))


def combine_cauchy(p) -> float:
    """Sum of (1/2) tan(pi (1/2 - p)); each term carries the printed 1/2
    weight, not 1/L."""
    arr = _pvals(p)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise fail("P_BOUNDARY", "cauchy combination needs p strictly inside (0, 1)")
    return float(np.sum(0.5 * np.tan(np.pi * (0.5 - arr))))


_COMBINE = {"fisher": combine_fisher, "min": combine_min, "cauchy": combine_cauchy}


def asymptotic_pvalue(scaled_mu: float, n: int, gamma: Gamma, sigma0: float, m: int) -> float:
    """Half-normal tail p-value for even or infinite exponents.

    ``scaled_mu`` is the already-scaled statistic sqrt(n) * mu_hat. The
    studentized value is t = scaled_mu / (2^(1/gamma) * m * sigma0), with
    the 2^(1/gamma) factor defined as 1 at the infinite exponent, and
    p = 2 (1 - Phi(t)) = erfc(t / sqrt 2), clamped into (0, 1].
    """
    if not has_half_normal_limit(gamma):
        raise fail("BAD_GAMMA", f"no distribution-free limit for odd gamma {gamma}")
    if not (sigma0 > 0.0) or not math.isfinite(sigma0):
        raise fail("BAD_SIGMA", f"sigma0 must be positive, got {sigma0!r}")
    if n < 1:
        raise fail("TOO_SMALL", f"n must be >= 1, got {n}")
    factor = 1.0 if is_infinity(gamma) else 2.0 ** (1.0 / gamma)
    t = scaled_mu / (factor * m * sigma0)
    p = math.erfc(t / math.sqrt(2.0))
    return min(1.0, max(p, 5e-324))


def _pool_pvalues(pool: np.ndarray, tie_mode: str) -> np.ndarray:
    """Leave-one-out add-one p-values for every member of one statistic pool.

    strict:    p_i = (1 + #{j != i : s_j >  s_i}) / (B + 1)
    inclusive: p_i = (1 + #{j != i : s_j >= s_i}) / (B + 1)
                   = #{j : s_j >= s_i} / (B + 1)

    A member never outranks itself, so the strict count over "others" equals
    the strict count over the whole pool. When every pool statistic is
    exactly equal the pool carries no evidence and every p-value is 1
    (otherwise strict counting would grade an all-ties pool as extreme).
    """
    size = pool.shape[0]
    if np.max(pool) == np.min(pool):
        return np.ones(size, dtype=np.float64)
    order = np.sort(pool)
    if tie_mode == "strict":
        greater = size - np.searchsorted(order, pool, side="right")
        return (1.0 + greater) / size
    if tie_mode == "inclusive":
        geq = size - np.searchsorted(order, pool, side="left")
        return geq / size
    raise fail("BAD_PLAN", f"unknown tie mode {tie_mode!r}")


def _count_p(pool_stat: np.ndarray, tie_mode: str) -> float:
    """Add-one p-value of pool member 0 against members 1..B."""
    if np.max(pool_stat) == np.min(pool_stat):
        return 1.0
    rest = pool_stat[1:]
    if tie_mode == "strict":
        count = int(np.sum(rest > pool_stat[0]))
    else:
        count = int(np.sum(rest >= pool_stat[0]))
    return (1.0 + count) / pool_stat.shape[0]


def permutation_test(
    sample: Sample,
    spec: KernelPairSpec,
    gammas: GammaSet,
    plan: PermutationPlan,
    combiners=COMBINERS,
    *,
    tie_mode: str = "strict",
    threads: int = 1,
    budget: Optional[TupleBudget] = None,
) -> TestReport:
    """Run the full permutation procedure and assemble a TestReport."""
    if plan.seed is None:
        raise fail("SEED_REQUIRED", "permutation plan must carry a seed")
    if tie_mode not in ("strict", "inclusive"):
        raise fail("BAD_PLAN", f"unknown tie mode {tie_mode!r}")
    combiners = tuple(combiners)
    for c in combiners:
        if c not in _COMBINE:
            raise fail("BAD_PLAN", f"unknown combiner {c!r}")
    n = sample.n
    if n < spec.m:
        raise fail("TOO_SMALL", f"need n >= {spec.m}, got n={n}")

    core = stat_core_for(sample, spec, budget)
    glist = tuple(gammas)
    n_g = len(glist)
    b_count = plan.b_count

    triple0 = core.triple(None)
    stats0 = gamma_stats(triple0, gammas)

    scaled = np.empty((b_count + 1, n_g), dtype=np.float64)
    scaled[0] = [gs.scaled for gs in stats0]

    def one_replicate(b: int) -> np.ndarray:
        perm = plan.permutation(b, n)
        return np.array([gs.scaled for gs in gamma_stats(core.triple(perm), gammas)])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for b, row in zip(range(1, b_count + 1), pool.map(one_replicate, range(1, b_count + 1))):
                scaled[b] = row
    else:
        for b in range(1, b_count + 1):
            scaled[b] = one_replicate(b)

    # Step 3: per-exponent p-value vectors for every pool member.
    p_members = np.empty_like(scaled)
    for j in range(n_g):
        p_members[:, j] = _pool_pvalues(scaled[:, j], tie_mode)

    # Step 4: combined statistic per pool member; the cauchy transform is fed
    # p-values capped at B/(B+1) to stay clear of the tan singularity at 1.
    combined = {}
    cap = b_count / (b_count + 1.0)
    for name in combiners:
        fn = _COMBINE[name]
        feed = np.minimum(p_members, cap) if name == "cauchy" else p_members
        stats_pool = np.array([fn(feed[i]) for i in range(b_count + 1)])
        combined[name] = CombinedResult(
            stat=float(stats_pool[0]), p_perm=_count_p(stats_pool, tie_mode)
        )

    sigma0_sq = None
    sigma0 = None
    if spec.is_pair_dependent and n > spec.m:
        est = jackknife_fast(core.mats)
        sigma0_sq = est.sigma0_sq
        sigma0 = est.sigma0

    per_gamma = {}
    for j, (g, gs) in enumerate(zip(glist, stats0)):
        p_asym = None
        if has_half_normal_limit(g) and sigma0 is not None and sigma0 > 0.0:
            p_asym = asymptotic_pvalue(gs.scaled, n, g, sigma0, spec.m)
        per_gamma[g] = GammaResult(
            mu_hat=gs.mu_hat,
            scaled_stat=gs.scaled,
            p_perm=float(p_members[0, j]),
            p_asym=p_asym,
        )

    meta = {
        "b_count": b_count,
        "seed": int(plan.seed),
        "kernel": spec,
        "gammas": glist,
        "n": n,
        "d1": sample.d1,
        "d2": sample.d2,
        "combiners": combiners,
        "tie_mode": tie_mode,
    }
    return TestReport(
        triple=triple0,
        per_gamma=per_gamma,
        combined=combined,
        sigma0_sq=sigma0_sq,
        meta=meta,
    )
