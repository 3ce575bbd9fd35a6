"""Turning partial allocations into complete ones, and end-to-end pipelines.

envy_cycles hands each leftover item to an agent nobody envies, rotating
bundles along envy cycles first so such an agent always exists. It preserves
EF1 and, on a separated partial allocation, the EFX level of its input.
singleton_swaps lets any agent trade their bundle for a single leftover item
they like better, which ends with no agent preferring any leftover item.

The pipelines chain a max-product start, a matching, and completion, and
return the fairness/efficiency reports claimed for each valuation class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import (
    Allocation,
    Bundle,
    Caps,
    DEFAULT_CAPS,
    Instance,
    IterationBoundError,
    format_ratio,
    full_mask,
    iter_mask,
)
from .oracle import MnwResult, exact_mnw
from .verify import (
    GuaranteeReport,
    is_alpha_efx,
    is_alpha_gmms,
    is_alpha_pmms,
    is_beta_mnw,
    is_ef1,
    within_golden_threshold,
)
from . import additive_alg, subadditive_alg


def envy_edges(instance: Instance, masks) -> list[tuple[int, int]]:
    """Directed envy: (i, j) present iff i strictly prefers j's bundle."""
    n = instance.n
    out = []
    for i in range(n):
        vi = instance.valuations[i]
        own = vi.value_mask(masks[i])
        for j in range(n):
            if i != j and vi.value_mask(masks[j]) > own:
                out.append((i, j))
    return out


def _find_cycle(n: int, edges) -> tuple[int, ...] | None:
    """First cycle by depth-first search from the lowest agent, scanning
    neighbors in ascending order."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
    color = [0] * n  # 0 fresh, 1 on path, 2 done
    path: list[int] = []

    def visit(u: int) -> tuple[int, ...] | None:
        color[u] = 1
        path.append(u)
        for w in adj[u]:
            if color[w] == 1:
                return tuple(path[path.index(w):])
            if color[w] == 0:
                found = visit(w)
                if found is not None:
                    return found
        color[u] = 2
        path.pop()
        return None

    for start in range(n):
        if color[start] == 0:
            found = visit(start)
            if found is not None:
                return found
    return None


@dataclass(frozen=True)
class EnvyCyclesResult:
    allocation: Allocation
    events: tuple[tuple, ...]   # ("rotation", agents) and ("place", item, agent)


def envy_cycles(
    instance: Instance,
    allocation: Allocation,
    unallocated: Bundle | None = None,
) -> EnvyCyclesResult:
    """Allocate every item of `unallocated` (default: all items outside the
    allocation), resolving envy cycles before each placement so the receiver
    is never envied."""
    n, m = instance.n, instance.m
    y = list(allocation.masks())
    pool = allocation.unallocated() if unallocated is None else unallocated
    if pool.mask & allocation.union_mask:
        raise ValueError("the pool overlaps the allocation")
    events: list[tuple] = []
    # rotations permute a fixed bundle multiset and strictly raise the value
    # total, so between placements there are fewer than n! of them
    budget = (m + 1) * (math.factorial(n) + 1) + n + 1
    spins = 0

    for x in iter_mask(pool.mask):
        while (cycle := _find_cycle(n, envy_edges(instance, y))) is not None:
            spins += 1
            if spins > budget:
                raise IterationBoundError(
                    f"cycle elimination ran past {budget} rotations"
                )
            rotated = list(y)
            k = len(cycle)
            for s, agent in enumerate(cycle):
                rotated[agent] = y[cycle[(s + 1) % k]]
                assert instance.value_mask(agent, rotated[agent]) > \
                    instance.value_mask(agent, y[agent])
            y = rotated
            events.append(("rotation", cycle))
        envied = {j for _, j in envy_edges(instance, y)}
        receiver = next(a for a in range(n) if a not in envied)
        y[receiver] |= 1 << x
        events.append(("place", x, receiver))

    return EnvyCyclesResult(Allocation.from_masks(y, m), tuple(events))


@dataclass(frozen=True)
class SwapResult:
    allocation: Allocation
    unallocated: Bundle
    swaps: tuple[tuple[int, int], ...]   # (agent, item) in order


def singleton_swaps(
    instance: Instance, allocation: Allocation, unallocated: Bundle
) -> SwapResult:
    """While some agent values a single leftover item above their whole
    bundle, give them that item (their best one, lowest index on ties) and
    release their bundle into the pool. Afterwards no agent prefers any
    leftover item, and each swap preserves the EFX level of the input."""
    n, m = instance.n, instance.m
    z = list(allocation.masks())
    pool = unallocated.mask
    if pool & allocation.union_mask:
        raise ValueError("the pool overlaps the allocation")
    swaps: list[tuple[int, int]] = []
    # after its first swap an agent holds a singleton whose value strictly
    # rises with each later swap, so each agent swaps at most m + 1 times
    budget = n * (m + 1)

    while True:
        chosen: tuple[int, int] | None = None
        for i in range(n):
            vi = instance.valuations[i]
            own = vi.value_mask(z[i])
            best_item = None
            best_value = None
            for x in iter_mask(pool):
                value = vi.value_mask(1 << x)
                if value > own and (best_value is None or value > best_value):
                    best_item, best_value = x, value
            if best_item is not None:
                chosen = (i, best_item)
                break
        if chosen is None:
            break
        if len(swaps) >= budget:
            raise IterationBoundError(f"swapping ran past {budget} iterations")
        agent, item = chosen
        pool = (pool | z[agent]) & ~(1 << item)
        z[agent] = 1 << item
        swaps.append((agent, item))

    return SwapResult(Allocation.from_masks(z, m), Bundle(pool), tuple(swaps))


@dataclass(frozen=True)
class PipelineResult:
    alpha: Fraction
    mnw: MnwResult
    partial: Allocation
    allocation: Allocation
    reports: tuple[GuaranteeReport, ...]
    swaps: tuple[tuple[int, int], ...]
    events: tuple[tuple, ...]
    state: object = None   # matching-stage trace holder, when kept

    @property
    def ok(self) -> bool:
        return all(report.passed for report in self.reports)

    def to_json_dict(self) -> dict:
        return {
            "alpha": format_ratio(self.alpha),
            "optimal_product": format_ratio(self.mnw.product),
            "partial": [sorted(bundle.items()) for bundle in self.partial.bundles],
            "allocation": [sorted(bundle.items()) for bundle in self.allocation.bundles],
            "reports": [report.to_json_dict() for report in self.reports],
            "swaps": [list(swap) for swap in self.swaps],
            "events": [list(event) for event in self.events],
            "ok": self.ok,
        }


def pipeline_additive(
    instance: Instance, alpha: Fraction, caps: Caps = DEFAULT_CAPS
) -> PipelineResult:
    """Max-product start, matching, then envy cycles, for additive instances.

    Requires alpha**2 + alpha <= 1. The complete result is checked for
    alpha-EFX, EF1, a (1/(alpha+1))**n product bound against the optimum,
    alpha/(alpha**2+1) groupwise shares, and alpha pairwise shares.
    """
    alpha = Fraction(alpha)
    if not within_golden_threshold(alpha):
        raise ValueError(
            f"alpha={alpha} is too large: alpha**2 + alpha must be at most 1"
        )
    mnw = exact_mnw(instance, caps)
    partial, state = additive_alg.efx_matching(instance, mnw.allocation, alpha)
    completed = envy_cycles(instance, partial)
    final = completed.allocation
    assert final.complete
    reports = (
        is_alpha_efx(instance, final, alpha),
        is_ef1(instance, final),
        is_beta_mnw(instance, final, 1 / (alpha + 1), mnw.product),
        is_alpha_gmms(instance, final, alpha / (alpha**2 + 1), caps),
        is_alpha_pmms(instance, final, alpha, caps),
    )
    return PipelineResult(
        alpha, mnw, partial, final, reports, (), completed.events, state
    )


def pipeline_subadditive(
    instance: Instance, alpha: Fraction, caps: Caps = DEFAULT_CAPS
) -> PipelineResult:
    """Max-product start, splitting matching, singleton swaps, then envy
    cycles, for monotone subadditive instances with alpha <= 1/2.

    The complete result is checked for alpha-EFX and a (1/(alpha+1))**n
    product bound against the optimum.
    """
    alpha = Fraction(alpha)
    mnw = exact_mnw(instance, caps)
    partial, state = subadditive_alg.efx_matching(instance, mnw.allocation, alpha)
    pool = Bundle(full_mask(instance.m) & ~partial.union_mask)
    swapped = singleton_swaps(instance, partial, pool)
    completed = envy_cycles(instance, swapped.allocation, swapped.unallocated)
    final = completed.allocation
    assert final.complete
    reports = (
        is_alpha_efx(instance, final, alpha),
        is_beta_mnw(instance, final, 1 / (alpha + 1), mnw.product),
    )
    return PipelineResult(
        alpha, mnw, partial, final, reports, swapped.swaps, completed.events, state
    )
