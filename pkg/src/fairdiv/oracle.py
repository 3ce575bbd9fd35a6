"""Brute-force reference searches.

These are the ground truth the algorithms are measured against: exact
max-product allocations by full enumeration (with an optional sound
branch-and-bound for additive instances), the best product achievable by any
alpha-EFX partial allocation, and certificates for the two hard families
showing the fairness/efficiency gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    Allocation,
    CapacityError,
    Caps,
    DEFAULT_CAPS,
    Instance,
    format_ratio,
)
from .instances import GeneratorSpec, generate
from .verify import efx_violation

MNW_METHODS = ("auto", "plain", "branch-and-bound")


@dataclass(frozen=True)
class MnwResult:
    """Lexicographic optimum over complete allocations.

    The objective is (count of agents with positive value, product of the
    positive values); when every agent can be made positive this is the
    max-product allocation. `product` is the plain product over all agents,
    so it is 0 unless nw_positive. Ties counts the optima; the reported
    allocation is the one with the lexicographically smallest assignment
    vector (item 0's agent first).
    """

    allocation: Allocation
    product: Fraction
    positive_agent_count: int
    ties: int

    @property
    def nw_positive(self) -> bool:
        return self.positive_agent_count == self.allocation.n

    def to_json_dict(self) -> dict:
        return {
            "allocation": [list(b.items()) for b in self.allocation.bundles],
            "product": format_ratio(self.product),
            "positive_agent_count": self.positive_agent_count,
            "ties": self.ties,
            "nw_positive": self.nw_positive,
        }


def _check_enumeration(states: int, what: str, caps: Caps) -> None:
    if states > caps.enumeration:
        raise CapacityError(
            f"{what} needs {states} states, over the enumeration cap {caps.enumeration}"
        )


def exact_mnw(
    instance: Instance,
    caps: Caps = DEFAULT_CAPS,
    method: str = "auto",
) -> MnwResult:
    """Exhaustive n^m search for the lexicographic max-product allocation.

    method "plain" visits every assignment vector; "branch-and-bound" prunes
    with the optimistic per-agent bound (current value plus everything still
    unassigned), which never excludes an optimum or a tie. Branch-and-bound
    requires additive valuations; "auto" picks it exactly for those.
    """
    if method not in MNW_METHODS:
        raise ValueError(f"method must be one of {MNW_METHODS}, got {method!r}")
    if method == "branch-and-bound" and not instance.is_additive:
        raise ValueError("branch-and-bound needs additive valuations")
    if method == "auto":
        method = "branch-and-bound" if instance.is_additive else "plain"

    n, m = instance.n, instance.m
    _check_enumeration(n**m, f"max-product search over n^m = {n}^{m}", caps)
    vals = instance.valuations

    best_key: tuple[int, Fraction] | None = None
    best_masks: tuple[int, ...] | None = None
    ties = 0
    masks = [0] * n

    def leaf_key(values) -> tuple[int, Fraction]:
        count = 0
        prod = Fraction(1)
        for v in values:
            if v > 0:
                count += 1
                prod *= v
        return count, prod

    def record(key: tuple[int, Fraction]) -> None:
        nonlocal best_key, best_masks, ties
        if best_key is None or key > best_key:
            best_key = key
            best_masks = tuple(masks)
            ties = 1
        elif key == best_key:
            ties += 1

    if method == "plain":
        current = [Fraction(0)] * n

        def walk_plain(t: int) -> None:
            if t == m:
                if instance.is_additive:
                    record(leaf_key(current))
                else:
                    record(leaf_key(vals[i].value_mask(masks[i]) for i in range(n)))
                return
            bit = 1 << t
            for agent in range(n):
                masks[agent] |= bit
                if instance.is_additive:
                    current[agent] += vals[agent].item_values[t]
                walk_plain(t + 1)
                if instance.is_additive:
                    current[agent] -= vals[agent].item_values[t]
                masks[agent] &= ~bit

        walk_plain(0)
    else:
        # rest[t][i]: agent i's value for all items t..m-1
        rest = [[Fraction(0)] * n for _ in range(m + 1)]
        for t in range(m - 1, -1, -1):
            for i in range(n):
                rest[t][i] = rest[t + 1][i] + vals[i].item_values[t]
        current = [Fraction(0)] * n

        def walk_bnb(t: int) -> None:
            if t == m:
                record(leaf_key(current))
                return
            if best_key is not None:
                bound_count = 0
                bound_prod = Fraction(1)
                for i in range(n):
                    reach = current[i] + rest[t][i]
                    if reach > 0:
                        bound_count += 1
                        bound_prod *= reach
                # a completion can only tie the bound, so a strictly worse
                # bound means the subtree holds neither optima nor ties
                if (bound_count, bound_prod) < best_key:
                    return
            bit = 1 << t
            for agent in range(n):
                masks[agent] |= bit
                current[agent] += vals[agent].item_values[t]
                walk_bnb(t + 1)
                current[agent] -= vals[agent].item_values[t]
                masks[agent] &= ~bit

        walk_bnb(0)

    assert best_masks is not None and best_key is not None
    allocation = Allocation.from_masks(best_masks, m)
    count, prod_positive = best_key
    product = prod_positive if count == n else Fraction(0)
    return MnwResult(allocation, product, count, ties)


def best_alpha_efx_product(
    instance: Instance,
    alpha: Fraction,
    caps: Caps = DEFAULT_CAPS,
) -> tuple[Fraction, Allocation]:
    """Maximum product over all alpha-EFX partial allocations, by (n+1)^m search.

    Returns the product and the first maximizing allocation in assignment
    order (per item: agent 0, .., agent n-1, unallocated).
    """
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    n, m = instance.n, instance.m
    _check_enumeration(
        (n + 1) ** m, f"alpha-EFX search over (n+1)^m = {n + 1}^{m}", caps
    )
    vals = instance.valuations

    best: Fraction | None = None
    best_masks: tuple[int, ...] | None = None
    masks = [0] * n

    def walk(t: int) -> None:
        nonlocal best, best_masks
        if t == m:
            if efx_violation(instance, masks, alpha) is None:
                prod = Fraction(1)
                for i in range(n):
                    prod *= vals[i].value_mask(masks[i])
                if best is None or prod > best:
                    best = prod
                    best_masks = tuple(masks)
            return
        bit = 1 << t
        for agent in range(n):
            masks[agent] |= bit
            walk(t + 1)
            masks[agent] &= ~bit
        walk(t + 1)  # leave item t unallocated

    walk(0)
    assert best is not None and best_masks is not None  # empty allocation always passes
    return best, Allocation.from_masks(best_masks, m)


# ---------------------------------------------------------------------------
# impossibility certificates

@dataclass(frozen=True)
class ImpossibilityCertificate:
    """Exhaustively verified gap between alpha-EFX products and the optimum.

    For the additive gap family the expected values are exact closed forms
    and `verified` demands equality; for the monotone family the optimum must
    equal N and the best alpha-EFX product must not exceed sqrt(N).
    """

    spec: GeneratorSpec
    alpha: Fraction
    mnw_product: Fraction
    best_efx_product: Fraction
    ratio: Fraction
    expected_mnw_product: Fraction
    expected_best_bound: Fraction
    best_must_equal_bound: bool
    verified: bool
    mnw_allocation: Allocation = field(compare=False)
    best_allocation: Allocation = field(compare=False)

    def to_json_dict(self) -> dict:
        return {
            "family": self.spec.family,
            "params": self.spec.to_dict(),
            "alpha": format_ratio(self.alpha),
            "mnw_product": format_ratio(self.mnw_product),
            "best_efx_product": format_ratio(self.best_efx_product),
            "ratio": format_ratio(self.ratio),
            "expected_mnw_product": format_ratio(self.expected_mnw_product),
            "expected_best_bound": format_ratio(self.expected_best_bound),
            "best_must_equal_bound": self.best_must_equal_bound,
            "verified": self.verified,
            "mnw_allocation": [list(b.items()) for b in self.mnw_allocation.bundles],
            "best_efx_allocation": [list(b.items()) for b in self.best_allocation.bundles],
        }


def certify_impossibility(
    spec: GeneratorSpec, caps: Caps = DEFAULT_CAPS
) -> ImpossibilityCertificate:
    """Build a gap-family instance and certify its fairness/efficiency gap.

    Only the finite parameterizations named by the spec are certified; this
    is exhaustive search over one concrete instance, not a symbolic proof.
    """
    if spec.family == "theorem4":
        alpha = Fraction(str(spec.param("alpha")))
        eps = Fraction(str(spec.param("eps")))
        n = int(spec.param("n"))
        instance = generate(spec)
        mnw = exact_mnw(instance, caps)
        best, best_alloc = best_alpha_efx_product(instance, alpha, caps)
        expected_mnw = (1 + 1 / alpha + eps) ** (n - 1)
        expected_best = (1 / alpha + eps) ** (n - 1)
        verified = mnw.product == expected_mnw and best == expected_best
        return ImpossibilityCertificate(
            spec=spec,
            alpha=alpha,
            mnw_product=mnw.product,
            best_efx_product=best,
            ratio=best / mnw.product,
            expected_mnw_product=expected_mnw,
            expected_best_bound=expected_best,
            best_must_equal_bound=True,
            verified=verified,
            mnw_allocation=mnw.allocation,
            best_allocation=best_alloc,
        )
    if spec.family == "theorem5":
        big_n = int(spec.param("N"))
        instance = generate(spec)  # validates that N is a perfect square
        root = math.isqrt(big_n)
        alpha = Fraction(2, root)
        mnw = exact_mnw(instance, caps)
        best, best_alloc = best_alpha_efx_product(instance, alpha, caps)
        expected_mnw = Fraction(big_n)
        bound = Fraction(root)
        verified = mnw.product == expected_mnw and best <= bound
        return ImpossibilityCertificate(
            spec=spec,
            alpha=alpha,
            mnw_product=mnw.product,
            best_efx_product=best,
            ratio=best / mnw.product,
            expected_mnw_product=expected_mnw,
            expected_best_bound=bound,
            best_must_equal_bound=False,
            verified=verified,
            mnw_allocation=mnw.allocation,
            best_allocation=best_alloc,
        )
    raise ValueError(
        f"impossibility certificates exist for the gap families only, got {spec.family!r}"
    )
