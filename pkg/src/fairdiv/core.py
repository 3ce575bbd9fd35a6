"""Core types for fair-division instances with exact rational arithmetic.

All values are `fractions.Fraction`; nothing in this package ever rounds.
Bundles are bitmasks over item indices, valuations are either additive
(per-item values) or explicit (a full table over all 2^m bundles), and an
allocation is a tuple of pairwise disjoint bundles, one per agent.
"""

from __future__ import annotations

import os
from dataclasses import InitVar, dataclass, field
from fractions import Fraction
from typing import Iterator


class MalformedInstanceError(ValueError):
    """Instance data is structurally invalid (bad shapes, missing table entries)."""


class CapacityError(RuntimeError):
    """An exhaustive search would exceed the configured enumeration cap."""


class IterationBoundError(RuntimeError):
    """An algorithm ran past its proven iteration bound; this is an internal bug."""


# ---------------------------------------------------------------------------
# rationals

def parse_ratio(value: int | str | Fraction) -> Fraction:
    """Parse an exact rational from an int, a Fraction, or a "p/q" / "p" string."""
    if isinstance(value, bool):
        raise MalformedInstanceError(f"not a rational value: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        # floats in JSON are read as their decimal literal, not their binary value
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise MalformedInstanceError(f"not a rational value: {value!r}") from exc
    raise MalformedInstanceError(f"not a rational value: {value!r}")


def format_ratio(value: Fraction) -> str:
    """Canonical string for a rational: "p" when integral, else "p/q"."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def ratio_or_int(value: Fraction) -> int | str:
    """JSON-friendly form: plain int when integral, else "p/q"."""
    if value.denominator == 1:
        return value.numerator
    return format_ratio(value)


# ---------------------------------------------------------------------------
# enumeration caps

DEFAULT_ENUMERATION_CAP = 20_000_000
DEFAULT_EXPLICIT_M_CAP = 16
DEFAULT_GROUP_SHARE_AGENT_CAP = 6


@dataclass(frozen=True)
class Caps:
    """Configurable limits on exhaustive searches.

    enumeration caps the state count of brute-force loops (n^m, (n+1)^m,
    k^|pool|), explicit_m caps the item count of explicit table valuations,
    and group_share_agents caps n for the subset loop of the group-share
    checker unless explicitly overridden by the caller.
    """

    enumeration: int = DEFAULT_ENUMERATION_CAP
    explicit_m: int = DEFAULT_EXPLICIT_M_CAP
    group_share_agents: int = DEFAULT_GROUP_SHARE_AGENT_CAP


DEFAULT_CAPS = Caps()

CAP_ENV_VAR = "FAIRDIV_CAP"


def caps_from_env() -> Caps:
    """DEFAULT_CAPS, with the enumeration cap overridden by $FAIRDIV_CAP if set."""
    raw = os.environ.get(CAP_ENV_VAR)
    if raw is None:
        return DEFAULT_CAPS
    try:
        cap = int(raw)
    except ValueError as exc:
        raise MalformedInstanceError(f"{CAP_ENV_VAR} must be an integer, got {raw!r}") from exc
    if cap <= 0:
        raise MalformedInstanceError(f"{CAP_ENV_VAR} must be positive, got {cap}")
    return Caps(enumeration=cap)


# ---------------------------------------------------------------------------
# bundles

def mask_of(items) -> int:
    mask = 0
    for g in items:
        if g < 0:
            raise ValueError(f"negative item index: {g}")
        mask |= 1 << g
    return mask


def iter_mask(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True, order=True)
class Bundle:
    """An immutable set of item indices with bitmask semantics."""

    mask: int = 0

    def __post_init__(self) -> None:
        if self.mask < 0:
            raise ValueError(f"negative bundle mask: {self.mask}")

    @classmethod
    def of(cls, *items: int) -> "Bundle":
        return cls(mask_of(items))

    @classmethod
    def from_items(cls, items) -> "Bundle":
        return cls(mask_of(items))

    def items(self) -> tuple[int, ...]:
        return tuple(iter_mask(self.mask))

    def __iter__(self) -> Iterator[int]:
        return iter_mask(self.mask)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def __contains__(self, g: int) -> bool:
        return g >= 0 and (self.mask >> g) & 1 == 1

    def add(self, g: int) -> "Bundle":
        if g < 0:
            raise ValueError(f"negative item index: {g}")
        return Bundle(self.mask | (1 << g))

    def remove(self, g: int) -> "Bundle":
        """Bundle minus one item; removing an absent item is a no-op."""
        if g < 0:
            raise ValueError(f"negative item index: {g}")
        return Bundle(self.mask & ~(1 << g))

    def union(self, other: "Bundle") -> "Bundle":
        return Bundle(self.mask | other.mask)

    def difference(self, other: "Bundle") -> "Bundle":
        return Bundle(self.mask & ~other.mask)

    def intersection(self, other: "Bundle") -> "Bundle":
        return Bundle(self.mask & other.mask)

    def isdisjoint(self, other: "Bundle") -> bool:
        return self.mask & other.mask == 0

    def issubset(self, other: "Bundle") -> bool:
        return self.mask & ~other.mask == 0

    def __or__(self, other: "Bundle") -> "Bundle":
        return self.union(other)

    def __sub__(self, other: "Bundle") -> "Bundle":
        return self.difference(other)

    def __repr__(self) -> str:
        return f"Bundle{self.items()!r}"


EMPTY_BUNDLE = Bundle(0)


def full_mask(m: int) -> int:
    return (1 << m) - 1


# ---------------------------------------------------------------------------
# valuations

def _check_nonnegative(value: Fraction, where: str) -> Fraction:
    if value < 0:
        raise MalformedInstanceError(f"negative value {value} {where}")
    return value


@dataclass(frozen=True)
class AdditiveValuation:
    """v(S) = sum of nonnegative per-item values over S."""

    item_values: tuple[Fraction, ...]

    kind = "additive"

    def __post_init__(self) -> None:
        vals = tuple(parse_ratio(v) for v in self.item_values)
        for g, v in enumerate(vals):
            _check_nonnegative(v, f"for item {g}")
        object.__setattr__(self, "item_values", vals)

    @property
    def m(self) -> int:
        return len(self.item_values)

    def value_mask(self, mask: int) -> Fraction:
        total = Fraction(0)
        for g in iter_mask(mask):
            if g >= len(self.item_values):
                raise ValueError(f"item {g} out of range for m={len(self.item_values)}")
            total += self.item_values[g]
        return total

    def value(self, bundle: Bundle) -> Fraction:
        return self.value_mask(bundle.mask)


@dataclass(frozen=True)
class ExplicitValuation:
    """v given by a table over bundle masks; every queried mask must be present."""

    m: int
    table: dict[int, Fraction] = field(hash=False)
    m_cap: InitVar[int] = DEFAULT_EXPLICIT_M_CAP

    kind = "explicit"

    def __post_init__(self, m_cap: int) -> None:
        if self.m < 0:
            raise MalformedInstanceError(f"negative m: {self.m}")
        if self.m > m_cap:
            raise CapacityError(
                f"explicit valuation with m={self.m} exceeds the table cap "
                f"{m_cap} (2^m entries required)"
            )
        top = full_mask(self.m)
        clean: dict[int, Fraction] = {}
        for mask, raw in self.table.items():
            if not isinstance(mask, int) or mask < 0 or mask > top:
                raise MalformedInstanceError(f"table mask {mask!r} out of range for m={self.m}")
            clean[mask] = _check_nonnegative(parse_ratio(raw), f"at mask {mask}")
        object.__setattr__(self, "table", clean)

    def value_mask(self, mask: int) -> Fraction:
        try:
            return self.table[mask]
        except KeyError:
            raise MalformedInstanceError(
                f"explicit valuation is missing a table entry for mask {mask}"
            ) from None

    def value(self, bundle: Bundle) -> Fraction:
        return self.value_mask(bundle.mask)


Valuation = AdditiveValuation | ExplicitValuation

VALUATION_CLASSES = ("additive", "subadditive", "monotone")


# ---------------------------------------------------------------------------
# instances

@dataclass(frozen=True)
class Instance:
    """n agents, m items, one valuation per agent, and a declared value class."""

    n: int
    m: int
    valuations: tuple[Valuation, ...]
    declared_class: str = "additive"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise MalformedInstanceError(f"need at least one agent, got n={self.n}")
        if self.m < 0:
            raise MalformedInstanceError(f"negative item count m={self.m}")
        object.__setattr__(self, "valuations", tuple(self.valuations))
        if len(self.valuations) != self.n:
            raise MalformedInstanceError(
                f"expected {self.n} valuations, got {len(self.valuations)}"
            )
        if self.declared_class not in VALUATION_CLASSES:
            raise MalformedInstanceError(
                f"declared_class must be one of {VALUATION_CLASSES}, got {self.declared_class!r}"
            )
        for i, val in enumerate(self.valuations):
            if isinstance(val, AdditiveValuation):
                if val.m != self.m:
                    raise MalformedInstanceError(
                        f"agent {i}: additive valuation has {val.m} items, expected {self.m}"
                    )
            elif isinstance(val, ExplicitValuation):
                if val.m != self.m:
                    raise MalformedInstanceError(
                        f"agent {i}: explicit valuation has m={val.m}, expected {self.m}"
                    )
                if self.declared_class == "additive":
                    raise MalformedInstanceError(
                        f"agent {i}: declared_class additive requires additive valuations"
                    )
            else:
                raise MalformedInstanceError(f"agent {i}: unknown valuation type {type(val)!r}")

    @property
    def is_additive(self) -> bool:
        return all(isinstance(v, AdditiveValuation) for v in self.valuations)

    def value_mask(self, agent: int, mask: int) -> Fraction:
        if not 0 <= agent < self.n:
            raise ValueError(f"agent {agent} out of range for n={self.n}")
        if mask < 0 or mask > full_mask(self.m):
            raise ValueError(f"bundle mask {mask} out of range for m={self.m}")
        return self.valuations[agent].value_mask(mask)

    def value(self, agent: int, bundle: Bundle) -> Fraction:
        return self.value_mask(agent, bundle.mask)


# ---------------------------------------------------------------------------
# allocations

@dataclass(frozen=True)
class Allocation:
    """One bundle per agent, pairwise disjoint; may leave items unallocated."""

    bundles: tuple[Bundle, ...]
    m: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "bundles",
            tuple(b if isinstance(b, Bundle) else Bundle.from_items(b) for b in self.bundles),
        )
        top = full_mask(self.m)
        seen = 0
        for i, b in enumerate(self.bundles):
            if b.mask & ~top:
                raise ValueError(f"bundle {i} has items out of range for m={self.m}")
            if b.mask & seen:
                raise ValueError(f"bundle {i} overlaps an earlier bundle")
            seen |= b.mask
        object.__setattr__(self, "_union_mask", seen)

    @classmethod
    def from_masks(cls, masks, m: int) -> "Allocation":
        return cls(tuple(Bundle(mask) for mask in masks), m)

    @property
    def n(self) -> int:
        return len(self.bundles)

    @property
    def union_mask(self) -> int:
        return self._union_mask  # type: ignore[attr-defined]

    @property
    def complete(self) -> bool:
        return self.union_mask == full_mask(self.m)

    def unallocated(self) -> Bundle:
        return Bundle(full_mask(self.m) & ~self.union_mask)

    def masks(self) -> tuple[int, ...]:
        return tuple(b.mask for b in self.bundles)

    def replace(self, agent: int, bundle: Bundle) -> "Allocation":
        bundles = list(self.bundles)
        bundles[agent] = bundle
        return Allocation(tuple(bundles), self.m)


def nash_product(instance: Instance, allocation: Allocation) -> Fraction:
    """Product of every agent's value for their own bundle (the n-th power of
    the geometric-mean welfare; this package always compares products)."""
    if allocation.n != instance.n:
        raise ValueError(f"allocation has {allocation.n} bundles, instance has n={instance.n}")
    prod = Fraction(1)
    for i, b in enumerate(allocation.bundles):
        prod *= instance.value(i, b)
    return prod


def positive_profile(instance: Instance, masks) -> tuple[int, Fraction]:
    """(count of agents with positive value, product of those positive values)."""
    count = 0
    prod = Fraction(1)
    for i, mask in enumerate(masks):
        v = instance.value_mask(i, mask)
        if v > 0:
            count += 1
            prod *= v
    return count, prod


# ---------------------------------------------------------------------------
# class checking

@dataclass(frozen=True)
class ClassReport:
    """Outcome of check_class: verdict is "pass", "malformed", or a violation
    kind ("monotonicity" / "subadditivity") with a witness that replays it."""

    verdict: str
    detail: str = ""
    agent: int | None = None
    s: Bundle | None = None
    t: Bundle | None = None
    g: int | None = None

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"

    def to_json_dict(self) -> dict:
        out: dict = {"verdict": self.verdict}
        if self.detail:
            out["detail"] = self.detail
        if self.agent is not None:
            out["agent"] = self.agent
        if self.s is not None:
            out["s"] = list(self.s.items())
        if self.t is not None:
            out["t"] = list(self.t.items())
        if self.g is not None:
            out["item"] = self.g
        return out


def _check_explicit_structure(agent: int, val: ExplicitValuation) -> ClassReport | None:
    expected = 1 << val.m
    if len(val.table) < expected:
        missing = next(mask for mask in range(expected) if mask not in val.table)
        return ClassReport(
            "malformed",
            f"agent {agent}: table is missing {expected - len(val.table)} entries "
            f"(first missing mask {missing})",
            agent=agent,
            s=Bundle(missing),
        )
    empty = val.table.get(0)
    if empty != 0:
        return ClassReport(
            "malformed",
            f"agent {agent}: v(empty set) = {empty}, must be 0",
            agent=agent,
            s=EMPTY_BUNDLE,
        )
    return None


def _check_monotone(agent: int, val: ExplicitValuation, m: int) -> ClassReport | None:
    for mask in range(1 << m):
        base = val.table[mask]
        for g in range(m):
            if (mask >> g) & 1:
                continue
            grown = val.table[mask | (1 << g)]
            if grown < base:
                return ClassReport(
                    "monotonicity",
                    f"agent {agent}: v(S + item {g}) = {grown} < {base} = v(S)",
                    agent=agent,
                    s=Bundle(mask),
                    g=g,
                )
    return None


def _check_subadditive(agent: int, val: ExplicitValuation, m: int) -> ClassReport | None:
    # Under monotonicity it suffices to check disjoint pairs: each item is in
    # S, in T, or in neither, so the pair space has 3^m states.
    def walk(g: int, s_mask: int, t_mask: int) -> ClassReport | None:
        if g == m:
            if s_mask == 0 or t_mask == 0:
                return None
            vs = val.table[s_mask]
            vt = val.table[t_mask]
            vu = val.table[s_mask | t_mask]
            if vu > vs + vt:
                return ClassReport(
                    "subadditivity",
                    f"agent {agent}: v(S u T) = {vu} > {vs} + {vt} = v(S) + v(T)",
                    agent=agent,
                    s=Bundle(s_mask),
                    t=Bundle(t_mask),
                )
            return None
        bit = 1 << g
        return (
            walk(g + 1, s_mask, t_mask)
            or walk(g + 1, s_mask | bit, t_mask)
            or walk(g + 1, s_mask, t_mask | bit)
        )

    return walk(0, 0, 0)


def check_class(instance: Instance) -> ClassReport:
    """Verify that every valuation satisfies the instance's declared class.

    Additive valuations pass structurally (nonnegative item values imply
    monotonicity and subadditivity). Explicit tables are swept exhaustively:
    completeness and v(empty) = 0 first, then monotonicity for all (S, g),
    then, when the declared class is subadditive, v(S u T) <= v(S) + v(T)
    over all disjoint pairs. The first violation found is returned.
    """
    for agent, val in enumerate(instance.valuations):
        if isinstance(val, AdditiveValuation):
            continue
        report = _check_explicit_structure(agent, val)
        if report is not None:
            return report
        report = _check_monotone(agent, val, instance.m)
        if report is not None:
            return report
        if instance.declared_class == "subadditive":
            report = _check_subadditive(agent, val, instance.m)
            if report is not None:
                return report
    return ClassReport("pass", f"declared class {instance.declared_class} verified")
