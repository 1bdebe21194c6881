"""Domain types for partition-constrained attention allocation.

The object universe is an ordered catalog. A partition groups catalog
entries into ordered blocks; a feasible allocation permutes whole blocks
while keeping each block's internal order, so consecutive members of a
block occupy consecutive display positions. A discount curve assigns each
position a weight, starting at 1 at the top slot and weakly decreasing.
The value of an allocation is the position-weighted sum of per-object
scores.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .inference import SignalChannel

__all__ = [
    "PROB_TOL",
    "ValidationError",
    "Catalog",
    "Partition",
    "DiscountCurve",
    "TypeSpace",
    "UtilityTable",
    "Allocation",
    "Instance",
    "make_discount",
    "build_allocation",
    "identity_allocation",
    "allocation_value",
    "enumerate_allocations",
    "refine_partition",
    "singletonize",
    "is_refinement",
    "is_strict_refinement",
    "validate_instance",
]

# Tolerance for checking that probability vectors sum to one.
PROB_TOL = 1e-9

DISCOUNT_KINDS = ("dcg", "cutoff", "geometric", "custom")


class ValidationError(ValueError):
    """An input violates one or more structural invariants.

    The message joins every violation; `violations` keeps them separate so
    callers can report all problems at once instead of the first one hit.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = tuple(str(v) for v in violations)
        super().__init__("; ".join(self.violations))


def _freeze(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Catalog:
    """Ordered universe of object identifiers."""

    objects: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(str(o) for o in self.objects))
        problems = []
        if not self.objects:
            problems.append("catalog: must contain at least one object")
        if len(set(self.objects)) != len(self.objects):
            problems.append("catalog: object identifiers must be unique")
        if problems:
            raise ValidationError(problems)

    def __len__(self) -> int:
        return len(self.objects)

    def index_map(self) -> dict[str, int]:
        return {obj: i for i, obj in enumerate(self.objects)}


@dataclass(frozen=True)
class Partition:
    """Ordered blocks of catalog indices; the order inside a block is fixed.

    Blocks jointly cover every catalog index exactly once. Block identity is
    positional: block i is `blocks[i]`, and solver tie-breaks refer to these
    indices.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        problems = []
        if not blocks:
            problems.append("partition: need at least one block")
        if any(len(b) == 0 for b in blocks):
            problems.append("partition: blocks must be nonempty")
        flat = [i for b in blocks for i in b]
        if sorted(flat) != list(range(len(flat))):
            problems.append("partition: blocks must cover each catalog index exactly once")
        if problems:
            raise ValidationError(problems)

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def block_lengths(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)


@dataclass(frozen=True, eq=False)
class DiscountCurve:
    """Position weights delta_0..delta_{M-1}.

    Invariants: delta_0 equals 1, weights are weakly decreasing and lie in
    [0, 1]. `kind` records which family produced the curve and `params` the
    family parameters, so curves serialize losslessly.
    """

    weights: np.ndarray
    kind: str = "custom"
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        w = _freeze(self.weights)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "params", dict(self.params))
        problems = []
        if self.kind not in DISCOUNT_KINDS:
            problems.append(f"discount: unknown kind {self.kind!r}")
        if w.ndim != 1 or w.size < 1:
            problems.append("discount: weights must be a nonempty vector")
        elif not np.isfinite(w).all():
            problems.append("discount: weights must be finite")
        else:
            if w[0] != 1.0:
                problems.append("discount: leading weight must equal 1")
            if np.any(np.diff(w) > 0):
                problems.append("discount: weights must be weakly decreasing")
            if w.min() < 0.0 or w.max() > 1.0:
                problems.append("discount: weights must lie in [0, 1]")
        if problems:
            raise ValidationError(problems)

    def __len__(self) -> int:
        return int(self.weights.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscountCurve):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.params == other.params
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


def make_discount(kind: str, horizon: int, **params) -> DiscountCurve:
    """Build one of the stock discount families at a given horizon.

    dcg        1 / log2(n + 2) at 0-based position n
    cutoff     1 for the first `cutoff` positions, 0 afterwards
    geometric  beta ** n for beta strictly inside (0, 1)
    custom     an explicit `weights` table of length `horizon`
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValidationError("discount: horizon must be at least 1")
    if kind == "dcg":
        weights = 1.0 / np.log2(np.arange(horizon) + 2.0)
        params = {}
    elif kind == "cutoff":
        cut = params.get("cutoff")
        if cut is None or int(cut) < 1:
            raise ValidationError("discount: cutoff must be an integer >= 1")
        weights = (np.arange(horizon) < int(cut)).astype(float)
        params = {"cutoff": int(cut)}
    elif kind == "geometric":
        beta = params.get("beta")
        if beta is None or not (0.0 < float(beta) < 1.0):
            raise ValidationError("discount: beta must lie strictly inside (0, 1)")
        weights = float(beta) ** np.arange(horizon)
        params = {"beta": float(beta)}
    elif kind == "custom":
        table = params.get("weights")
        if table is None:
            raise ValidationError("discount: custom kind requires a weights table")
        if len(table) != horizon:
            raise ValidationError("discount: custom weights must match the horizon")
        weights = [float(x) for x in table]
        params = {"weights": tuple(float(x) for x in table)}
    else:
        raise ValidationError(f"discount: unknown kind {kind!r}")
    return DiscountCurve(weights=weights, kind=kind, params=params)


@dataclass(frozen=True, eq=False)
class TypeSpace:
    """Finite latent type space with a prior distribution."""

    types: tuple[str, ...]
    prior: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(str(t) for t in self.types))
        p = _freeze(self.prior)
        object.__setattr__(self, "prior", p)
        problems = []
        if not self.types:
            problems.append("types: must contain at least one type")
        if len(set(self.types)) != len(self.types):
            problems.append("types: type identifiers must be unique")
        if p.ndim != 1 or p.size != len(self.types):
            problems.append("prior: must assign one weight per type")
        else:
            if not np.isfinite(p).all() or p.min() < 0.0:
                problems.append("prior: entries must be finite and nonnegative")
            elif abs(float(p.sum()) - 1.0) > PROB_TOL:
                problems.append(f"prior: entries must sum to 1 within {PROB_TOL} (got {float(p.sum())!r})")
        if problems:
            raise ValidationError(problems)

    def __len__(self) -> int:
        return len(self.types)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TypeSpace):
            return NotImplemented
        return self.types == other.types and np.array_equal(self.prior, other.prior)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class UtilityTable:
    """Per-type, per-object scores for the agent and the advocate.

    Rows index types, columns index catalog objects. All entries are
    nonnegative and finite; the two matrices share one shape.
    """

    agent: np.ndarray
    advocate: np.ndarray

    def __post_init__(self):
        u = _freeze(self.agent)
        v = _freeze(self.advocate)
        object.__setattr__(self, "agent", u)
        object.__setattr__(self, "advocate", v)
        problems = []
        for name, m in (("agent_u", u), ("advocate_v", v)):
            if m.ndim != 2 or m.size == 0:
                problems.append(f"{name}: must be a nonempty type-by-object matrix")
            elif not np.isfinite(m).all() or m.min() < 0.0:
                problems.append(f"{name}: entries must be finite and nonnegative")
        if u.shape != v.shape:
            problems.append("utilities: agent_u and advocate_v must share one shape")
        if problems:
            raise ValidationError(problems)

    def __eq__(self, other) -> bool:
        if not isinstance(other, UtilityTable):
            return NotImplemented
        return np.array_equal(self.agent, other.agent) and np.array_equal(
            self.advocate, other.advocate
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Instance:
    """One complete allocation problem, validated on construction."""

    catalog: Catalog
    partition: Partition
    type_space: TypeSpace
    utilities: UtilityTable
    discount: DiscountCurve
    signal_model: "SignalChannel | None" = None

    def __post_init__(self):
        validate_instance(self)

    @property
    def size(self) -> int:
        return len(self.catalog)

    @property
    def type_count(self) -> int:
        return len(self.type_space)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.catalog == other.catalog
            and self.partition == other.partition
            and self.type_space == other.type_space
            and self.utilities == other.utilities
            and self.discount == other.discount
            and self.signal_model == other.signal_model
        )

    __hash__ = None


def validate_instance(instance: Instance) -> None:
    """Check cross-component consistency; raises with every violation listed."""
    problems = []
    m = len(instance.catalog)
    t = len(instance.type_space)
    if instance.partition.size != m:
        problems.append(
            f"partition: covers {instance.partition.size} indices but the catalog has {m} objects"
        )
    if instance.utilities.agent.shape != (t, m):
        problems.append(
            f"utilities: shape {instance.utilities.agent.shape} does not match {t} types by {m} objects"
        )
    if len(instance.discount) != m:
        problems.append(
            f"discount: horizon {len(instance.discount)} does not match catalog size {m}"
        )
    channel = instance.signal_model
    if channel is not None and channel.likelihood.shape[0] != t:
        problems.append(
            f"signal_model: likelihood has {channel.likelihood.shape[0]} rows but there are {t} types"
        )
    if problems:
        raise ValidationError(problems)


@dataclass(frozen=True)
class Allocation:
    """A block permutation realized as absolute positions.

    `block_order` lists block indices in display order, `object_order` the
    catalog indices position by position, and `positions[obj]` the 0-based
    rank of a catalog index.
    """

    block_order: tuple[int, ...]
    object_order: tuple[int, ...]
    positions: tuple[int, ...]

    def position_of(self, obj_index: int) -> int:
        return self.positions[obj_index]


def build_allocation(partition: Partition, block_order: Sequence[int]) -> Allocation:
    """Lay blocks out in the given order, preserving each block's run."""
    order = tuple(int(i) for i in block_order)
    if sorted(order) != list(range(partition.block_count)):
        raise ValidationError("allocation: block_order must be a permutation of the block indices")
    object_order = tuple(obj for b in order for obj in partition.blocks[b])
    positions = [0] * partition.size
    for rank, obj in enumerate(object_order):
        positions[obj] = rank
    return Allocation(order, object_order, tuple(positions))


def identity_allocation(partition: Partition) -> Allocation:
    return build_allocation(partition, range(partition.block_count))


def allocation_value(allocation: Allocation, scores, discount: DiscountCurve) -> float:
    """Position-weighted sum of scores under the given display order."""
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or s.size != len(discount):
        raise ValidationError("scores: length must match the discount horizon")
    if len(allocation.object_order) != s.size:
        raise ValidationError("allocation: size does not match the score vector")
    order = np.array(allocation.object_order, dtype=np.intp)
    return float(np.dot(discount.weights, s[order]))


def enumerate_allocations(partition: Partition) -> Iterator[Allocation]:
    """Yield every feasible allocation in lexicographic block-order.

    Grows factorially in the block count; intended for oracles and tests.
    """
    for perm in itertools.permutations(range(partition.block_count)):
        yield build_allocation(partition, perm)


def refine_partition(partition: Partition, split_spec: Mapping[int, Sequence[int]]) -> Partition:
    """Split blocks at the given internal offsets.

    `split_spec` maps a block index to cut offsets strictly inside that
    block. Only contiguous splits are expressible, so the result always
    refines the input; reordering or interleaving objects is impossible by
    construction. Resulting blocks keep the original left-to-right order.
    """
    problems = []
    cuts_by_block: dict[int, list[int]] = {}
    for key, offsets in split_spec.items():
        b = int(key)
        if not 0 <= b < partition.block_count:
            problems.append(f"split: block index {b} out of range")
            continue
        length = len(partition.blocks[b])
        cuts = sorted({int(x) for x in offsets})
        bad = [x for x in cuts if not 0 < x < length]
        if bad:
            problems.append(f"split: offsets {bad} fall outside block {b} of length {length}")
            continue
        cuts_by_block[b] = cuts
    if problems:
        raise ValidationError(problems)
    new_blocks = []
    for i, block in enumerate(partition.blocks):
        bounds = [0, *cuts_by_block.get(i, []), len(block)]
        for a, z in zip(bounds, bounds[1:]):
            new_blocks.append(block[a:z])
    return Partition(tuple(new_blocks))


def singletonize(partition: Partition) -> Partition:
    """Fully split every block into singletons."""
    return Partition(tuple((i,) for b in partition.blocks for i in b))


def is_refinement(old: Partition, new: Partition) -> bool:
    """True when every old block is tiled, in order, by runs of new blocks.

    This is the weak sense: a partition refines itself. The check demands
    that each new block is a contiguous slice of exactly one old block, so
    every allocation feasible under `old` stays feasible under `new`.
    """
    if old.size != new.size:
        return False
    block_of = {}
    for idx, block in enumerate(new.blocks):
        for obj in block:
            block_of[obj] = idx
    seen = set()
    for block in old.blocks:
        j = 0
        while j < len(block):
            nb_idx = block_of[block[j]]
            if nb_idx in seen:
                return False
            nb = new.blocks[nb_idx]
            if tuple(block[j : j + len(nb)]) != nb:
                return False
            seen.add(nb_idx)
            j += len(nb)
    return len(seen) == new.block_count


def is_strict_refinement(old: Partition, new: Partition) -> bool:
    return is_refinement(old, new) and new.block_count > old.block_count
