"""Allocation optimizers.

Every strategy maximizes the same objective: the position-discounted sum
of a per-object score vector over feasible block orders. The platform
objective lam * E[U] + (1 - lam) * E[V] reduces to that form because both
sides are linear in per-object scores.

Tie-break contract, shared by all strategies: among objective maximizers,
(1) prefer the larger expected agent value, (2) then the lexicographically
smallest block order. Candidates count as tied when their objectives agree
within TIE_TOL on a max(1, |scale|) normalization; results carry a
tie_broken flag whenever that rule fired.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    Allocation,
    DiscountCurve,
    Instance,
    Partition,
    ValidationError,
    allocation_value,
    build_allocation,
)
from .inference import PosteriorModel, expected_scores, prior_posterior

__all__ = [
    "TIE_TOL",
    "DP_SUBSET_LIMIT",
    "BRUTE_FORCE_LIMIT",
    "STRATEGIES",
    "SolverContractError",
    "SolveRequest",
    "SolveResult",
    "combined_scores",
    "solve_singletons",
    "solve_subset_dp",
    "solve_geometric_index",
    "solve_local_search",
    "brute_force_oracle",
    "solve",
    "solve_grid",
]

# Absolute tolerance for tie detection on max(1, |value|)-normalized objectives.
TIE_TOL = 1e-12

DP_SUBSET_LIMIT = 20
BRUTE_FORCE_LIMIT = 8

STRATEGIES = ("auto", "sort", "subset_dp", "geometric_index", "local_search", "brute_force")

# Cap on rows * subsets held in memory at once when solving a lambda grid.
_DP_CELL_BUDGET = 1 << 24


class SolverContractError(RuntimeError):
    """A strategy was asked to run outside its stated preconditions."""


@dataclass(frozen=True)
class SolveRequest:
    instance: Instance
    lam: float
    posterior: PosteriorModel | None = None
    strategy: str = "auto"

    def __post_init__(self):
        lam = float(self.lam)
        object.__setattr__(self, "lam", lam)
        problems = []
        if not np.isfinite(lam) or not 0.0 <= lam <= 1.0:
            problems.append(f"lambda: must lie in [0, 1], got {lam!r}")
        if self.strategy not in STRATEGIES:
            problems.append(f"strategy: unknown strategy {self.strategy!r}")
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True)
class SolveResult:
    allocation: Allocation
    objective: float
    agent_value: float
    advocate_value: float
    lam: float
    strategy_used: str
    tie_broken: bool


def combined_scores(lam: float, agent_scores, advocate_scores) -> np.ndarray:
    """Collapse the two-sided objective into one per-object score vector."""
    u = np.asarray(agent_scores, dtype=float)
    v = np.asarray(advocate_scores, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValidationError("scores: agent and advocate vectors must share one length")
    if not 0.0 <= float(lam) <= 1.0:
        raise ValidationError(f"lambda: must lie in [0, 1], got {lam!r}")
    return float(lam) * u + (1.0 - float(lam)) * v


def _checked_scores(scores, size: int, label: str = "scores") -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or s.size != size:
        raise ValidationError(f"{label}: expected a vector of length {size}")
    if not np.isfinite(s).all():
        raise ValidationError(f"{label}: entries must be finite")
    return s


def _agent_or_zero(agent_scores, size: int) -> np.ndarray:
    if agent_scores is None:
        return np.zeros(size)
    return _checked_scores(agent_scores, size, "agent_scores")


def _tiered_order(primary, secondary) -> tuple[list[int], bool]:
    """Order candidates by primary desc, resolving ties per the contract.

    Candidates whose primary values chain within tolerance of the first
    member of their group count as tied; inside a group the order is
    secondary desc, and secondary-level ties fall back to ascending index.
    """
    idx = sorted(range(len(primary)), key=lambda i: (-primary[i], -secondary[i], i))
    order: list[int] = []
    tie = False
    k = 0
    while k < len(idx):
        anchor = primary[idx[k]]
        tol = TIE_TOL * max(1.0, abs(anchor))
        j = k
        while j < len(idx) and abs(primary[idx[j]] - anchor) <= tol:
            j += 1
        group = sorted(idx[k:j], key=lambda i: (-secondary[i], i))
        if j - k > 1:
            tie = True
            g = 0
            while g < len(group):
                s_anchor = secondary[group[g]]
                s_tol = TIE_TOL * max(1.0, abs(s_anchor))
                h = g
                while h < len(group) and abs(secondary[group[h]] - s_anchor) <= s_tol:
                    h += 1
                group[g:h] = sorted(group[g:h])
                g = h
        order.extend(group)
        k = j
    return order, tie


def _order_singleton_blocks(
    partition: Partition, scores, agent, weights
) -> tuple[tuple[int, ...], bool]:
    primary = [float(scores[b[0]]) for b in partition.blocks]
    secondary = [float(agent[b[0]]) for b in partition.blocks]
    order, tie = _tiered_order(primary, secondary)
    # Equal-weight stretches of the discount leave both the objective and
    # the agent value blind to the arrangement inside them, so the
    # lexicographic step of the contract owns those positions outright.
    p = 0
    while p < len(order):
        q = p
        while q < len(order) and weights[q] == weights[p]:
            q += 1
        if q - p > 1:
            tie = True
            order[p:q] = sorted(order[p:q])
        p = q
    return tuple(order), tie


def _order_geometric(partition: Partition, scores, agent, beta: float) -> tuple[tuple[int, ...], bool]:
    # Exchange argument: under geometric weights, placing block B before C
    # is weakly better iff r(B) >= r(C), so a sort on r is globally optimal.
    primary = []
    secondary = []
    for block in partition.blocks:
        powers = beta ** np.arange(len(block))
        denom = 1.0 - beta ** len(block)
        objs = list(block)
        primary.append(float(np.dot(powers, scores[objs])) / denom)
        secondary.append(float(np.dot(powers, agent[objs])) / denom)
    order, tie = _tiered_order(primary, secondary)
    return tuple(order), tie


def _block_contribs(partition: Partition, scores, weights: np.ndarray) -> np.ndarray:
    """contrib[b, off] = value of block b when its run starts at position off.

    Shape (K, M+1); the column at off = M - len(block) is the last valid
    start, later columns stay zero and are never indexed.
    """
    m = partition.size
    contrib = np.zeros((partition.block_count, m + 1))
    for b, block in enumerate(partition.blocks):
        vals = scores[list(block)]
        contrib[b, : m - len(block) + 1] = np.correlate(weights, vals, mode="valid")
    return contrib


def _subset_offsets(lengths) -> np.ndarray:
    n = 1 << len(lengths)
    subs = np.arange(n)
    off = np.zeros(n, dtype=np.intp)
    for i, ln in enumerate(lengths):
        off += ((subs >> i) & 1).astype(np.intp) * ln
    return off


def _popcount_levels(k: int) -> list[np.ndarray]:
    subs = np.arange(1 << k)
    pc = np.zeros(subs.size, dtype=np.int64)
    for i in range(k):
        pc += (subs >> i) & 1
    return [subs[pc == level] for level in range(k + 1)]


def _dp_value_to_go(contrib: np.ndarray, offsets: np.ndarray, levels) -> np.ndarray:
    """go[r, S] = best achievable value of the blocks outside S, given that
    the blocks in S already fill the first offsets[S] positions.

    The offset of the next block depends only on the set S (sum of placed
    lengths), never on their order, which is what makes the subset DP
    exact. contrib has one row of block tables per objective row r.
    """
    rows, k, _ = contrib.shape
    n = 1 << k
    go = np.full((rows, n), -np.inf)
    go[:, n - 1] = 0.0
    for level in range(k - 1, -1, -1):
        for i in range(k):
            bit = 1 << i
            sel = levels[level]
            sel = sel[(sel & bit) == 0]
            if sel.size == 0:
                continue
            cand = contrib[:, i, offsets[sel]] + go[:, sel | bit]
            cur = go[:, sel]
            go[:, sel] = np.where(cand > cur, cand, cur)
    return go


def _dp_agent_to_go(contrib_obj, contrib_agent, go, offsets, levels, tol) -> np.ndarray:
    """Best agent value over continuations that stay objective-tied.

    Only continuations within tol of the optimal value-to-go at every step
    participate; everything else is excluded with -inf.
    """
    k = contrib_obj.shape[0]
    n = 1 << k
    gu = np.full(n, -np.inf)
    gu[n - 1] = 0.0
    for level in range(k - 1, -1, -1):
        for i in range(k):
            bit = 1 << i
            sel = levels[level]
            sel = sel[(sel & bit) == 0]
            if sel.size == 0:
                continue
            obj = contrib_obj[i, offsets[sel]] + go[sel | bit]
            ok = np.abs(obj - go[sel]) <= tol
            cand = np.where(ok, contrib_agent[i, offsets[sel]] + gu[sel | bit], -np.inf)
            gu[sel] = np.maximum(gu[sel], cand)
    return gu


def _dp_walk(contrib_obj, go, offsets, k, tol, agent_pack=None):
    """Greedy reconstruction along tied-optimal branches.

    Returns None when a tie is hit and no agent table is available yet, so
    the caller can build the (lazy) agent pass and retry.
    """
    full = (1 << k) - 1
    state = 0
    order: list[int] = []
    tie = False
    while state != full:
        off = offsets[state]
        target = go[state]
        cands = [
            i
            for i in range(k)
            if not (state >> i) & 1
            and abs(contrib_obj[i, off] + go[state | (1 << i)] - target) <= tol
        ]
        if not cands:
            raise SolverContractError("internal: reconstruction lost the optimum")
        if len(cands) > 1:
            tie = True
            if agent_pack is None:
                return None
            contrib_agent, gu = agent_pack
            uvals = [contrib_agent[i, off] + gu[state | (1 << i)] for i in cands]
            best = max(uvals)
            tol_u = TIE_TOL * max(1.0, abs(best))
            cands = [i for i, uv in zip(cands, uvals) if best - uv <= tol_u]
        choice = cands[0]
        order.append(choice)
        state |= 1 << choice
    return tuple(order), tie


def _dp_orders(lengths, contrib_obj, contrib_agent):
    """Solve one subset DP per objective row; contrib_obj is (rows, K, M+1)."""
    k = len(lengths)
    offsets = _subset_offsets(lengths)
    levels = _popcount_levels(k)
    go = _dp_value_to_go(contrib_obj, offsets, levels)
    out = []
    for r in range(contrib_obj.shape[0]):
        tol = TIE_TOL * max(1.0, abs(float(go[r, 0])))
        walked = _dp_walk(contrib_obj[r], go[r], offsets, k, tol)
        if walked is None:
            gu = _dp_agent_to_go(contrib_obj[r], contrib_agent, go[r], offsets, levels, tol)
            walked = _dp_walk(contrib_obj[r], go[r], offsets, k, tol, (contrib_agent, gu))
        out.append(walked)
    return out


def _block_keys(partition: Partition, scores) -> tuple[tuple[float, ...], ...]:
    s = np.asarray(scores, dtype=float)
    return tuple(tuple(float(s[j]) for j in block) for block in partition.blocks)


def _order_local_search(partition: Partition, contrib_obj, contrib_agent, block_keys, seed_order):
    """Adjacent-transposition hill climb over block orders.

    Accepts a swap when it improves the objective beyond tolerance, or when
    it is objective-neutral (delta in [0, tol]) and improves the tie-break
    key: agent value, then descending block score sequence, then smaller
    block index first. The score-sequence tier carries the search across
    equal-weight plateaus in the discount curve; without it, singleton
    instances under flat stretches can stall below the sort optimum. The
    objective never decreases during the search.
    """
    k = partition.block_count
    lengths = partition.block_lengths()
    if seed_order is None:
        order = list(range(k))
    else:
        order = [int(i) for i in seed_order]
        if sorted(order) != list(range(k)):
            raise ValidationError("seed_order: must be a permutation of the block indices")
    cur = 0.0
    off = 0
    for b in order:
        cur += contrib_obj[b, off]
        off += lengths[b]
    tie = False
    for _ in range(8 * k + 32):
        changed = False
        off = 0
        for pos in range(k - 1):
            a, b = order[pos], order[pos + 1]
            tol = TIE_TOL * max(1.0, abs(cur))
            before = contrib_obj[a, off] + contrib_obj[b, off + lengths[a]]
            after = contrib_obj[b, off] + contrib_obj[a, off + lengths[b]]
            delta = after - before
            swap = False
            if delta > tol:
                swap = True
            elif abs(delta) <= tol:
                tie = True
                if delta >= 0.0:
                    u_before = contrib_agent[a, off] + contrib_agent[b, off + lengths[a]]
                    u_after = contrib_agent[b, off] + contrib_agent[a, off + lengths[b]]
                    du = u_after - u_before
                    tol_u = TIE_TOL * max(1.0, abs(u_before))
                    if du > tol_u:
                        swap = True
                    elif abs(du) <= tol_u:
                        if block_keys[b] > block_keys[a]:
                            swap = True
                        elif block_keys[b] == block_keys[a] and b < a:
                            swap = True
            if swap:
                order[pos], order[pos + 1] = b, a
                cur += delta
                changed = True
            off += lengths[order[pos]]
        if not changed:
            break
    return tuple(order), tie


def _order_brute(partition: Partition, scores, weights, agent):
    if partition.block_count > BRUTE_FORCE_LIMIT:
        raise SolverContractError(
            f"brute force refuses partitions with more than {BRUTE_FORCE_LIMIT} blocks"
            f" (got {partition.block_count})"
        )
    blocks = partition.blocks
    perms = list(itertools.permutations(range(partition.block_count)))
    orders = np.array(
        [[obj for b in perm for obj in blocks[b]] for perm in perms], dtype=np.intp
    )
    values = np.asarray(scores, dtype=float)[orders] @ weights
    top = float(values.max())
    tol = TIE_TOL * max(1.0, abs(top))
    tied = np.nonzero(values >= top - tol)[0]
    tie = tied.size > 1
    if tie:
        agent_vals = np.asarray(agent, dtype=float)[orders[tied]] @ weights
        best = float(agent_vals.max())
        tol_u = TIE_TOL * max(1.0, abs(best))
        tied = tied[agent_vals >= best - tol_u]
    # itertools yields permutations in lexicographic order, so the first
    # survivor is the lexicographically smallest block order.
    return perms[int(tied[0])], tie


def _singleton_partition(size: int) -> Partition:
    return Partition(tuple((i,) for i in range(size)))


def solve_singletons(scores, discount: DiscountCurve, *, agent_scores=None) -> Allocation:
    """Sort rule: descending scores against the weakly decreasing discount."""
    s = _checked_scores(scores, len(discount))
    agent = _agent_or_zero(agent_scores, s.size)
    partition = _singleton_partition(s.size)
    order, _ = _order_singleton_blocks(partition, s, agent, discount.weights)
    return build_allocation(partition, order)


def solve_subset_dp(
    partition: Partition,
    scores,
    discount: DiscountCurve,
    *,
    agent_scores=None,
    limit: int = DP_SUBSET_LIMIT,
) -> Allocation:
    """Exact optimum by dynamic programming over subsets of placed blocks."""
    if partition.block_count > limit:
        raise SolverContractError(
            f"subset DP limited to {limit} blocks (got {partition.block_count});"
            " use local_search"
        )
    s = _checked_scores(scores, partition.size)
    if len(discount) != partition.size:
        raise ValidationError("discount: horizon must match the partition size")
    agent = _agent_or_zero(agent_scores, s.size)
    contrib = _block_contribs(partition, s, discount.weights)
    contrib_agent = _block_contribs(partition, agent, discount.weights)
    [(order, _)] = _dp_orders(partition.block_lengths(), contrib[None, ...], contrib_agent)
    return build_allocation(partition, order)


def solve_geometric_index(partition: Partition, scores, beta: float, *, agent_scores=None) -> Allocation:
    """Index rule for geometric discounts: sort blocks by r(B) descending."""
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise SolverContractError(
            f"geometric index rule requires a base strictly inside (0, 1), got {beta!r}"
        )
    s = _checked_scores(scores, partition.size)
    agent = _agent_or_zero(agent_scores, s.size)
    order, _ = _order_geometric(partition, s, agent, beta)
    return build_allocation(partition, order)


def solve_local_search(
    partition: Partition,
    scores,
    discount: DiscountCurve,
    seed_order=None,
    *,
    agent_scores=None,
) -> Allocation:
    """Adjacent-swap local search; exact for singleton partitions."""
    s = _checked_scores(scores, partition.size)
    if len(discount) != partition.size:
        raise ValidationError("discount: horizon must match the partition size")
    agent = _agent_or_zero(agent_scores, s.size)
    contrib = _block_contribs(partition, s, discount.weights)
    contrib_agent = _block_contribs(partition, agent, discount.weights)
    order, _ = _order_local_search(partition, contrib, contrib_agent, _block_keys(partition, s), seed_order)
    return build_allocation(partition, order)


def brute_force_oracle(partition: Partition, scores, discount: DiscountCurve, *, agent_scores=None) -> Allocation:
    """Exhaustive enumeration of block orders; the ground-truth reference."""
    s = _checked_scores(scores, partition.size)
    if len(discount) != partition.size:
        raise ValidationError("discount: horizon must match the partition size")
    agent = _agent_or_zero(agent_scores, s.size)
    order, _ = _order_brute(partition, s, discount.weights, agent)
    return build_allocation(partition, order)


def _resolve_strategy(instance: Instance, strategy: str, dp_limit: int) -> str:
    if strategy not in STRATEGIES:
        raise ValidationError(f"strategy: unknown strategy {strategy!r}")
    partition = instance.partition
    singleton = all(len(b) == 1 for b in partition.blocks)
    if strategy == "auto":
        if singleton:
            return "sort"
        if instance.discount.kind == "geometric":
            return "geometric_index"
        if partition.block_count <= dp_limit:
            return "subset_dp"
        return "local_search"
    if strategy == "sort" and not singleton:
        raise SolverContractError(
            "sort handles singleton blocks only; use subset_dp for multi-object blocks"
        )
    if strategy == "geometric_index" and instance.discount.kind != "geometric":
        raise SolverContractError("geometric_index requires a geometric discount curve")
    if strategy == "subset_dp" and partition.block_count > dp_limit:
        raise SolverContractError(
            f"subset DP limited to {dp_limit} blocks (got {partition.block_count});"
            " use local_search"
        )
    if strategy == "brute_force" and partition.block_count > BRUTE_FORCE_LIMIT:
        raise SolverContractError(
            f"brute force refuses partitions with more than {BRUTE_FORCE_LIMIT} blocks"
            f" (got {partition.block_count})"
        )
    return strategy


def _order_for(instance, u_bar, v_bar, lam, resolved, contribs=None):
    partition = instance.partition
    if resolved == "sort":
        return _order_singleton_blocks(
            partition, combined_scores(lam, u_bar, v_bar), u_bar, instance.discount.weights
        )
    if resolved == "geometric_index":
        beta = float(instance.discount.params["beta"])
        return _order_geometric(partition, combined_scores(lam, u_bar, v_bar), u_bar, beta)
    if resolved == "brute_force":
        return _order_brute(
            partition, combined_scores(lam, u_bar, v_bar), instance.discount.weights, u_bar
        )
    if contribs is None:
        contribs = (
            _block_contribs(partition, u_bar, instance.discount.weights),
            _block_contribs(partition, v_bar, instance.discount.weights),
        )
    contrib_u, contrib_v = contribs
    contrib_obj = lam * contrib_u + (1.0 - lam) * contrib_v
    if resolved == "subset_dp":
        [walked] = _dp_orders(partition.block_lengths(), contrib_obj[None, ...], contrib_u)
        return walked
    keys = _block_keys(partition, combined_scores(lam, u_bar, v_bar))
    return _order_local_search(partition, contrib_obj, contrib_u, keys, None)


def _result_for(instance, u_bar, v_bar, lam, order, resolved, tie) -> SolveResult:
    alloc = build_allocation(instance.partition, order)
    agent_value = allocation_value(alloc, u_bar, instance.discount)
    advocate_value = allocation_value(alloc, v_bar, instance.discount)
    objective = lam * agent_value + (1.0 - lam) * advocate_value
    return SolveResult(alloc, objective, agent_value, advocate_value, lam, resolved, tie)


def solve(request: SolveRequest) -> SolveResult:
    """Dispatch to a strategy and evaluate the chosen allocation."""
    instance = request.instance
    belief = request.posterior if request.posterior is not None else prior_posterior(
        instance.type_space
    )
    u_bar = expected_scores(instance, belief, "agent")
    v_bar = expected_scores(instance, belief, "advocate")
    resolved = _resolve_strategy(instance, request.strategy, DP_SUBSET_LIMIT)
    order, tie = _order_for(instance, u_bar, v_bar, request.lam, resolved)
    return _result_for(instance, u_bar, v_bar, request.lam, order, resolved, tie)


def solve_grid(
    instance: Instance,
    lambdas,
    posterior: PosteriorModel | None = None,
    strategy: str = "auto",
    dp_limit: int = DP_SUBSET_LIMIT,
) -> tuple[SolveResult, ...]:
    """Solve one instance across many lambda values.

    The subset-DP path batches all rows through a single vectorized DP, and
    produces bit-identical results to per-lambda solve() calls.
    """
    lams = [float(l) for l in lambdas]
    for l in lams:
        if not np.isfinite(l) or not 0.0 <= l <= 1.0:
            raise ValidationError(f"lambda: must lie in [0, 1], got {l!r}")
    belief = posterior if posterior is not None else prior_posterior(instance.type_space)
    u_bar = expected_scores(instance, belief, "agent")
    v_bar = expected_scores(instance, belief, "advocate")
    resolved = _resolve_strategy(instance, strategy, dp_limit)
    partition = instance.partition
    if resolved != "subset_dp":
        contribs = None
        if resolved == "local_search":
            contribs = (
                _block_contribs(partition, u_bar, instance.discount.weights),
                _block_contribs(partition, v_bar, instance.discount.weights),
            )
        results = []
        for lam in lams:
            order, tie = _order_for(instance, u_bar, v_bar, lam, resolved, contribs)
            results.append(_result_for(instance, u_bar, v_bar, lam, order, resolved, tie))
        return tuple(results)
    contrib_u = _block_contribs(partition, u_bar, instance.discount.weights)
    contrib_v = _block_contribs(partition, v_bar, instance.discount.weights)
    lengths = partition.block_lengths()
    chunk = max(1, _DP_CELL_BUDGET >> partition.block_count)
    results = []
    for start in range(0, len(lams), chunk):
        part_lams = np.array(lams[start : start + chunk])
        contrib_obj = (
            part_lams[:, None, None] * contrib_u + (1.0 - part_lams)[:, None, None] * contrib_v
        )
        for lam, (order, tie) in zip(
            part_lams, _dp_orders(lengths, contrib_obj, contrib_u)
        ):
            results.append(
                _result_for(instance, u_bar, v_bar, float(lam), order, resolved, tie)
            )
    return tuple(results)
