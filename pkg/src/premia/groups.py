"""No-arbitrage group structure over the transformed design.

The overlap-group penalty is what keeps selected models arbitrage-free by
construction: every intercept covariate lives in a group together with the
scaled-factor covariates that can generate it, so a quadratic instrument
term can never enter without a matching loading term (and vice versa).

Group inventory over the d covariates (1-based indices, matching the CLI
output and the printed worked examples):

  * one unpenalized time-invariant group: the constant plus every plain
    factor f_k (K+1 indices);
  * one singleton group per off-diagonal instrument product (those are
    unrestricted by no-arbitrage and free to enter alone);
  * for every (factor k, instrument l): {Z_l^2, f_k*Z_l};
  * for every (factor k, characteristic m): the whole characteristic-m
    intercept block {Zi_m, Z_1*Zi_m, ..., Z_p*Zi_m} plus f_k*Zi_m.

Overlaps are handled downstream by covariate duplication: the expanded
design has d_tilde columns, one per (group, member) slot, and the solver's
latent coefficients sum back to the original beta.
"""

from dataclasses import dataclass, field

import numpy as np

from .design import (
    ModelSpec,
    diag_vech_positions,
    x1_char_positions,
    scaled_factor_position,
    char_factor_position,
    ti_indices,
    coefficient_names,
)


@dataclass(frozen=True)
class GroupStructure:
    """Immutable grouping of the d covariates plus the duplication layout.

    groups: ordered list of 1-based index tuples; groups[0] is the
        unpenalized time-invariant group.
    duplication_map: int array of length d_tilde; slot -> 0-based original
        covariate index.
    slot_starts / slot_ends: group g occupies expanded columns
        [slot_starts[g], slot_ends[g]).
    """

    spec: ModelSpec
    groups: tuple
    duplication_map: np.ndarray
    slot_starts: np.ndarray
    slot_ends: np.ndarray

    @property
    def J(self):
        return len(self.groups)

    @property
    def d_tilde(self):
        return int(self.duplication_map.size)

    @property
    def unpenalized(self):
        return 0

    def group_members0(self, g):
        """0-based original indices of group g (design order)."""
        return self.duplication_map[self.slot_starts[g] : self.slot_ends[g]]


def expanded_size(spec):
    """Closed-form d_tilde = K(p_tilde(q+2) + q - 1) + (p_tilde-1)p_tilde/2 + 1."""
    pt = spec.p_tilde
    return spec.K * (pt * (spec.q + 2) + spec.q - 1) + (pt - 1) * pt // 2 + 1


def group_count(spec):
    """Closed-form J = 1 + p_tilde(p_tilde-1)/2 + Kp + Kq."""
    pt = spec.p_tilde
    return 1 + pt * (pt - 1) // 2 + spec.K * spec.p + spec.K * spec.q


def build_groups(spec):
    """Construct the group structure for a given design.

    NOTE on index arithmetic: two printed closed forms exist for the scaled
    factor slots, "d1 + k + (l-1)*p_tilde + 1" style (factor index innermost)
    and "d1 + (k-1)*p_tilde + l + 1" style (instrument index innermost).
    Only the second is consistent with the factor-major ordering of x2 and
    with the worked K=2 example (groups {3,7}, {3,9}); it is the active one.
    Same for characteristics: f_k*Zi_m sits at d1 + d21 + (k-1)*q + m, not
    at "d1 + d21 + k + (m-1)*q + 1".
    """
    pt = spec.p_tilde
    diag0 = diag_vech_positions(spec)  # 0-based x1 positions of Ztilde_j^2

    groups = []
    # time-invariant group, never penalized
    groups.append(tuple(int(i) + 1 for i in ti_indices(spec)))
    # off-diagonal vech entries: singletons
    diag_set = set(int(i) for i in diag0)
    for j in range(spec.d11):
        if j not in diag_set:
            groups.append((j + 1,))
    # instrument pairs: {Z_l^2, f_k * Z_l}
    for k in range(1, spec.K + 1):
        for l in range(1, spec.p + 1):
            zsq = int(diag0[l]) + 1
            sf = scaled_factor_position(spec, k, l + 1) + 1
            groups.append((zsq, int(sf)))
    # characteristic blocks: {Zi_m, Z_1*Zi_m, ..., Z_p*Zi_m, f_k*Zi_m}
    for k in range(1, spec.K + 1):
        for m in range(1, spec.q + 1):
            block = [int(i) + 1 for i in x1_char_positions(spec, m)]
            block.append(char_factor_position(spec, k, m) + 1)
            groups.append(tuple(block))

    # duplication layout: consecutive slots per group
    dup = []
    starts = []
    ends = []
    for g in groups:
        starts.append(len(dup))
        dup.extend(i - 1 for i in g)
        ends.append(len(dup))
    dup = np.array(dup, dtype=np.int64)

    structure = GroupStructure(
        spec=spec,
        groups=tuple(groups),
        duplication_map=dup,
        slot_starts=np.array(starts, dtype=np.int64),
        slot_ends=np.array(ends, dtype=np.int64),
    )

    # construction-time sanity: coverage, counts, closed forms
    covered = set(int(i) for i in dup)
    assert covered == set(range(spec.d)), "groups must cover every covariate"
    assert len(groups[0]) == spec.K + 1
    assert structure.J == group_count(spec)
    assert structure.d_tilde == expanded_size(spec)
    return structure


@dataclass(frozen=True)
class ModelCount:
    """Exact model counts as powers of two (exponents, never floats)."""

    compliant_exponent: int
    unrestricted_exponent: int
    ratio_exponent: int  # compliant/unrestricted = 2**ratio_exponent

    @property
    def compliant(self):
        return 2 ** self.compliant_exponent

    @property
    def unrestricted(self):
        return 2 ** self.unrestricted_exponent


def count_models(structure):
    """Number of selectable models under the group penalty versus an
    unrestricted covariate search (time-invariant block always kept).

    The ratio is 2**-(pq+p+q), at most 1/8 whenever min(p, q) >= 1.
    """
    spec = structure.spec
    n1 = spec.K + 1
    comp = structure.J - 1
    unres = spec.d - n1
    ratio = comp - unres
    assert ratio == -(spec.p * spec.q + spec.p + spec.q)
    if min(spec.p, spec.q) >= 1:
        assert ratio <= -3  # ratio bound 1/8
    return ModelCount(comp, unres, ratio)


@dataclass
class EnumeratedModels:
    """All models reachable by the group penalty (small J only).

    selections[i] is the tuple of chosen penalized group positions (indices
    into structure.groups); supports[i] is the corresponding support as a
    frozenset of 1-based covariate indices.  distinct_supports deduplicates
    supports (selections of overlapping groups can coincide).
    """

    selections: list
    supports: list
    distinct_supports: list


def enumerate_models(structure, max_J=20):
    """Enumerate the 2^(J-1) group unions, time-invariant group always in."""
    J = structure.J
    if J > max_J:
        raise ValueError(
            f"refusing to enumerate 2^{J - 1} models (J={J} > {max_J}); "
            "raise max_J explicitly if this is intentional"
        )
    base = frozenset(structure.groups[0])
    penalized = list(range(1, J))
    selections = []
    supports = []
    seen = {}
    distinct = []
    for mask in range(2 ** (J - 1)):
        chosen = tuple(g for b, g in enumerate(penalized) if mask >> b & 1)
        support = base.union(*(structure.groups[g] for g in chosen)) if chosen else base
        selections.append(chosen)
        supports.append(support)
        if support not in seen:
            seen[support] = True
            distinct.append(support)
    return EnumeratedModels(selections, supports, distinct)


@dataclass
class ArbitrageVerdict:
    compliant: bool
    violations: list

    def __bool__(self):
        return self.compliant


def check_no_arbitrage(support, spec, strict=False):
    """Classify an arbitrary support (1-based indices) as arbitrage-free or not.

    Compliance requires
      (a) the full time-invariant block,
      (b) per instrument l: Z_l^2 selected  <=>  some f_k*Z_l selected,
      (c) per characteristic m: any intercept term involving Zi_m selected
          <=>  some f_k*Zi_m selected.

    Off-diagonal instrument products Z_s*Z_l are exempt (they form their own
    singleton groups); strict=True additionally flags such a term when no
    scaled factor involving either instrument is present.
    """
    S = set(int(i) for i in support)
    if not S <= set(range(1, spec.d + 1)):
        raise ValueError("support contains indices outside 1..d")
    names = coefficient_names(spec)
    violations = []

    for i in ti_indices(spec):
        if int(i) + 1 not in S:
            violations.append(
                f"missing time-invariant covariate {int(i)+1} ({names[int(i)]})"
            )

    diag0 = diag_vech_positions(spec)
    for l in range(1, spec.p + 1):
        sq = int(diag0[l]) + 1
        has_sq = sq in S
        loadings = [
            scaled_factor_position(spec, k, l + 1) + 1 for k in range(1, spec.K + 1)
        ]
        has_load = any(j in S for j in loadings)
        if has_sq and not has_load:
            violations.append(
                f"instrument {l}: Z{l}^2 selected without any scaled factor f_k*Z{l}"
            )
        if has_load and not has_sq:
            violations.append(
                f"instrument {l}: scaled factor on Z{l} selected without Z{l}^2"
            )

    for m in range(1, spec.q + 1):
        block = [int(i) + 1 for i in x1_char_positions(spec, m)]
        has_x1 = any(j in S for j in block)
        loadings = [
            char_factor_position(spec, k, m) + 1 for k in range(1, spec.K + 1)
        ]
        has_load = any(j in S for j in loadings)
        if has_x1 and not has_load:
            violations.append(
                f"characteristic {m}: intercept block selected without any f_k*Zi{m}"
            )
        if has_load and not has_x1:
            violations.append(
                f"characteristic {m}: scaled factor on Zi{m} selected without its "
                "intercept block"
            )

    if strict:
        # off-diagonal products: need a loading on at least one leg
        pt = spec.p_tilde
        pos = 0
        for c in range(pt):
            for r in range(c, pt):
                if r != c and (pos + 1) in S:
                    legs_ok = False
                    for j in (r, c):
                        if j == 0:
                            legs_ok = True  # constant leg, matched by TI block
                        else:
                            for k in range(1, spec.K + 1):
                                if scaled_factor_position(spec, k, j + 1) + 1 in S:
                                    legs_ok = True
                    if not legs_ok:
                        violations.append(
                            f"cross product {names[pos]} selected with no scaled "
                            "factor on either instrument (strict mode)"
                        )
                pos += 1

    return ArbitrageVerdict(len(violations) == 0, violations)
