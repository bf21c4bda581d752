"""Integrable highest-weight modules and their tensor products.

A Module is a weight-graded vector space with sparse E_i / F_i actions over
FieldElement; K_H acts diagonally by q^(<H, wt>) and is derived from the
stored weights rather than stored itself.

V_lambda is built by the Shapovalov-radical method: span depth by depth with
F-monomials applied to a formal highest-weight vector, track the contravariant
form <F_i x, y> = <x, E_i y> exactly, and keep only candidates that enlarge
the rank of the form (the rest are expressed through the survivors). The
defining relations are then verified as matrix identities on the result; a
failure raises InternalConsistencyError rather than returning a bad module.

Tensor products use the coproduct

    E_i -> E_i (x) K_i + 1 (x) E_i,   F_i -> F_i (x) 1 + K_i^(-1) (x) F_i,

with basis ordered pairs, left factor major.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .cartan import CartanDatum
from .linalg import (
    SparseMatrix,
    Vec,
    inverse,
    kernel,
    rank,
    solve,
    v_add,
    v_clean,
    v_is_zero,
    v_scale,
)
from .qscalar import FieldElement, ONE, ZERO, q_int

WeightT = Tuple[int, ...]


class ModuleConstructionError(ValueError):
    """Bad inputs to a module constructor (non-dominant weight, mixed data)."""


class InternalConsistencyError(RuntimeError):
    """A verified-by-construction identity failed; results are untrustworthy."""


def _as_int_weight(wt: Sequence) -> WeightT:
    out = []
    for x in wt:
        f = Fraction(x)
        if f.denominator != 1:
            raise ModuleConstructionError(f"non-integral weight coordinate {x}")
        out.append(int(f))
    return tuple(out)


class Module:
    """Weight-graded module with exact sparse generator actions."""

    def __init__(self, cartan: CartanDatum, weights: Sequence[WeightT],
                 E: Dict[int, SparseMatrix], F: Dict[int, SparseMatrix],
                 provenance: str, hw_index: Optional[int] = None,
                 words: Optional[Sequence[Tuple[int, ...]]] = None,
                 factors: Optional[Tuple["Module", "Module"]] = None):
        self.cartan = cartan
        self.weights = tuple(_as_int_weight(w) for w in weights)
        self.dim = len(self.weights)
        self.E = E
        self.F = F
        self.provenance = provenance
        self.hw_index = hw_index
        self.words = tuple(words) if words is not None else None
        self.factors = factors
        self._weight_spaces: Dict[WeightT, List[int]] = {}
        for idx, w in enumerate(self.weights):
            self._weight_spaces.setdefault(w, []).append(idx)
        self._divided_cache: Dict[Tuple[str, int, int], SparseMatrix] = {}
        self._decomposition: Optional[IsotypicDecomposition] = None

    # -- structure ------------------------------------------------------------

    def weight_space(self, wt: Sequence) -> List[int]:
        return list(self._weight_spaces.get(tuple(int(x) for x in wt), []))

    def weight_multiplicities(self) -> Dict[WeightT, int]:
        return {w: len(ix) for w, ix in self._weight_spaces.items()}

    def weight_plus_alpha(self, wt: WeightT, i: int, sign: int = 1) -> WeightT:
        a = self.cartan.A
        return tuple(wt[k] + sign * a[k][i] for k in range(self.cartan.n))

    def k_diag(self, pairings: Sequence) -> SparseMatrix:
        """K_H as a diagonal matrix, H given by its pairings with the omega_i."""
        rows = {}
        for idx, wt in enumerate(self.weights):
            e = sum(Fraction(pairings[j]) * wt[j] for j in range(self.cartan.n))
            rows[idx] = {idx: FieldElement.q_power(e)}
        return SparseMatrix(self.dim, self.dim, rows)

    def k_i(self, i: int, power: int = 1) -> SparseMatrix:
        """K_i^power = K_{d_i H_i}^power, diagonal q^(power d_i <H_i, wt>)."""
        d = self.cartan.d[i]
        rows = {idx: {idx: FieldElement.q_power(power * d * wt[i])}
                for idx, wt in enumerate(self.weights)}
        return SparseMatrix(self.dim, self.dim, rows)

    def hw_vector(self) -> Vec:
        if self.hw_index is None:
            raise ModuleConstructionError("module carries no pinned highest weight")
        return {self.hw_index: ONE}

    def apply_f_word(self, word: Sequence[int], v: Vec) -> Vec:
        """F_{word[0]} F_{word[1]} ... F_{word[-1]} v."""
        out = v
        for i in reversed(word):
            out = self.F[i].apply(out)
        return out

    def divided_power(self, gen: str, i: int, n: int) -> SparseMatrix:
        """E_i^(n) or F_i^(n) = X^n / [n]_{q_i}!."""
        if n < 0:
            raise ValueError("divided power wants n >= 0")
        key = (gen, i, n)
        got = self._divided_cache.get(key)
        if got is not None:
            return got
        if n == 0:
            out = SparseMatrix.identity(self.dim)
        else:
            prev = self.divided_power(gen, i, n - 1)
            mat = {"E": self.E, "F": self.F}[gen][i]
            out = (mat @ prev).scale(q_int(n, self.cartan.d[i]).inv())
        self._divided_cache[key] = out
        return out

    # -- serialization ----------------------------------------------------------

    def to_json_obj(self) -> dict:
        def dump_actions(mats: Dict[int, SparseMatrix]) -> dict:
            return {str(i + 1): [[r, c, x.to_json_obj()] for r, c, x in mats[i].to_triplets()]
                    for i in sorted(mats)}
        return {
            "cartan": self.cartan.to_json_obj(),
            "dim": self.dim,
            "weights": [list(w) for w in self.weights],
            "E": dump_actions(self.E),
            "F": dump_actions(self.F),
        }

    def __repr__(self):
        return f"Module({self.provenance}, dim={self.dim})"


# ---------------------------------------------------------------------------
# Irreducible construction
# ---------------------------------------------------------------------------

def make_irreducible(cartan: CartanDatum, hw: Sequence[int],
                     max_depth: Optional[int] = None) -> Module:
    """Construct V_lambda with its highest-weight pin at basis index 0.

    max_depth truncates the F-spanning for exploration of non-finite data;
    truncated output carries no correctness contract and skips verification.
    """
    lam = _as_int_weight(hw)
    if len(lam) != cartan.n:
        raise ModuleConstructionError("weight length does not match rank")
    if any(x < 0 for x in lam):
        raise ModuleConstructionError(f"highest weight {lam} is not dominant")
    if not cartan.finite and max_depth is None:
        raise ModuleConstructionError("non-finite type needs an explicit max_depth")

    n = cartan.n
    # per-basis bookkeeping, indexed by construction order
    weights: List[WeightT] = [lam]
    words: List[Tuple[int, ...]] = [()]
    depth_of: List[int] = [0]
    e_cols: List[Dict[int, Vec]] = [{i: {} for i in range(n)}]  # E_i of each basis vec
    f_cols: List[Dict[int, Vec]] = [{} for _ in range(1)]       # filled as depths close
    gram: Dict[Tuple[int, int], FieldElement] = {(0, 0): ONE}

    def gram_get(a: int, b: int) -> FieldElement:
        if weights[a] != weights[b]:
            return ZERO
        return gram.get((a, b)) or gram.get((b, a)) or ZERO

    def pair_with_vec(a: int, v: Vec) -> FieldElement:
        out = ZERO
        for b, c in v.items():
            g = gram_get(a, b)
            if not g.is_zero():
                out = out + g * c
        return out

    frontier = [0]
    depth = 0
    while frontier:
        depth += 1
        if max_depth is not None and depth > max_depth:
            break
        # candidates: (i, parent) in deterministic order -> F_i(parent)
        by_weight: Dict[WeightT, List[Tuple[int, int]]] = {}
        for parent in frontier:
            for i in range(n):
                wt = tuple(weights[parent][k] - cartan.A[k][i] for k in range(n))
                by_weight.setdefault(wt, []).append((i, parent))
        new_frontier: List[int] = []
        pending_f: Dict[Tuple[int, int], Vec] = {}
        for wt in sorted(by_weight):
            cands = by_weight[wt]
            # E_j of each candidate F_i(parent): F_i(E_j parent) + delta_ij [..] parent
            cand_e: List[Dict[int, Vec]] = []
            for i, parent in cands:
                e_of_c: Dict[int, Vec] = {}
                for j in range(n):
                    ej_par = e_cols[parent][j]
                    moved: Vec = {}
                    for b, c in ej_par.items():
                        fb = f_cols[b].get(i)
                        if fb:
                            moved = v_add(moved, v_scale(fb, c))
                    if i == j:
                        coef = q_int(weights[parent][i], cartan.d[i])
                        if not coef.is_zero():
                            moved = v_add(moved, {parent: coef})
                    e_of_c[j] = v_clean(moved)
                cand_e.append(e_of_c)
            # Gram of candidates via <F_i p, c> = <p, E_i c>
            m = len(cands)
            g = [[ZERO] * m for _ in range(m)]
            for a in range(m):
                ia, pa = cands[a]
                for b in range(a, m):
                    val = pair_with_vec(pa, cand_e[b][ia])
                    g[a][b] = val
                    g[b][a] = val
            # greedy rank selection in candidate order
            selected: List[int] = []
            for c_idx in range(m):
                trial = selected + [c_idx]
                mat = SparseMatrix(len(trial), len(trial),
                                   {r: {s: g[trial[r]][trial[s]]
                                        for s in range(len(trial))
                                        if not g[trial[r]][trial[s]].is_zero()}
                                    for r in range(len(trial))})
                if rank(mat) == len(trial):
                    selected.append(c_idx)
            # register survivors as new basis vectors
            new_ids: Dict[int, int] = {}
            for c_idx in selected:
                i, parent = cands[c_idx]
                bid = len(weights)
                new_ids[c_idx] = bid
                weights.append(wt)
                words.append((i,) + words[parent])
                depth_of.append(depth)
                e_cols.append(cand_e[c_idx])
                f_cols.append({})
                gram[(bid, bid)] = g[c_idx][c_idx]
                for other_idx, other_bid in new_ids.items():
                    if other_bid != bid:
                        gram[(other_bid, bid)] = g[other_idx][c_idx]
                pending_f[cands[c_idx]] = {bid: ONE}
                new_frontier.append(bid)
            # non-survivors: solve G_S x = pairings to express through survivors
            if selected:
                gs = SparseMatrix(len(selected), len(selected),
                                  {r: {s: g[selected[r]][selected[s]]
                                       for s in range(len(selected))
                                       if not g[selected[r]][selected[s]].is_zero()}
                                   for r in range(len(selected))})
            for c_idx in range(m):
                if c_idx in selected:
                    continue
                if not selected:
                    pending_f[cands[c_idx]] = {}
                    continue
                rhs = {r: g[selected[r]][c_idx] for r in range(len(selected))
                       if not g[selected[r]][c_idx].is_zero()}
                x = solve(gs, rhs)
                if x is None:
                    raise InternalConsistencyError("contravariant form solve failed")
                pending_f[cands[c_idx]] = v_clean(
                    {new_ids[selected[r]]: c for r, c in x.items()})
        # freeze F on the previous depth
        for (i, parent), img in pending_f.items():
            f_cols[parent][i] = img
        for parent in frontier:
            for i in range(n):
                f_cols[parent].setdefault(i, {})
        frontier = new_frontier

    dim = len(weights)
    for bid in range(dim):
        for i in range(n):
            f_cols[bid].setdefault(i, {})  # deepest vectors map to zero

    E = {i: SparseMatrix.from_columns([e_cols[b][i] for b in range(dim)], dim)
         for i in range(n)}
    F = {i: SparseMatrix.from_columns([f_cols[b][i] for b in range(dim)], dim)
         for i in range(n)}
    mod = Module(cartan, weights, E, F, provenance="irreducible-with-hw-pin",
                 hw_index=0, words=words)
    if max_depth is None:
        verify_module(mod)
    return mod


# ---------------------------------------------------------------------------
# Relation checking
# ---------------------------------------------------------------------------

def verify_module(m: Module) -> None:
    """Exact matrix checks of the defining relations; raises on any failure."""
    cd = m.cartan
    n = cd.n
    for i in range(n):
        _check_weight_grading(m, m.E[i], i, +1)
        _check_weight_grading(m, m.F[i], i, -1)
    # [E_i, F_j] = delta_ij (K_i - K_i^-1)/(q_i - q_i^-1)
    for i in range(n):
        for j in range(n):
            lhs = (m.E[i] @ m.F[j]).sub(m.F[j] @ m.E[i])
            if i == j:
                qi = FieldElement.q_power(cd.d[i])
                denom = (qi - qi.inv()).inv()
                rhs = m.k_i(i).sub(m.k_i(i, -1)).scale(denom)
            else:
                rhs = SparseMatrix.zeros(m.dim, m.dim)
            if lhs != rhs:
                raise InternalConsistencyError(f"[E_{i}, F_{j}] relation failed")
    # K_H E_i K_H^-1 = q^(<H, alpha_i>) E_i for H = H_j
    for j in range(n):
        h = [1 if k == j else 0 for k in range(n)]
        kh = m.k_diag(h)
        kh_inv = m.k_diag([-x for x in h])
        for i in range(n):
            want_e = m.E[i].scale(FieldElement.q_power(cd.A[j][i]))
            want_f = m.F[i].scale(FieldElement.q_power(-cd.A[j][i]))
            if (kh @ m.E[i]) @ kh_inv != want_e or (kh @ m.F[i]) @ kh_inv != want_f:
                raise InternalConsistencyError("K_H conjugation relation failed")
    # quantum Serre relations
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            top = 1 - cd.A[i][j]
            for gen in ("E", "F"):
                acc = SparseMatrix.zeros(m.dim, m.dim)
                mid = {"E": m.E, "F": m.F}[gen][j]
                for k in range(top + 1):
                    term = (m.divided_power(gen, i, k) @ mid) @ \
                        m.divided_power(gen, i, top - k)
                    acc = acc.add(term) if k % 2 == 0 else acc.sub(term)
                if not acc.is_zero():
                    raise InternalConsistencyError(
                        f"quantum Serre relation failed for {gen}, ({i},{j})")
    # local nilpotency
    for i in range(n):
        for mat in (m.E[i], m.F[i]):
            for b in range(m.dim):
                v: Vec = {b: ONE}
                for _ in range(m.dim + 1):
                    if v_is_zero(v):
                        break
                    v = mat.apply(v)
                else:
                    raise InternalConsistencyError("generator action is not nilpotent")


def _check_weight_grading(m: Module, mat: SparseMatrix, i: int, sign: int) -> None:
    for r, row in mat.rows.items():
        for c in row:
            if m.weights[r] != m.weight_plus_alpha(m.weights[c], i, sign):
                raise InternalConsistencyError("weight grading violated")


# ---------------------------------------------------------------------------
# Tensor products
# ---------------------------------------------------------------------------

def tensor(m: Module, w: Module) -> Module:
    """V (x) W with the coproduct actions; basis index = a * dim(W) + b."""
    if m.cartan is not w.cartan:
        # allow equal-but-distinct data only if structurally identical
        if m.cartan.A != w.cartan.A or m.cartan.d != w.cartan.d:
            raise ModuleConstructionError("tensor factors use different Cartan data")
    cd = m.cartan
    dim = m.dim * w.dim
    weights = [tuple(a + b for a, b in zip(m.weights[x], w.weights[y]))
               for x in range(m.dim) for y in range(w.dim)]
    E: Dict[int, SparseMatrix] = {}
    F: Dict[int, SparseMatrix] = {}
    for i in range(cd.n):
        d = cd.d[i]
        trips_e: List[Tuple[int, int, FieldElement]] = []
        trips_f: List[Tuple[int, int, FieldElement]] = []
        for r, row in m.E[i].rows.items():
            for c, val in row.items():
                for b in range(w.dim):
                    k = FieldElement.q_power(d * w.weights[b][i])
                    trips_e.append((r * w.dim + b, c * w.dim + b, val * k))
        for r, row in w.E[i].rows.items():
            for c, val in row.items():
                for a in range(m.dim):
                    trips_e.append((a * w.dim + r, a * w.dim + c, val))
        for r, row in m.F[i].rows.items():
            for c, val in row.items():
                for b in range(w.dim):
                    trips_f.append((r * w.dim + b, c * w.dim + b, val))
        for r, row in w.F[i].rows.items():
            for c, val in row.items():
                for a in range(m.dim):
                    k = FieldElement.q_power(-d * m.weights[a][i])
                    trips_f.append((a * w.dim + r, a * w.dim + c, val * k))
        E[i] = SparseMatrix.from_triplets(dim, dim, trips_e)
        F[i] = SparseMatrix.from_triplets(dim, dim, trips_f)
    return Module(cd, weights, E, F, provenance="tensor", factors=(m, w))


def kron_vec(a: Vec, b: Vec, right_dim: int) -> Vec:
    """a (x) b in the tensor basis index a_idx * right_dim + b_idx."""
    out: Vec = {}
    for x, cx in a.items():
        for y, cy in b.items():
            out[x * right_dim + y] = cx * cy
    return v_clean(out)


def highest_weight_vectors(m: Module, nu: Sequence[int]) -> List[Vec]:
    """Basis of the joint E_i kernel inside the nu weight space."""
    nu = tuple(int(x) for x in nu)
    idx = m.weight_space(nu)
    if not idx:
        return []
    blocks: List[SparseMatrix] = []
    for i in range(m.cartan.n):
        tgt = m.weight_space(m.weight_plus_alpha(nu, i))
        blocks.append(m.E[i].restrict(tgt, idx))
    stacked_rows: Dict[int, Dict[int, FieldElement]] = {}
    off = 0
    for blk in blocks:
        for r, row in blk.rows.items():
            stacked_rows[off + r] = dict(row)
        off += blk.nrows
    stacked = SparseMatrix(off, len(idx), stacked_rows)
    out = []
    for kv in kernel(stacked):
        out.append(v_clean({idx[local]: c for local, c in kv.items()}))
    return out


# ---------------------------------------------------------------------------
# Isotypic decomposition
# ---------------------------------------------------------------------------

class IsotypicComponent:
    def __init__(self, nu: WeightT, hw_vec: Vec, basis: List[Vec], ref: Module):
        self.nu = nu
        self.hw_vec = hw_vec
        self.basis = basis
        self.ref = ref  # reference copy of V_nu, basis-aligned with `basis`

    def __repr__(self):
        return f"IsotypicComponent(nu={self.nu}, dim={len(self.basis)})"


class IsotypicDecomposition:
    def __init__(self, module: Module, components: List[IsotypicComponent]):
        self.module = module
        self.components = components
        cols: List[Vec] = []
        self.slices: List[Tuple[int, int]] = []
        for comp in components:
            start = len(cols)
            cols.extend(comp.basis)
            self.slices.append((start, len(cols)))
        if len(cols) != module.dim:
            raise InternalConsistencyError(
                f"components span {len(cols)} of {module.dim} dimensions")
        self.change = SparseMatrix.from_columns(cols, module.dim)
        try:
            self.change_inv = inverse(self.change)
        except ValueError as exc:
            raise InternalConsistencyError("component bases are dependent") from exc

    def project(self, v: Vec, comp_index: int) -> Vec:
        """Projection onto one component along the others."""
        lo, hi = self.slices[comp_index]
        coords = self.change_inv.apply(v)
        kept = {k: c for k, c in coords.items() if lo <= k < hi}
        return self.change.apply(kept)

    def component_coordinates(self, v: Vec, comp_index: int) -> Vec:
        """Coordinates of the projection in the component's reference basis."""
        lo, hi = self.slices[comp_index]
        coords = self.change_inv.apply(v)
        return {k - lo: c for k, c in coords.items() if lo <= k < hi}


def _component_order_key(cd: CartanDatum, lam_top: WeightT):
    def key(nu: WeightT):
        drop = [Fraction(a - b) for a, b in zip(lam_top, nu)]
        coeffs = cd.root_coefficients(drop)
        return (sum(coeffs), nu)
    return key


def isotypic_decomposition(m: Module,
                           make_ref=None) -> IsotypicDecomposition:
    """Split a completely reducible module into highest-weight components.

    Components are ordered by descending dominance of nu (height of the drop
    from the top weight, then coordinate order), highest first.
    """
    if m._decomposition is not None:
        return m._decomposition
    make_ref = make_ref or make_irreducible
    dominant = [wt for wt in m.weight_multiplicities() if m.cartan.is_dominant(wt)]
    top = max(dominant, key=lambda wt: sum(
        m.cartan.root_coefficients([Fraction(x) for x in wt])))
    dominant.sort(key=_component_order_key(m.cartan, top))
    comps: List[IsotypicComponent] = []
    ref_cache: Dict[WeightT, Module] = {}
    for nu in dominant:
        for hw in highest_weight_vectors(m, nu):
            if nu not in ref_cache:
                ref_cache[nu] = make_ref(m.cartan, nu)
            ref = ref_cache[nu]
            basis = [m.apply_f_word(wd, hw) for wd in ref.words]
            comps.append(IsotypicComponent(nu, hw, basis, ref))
    dec = IsotypicDecomposition(m, comps)
    _verify_decomposition(dec)
    m._decomposition = dec
    return dec


def _verify_decomposition(dec: IsotypicDecomposition) -> None:
    m = dec.module
    for comp in dec.components:
        if not m.cartan.is_dominant(comp.nu):
            raise InternalConsistencyError("component weight is not dominant")
        if v_is_zero(comp.hw_vec):
            raise InternalConsistencyError("zero highest-weight vector")
        for i in range(m.cartan.n):
            if not v_is_zero(m.E[i].apply(comp.hw_vec)):
                raise InternalConsistencyError("component vector is not highest weight")
        # the word map is an intertwiner from the reference copy
        phi = SparseMatrix.from_columns(comp.basis, m.dim)
        for i in range(m.cartan.n):
            for ours, theirs in ((m.E[i], comp.ref.E[i]), (m.F[i], comp.ref.F[i])):
                if (ours @ phi) != (phi @ theirs):
                    raise InternalConsistencyError("component is not intertwined with V_nu")
        if comp.ref.weight_multiplicities() != \
                _basis_weight_mult(m, comp.basis):
            raise InternalConsistencyError("component weight multiplicities mismatch")


def _basis_weight_mult(m: Module, basis: List[Vec]) -> Dict[WeightT, int]:
    out: Dict[WeightT, int] = {}
    for v in basis:
        wts = {m.weights[k] for k in v}
        if len(wts) != 1:
            raise InternalConsistencyError("component basis vector is not homogeneous")
        (wt,) = wts
        out[wt] = out.get(wt, 0) + 1
    return out
