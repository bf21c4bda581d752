"""Crystal graphs and global (canonical) bases of integrable modules.

The crystal layer works with the lattice L = A-span of Kashiwara-operator
words applied to the highest weight vector, where A is the ring of rational
functions regular at q = infinity.  Each weight slice of L carries an exact
A-basis (a "frame") computed by valuation-pivoted elimination; residues of
vectors at q = infinity are taken in frame coordinates.  Crystal vertices are
residue classes, edges are residues of the Kashiwara operators.

The global basis lifts the crystal: one bar-fixed element per vertex, lying
in L with residue exactly that vertex, and integral (a Laurent combination of
divided-power F-monomials applied to the highest weight vector).  Those four
conditions determine each element uniquely, which is what makes the
construction self-certifying: every element is rechecked against all of them
plus the residue-edge conditions before a GlobalBasis is returned.
"""

from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .cartan import CartanDatum
from .linalg import (SparseMatrix, Vec, inverse, kernel, solve, solve_many,
                     solve_unique, v_add, v_bar, v_clean, v_eq, v_is_zero,
                     v_scale, v_sub)
from .qscalar import ONE, ZERO, FieldElement, QLaurent
from .uqmod import (InternalConsistencyError, Module, ModuleConstructionError,
                    isotypic_decomposition, kron_vec, tensor)

ResidueT = Tuple[Fraction, ...]
WeightT = Tuple[int, ...]


def _deg_inf(x: FieldElement) -> Optional[Fraction]:
    """Degree of x at q = infinity; None for zero.

    Canonical denominators tend to 1 at infinity, so the numerator's top
    exponent is the growth rate of the whole quotient.
    """
    return x.num.degree()


# ---------------------------------------------------------------------------
# Lattice frames
# ---------------------------------------------------------------------------

def _echelon_lattice_basis(vecs: Sequence[Vec]) -> List[Vec]:
    """A-basis of the A-span of vecs (A = regular at infinity).

    Gaussian elimination where the pivot is always an entry of maximal degree
    at infinity, so every elimination coefficient is regular at infinity and
    the column operations are invertible over A.
    """
    work = [v_clean(dict(v)) for v in vecs]
    work = [v for v in work if not v_is_zero(v)]
    basis: List[Vec] = []
    while work:
        best = None  # (degree, work position, row)
        for pos, v in enumerate(work):
            for row in sorted(v):
                d = _deg_inf(v[row])
                if best is None or d > best[0]:
                    best = (d, pos, row)
        _, pos, prow = best
        pivot = work.pop(pos)
        pval = pivot[prow]
        basis.append(pivot)
        reduced = []
        for v in work:
            if prow in v:
                v = v_sub(v, v_scale(pivot, v[prow] / pval))
            if not v_is_zero(v):
                reduced.append(v)
        work = reduced
    return basis


class Frame:
    """Exact A-basis of one weight slice of a lattice, with coordinate solves."""

    def __init__(self, rows: Sequence[int], basis: Sequence[Vec]):
        self.rows = sorted(rows)
        self.pos = {r: t for t, r in enumerate(self.rows)}
        self.basis = list(basis)
        if len(self.basis) != len(self.rows):
            raise InternalConsistencyError(
                f"lattice slice has rank {len(self.basis)}, weight space has "
                f"dimension {len(self.rows)}")
        self.mat = SparseMatrix.from_columns(
            [self._local(v) for v in self.basis], len(self.rows))

    def _local(self, v: Vec) -> Vec:
        out = {}
        for r, x in v.items():
            if r not in self.pos:
                raise InternalConsistencyError(
                    f"vector leaves its weight space at row {r}")
            out[self.pos[r]] = x
        return out

    def coords(self, v: Vec) -> List[FieldElement]:
        sol = solve_unique(self.mat, self._local(v))
        return [sol.get(t, ZERO) for t in range(len(self.basis))]

    def coords_many(self, vs: Sequence[Vec]) -> List[List[FieldElement]]:
        sols = solve_many(self.mat, [self._local(v) for v in vs])
        out = []
        for sol in sols:
            if sol is None:
                raise InternalConsistencyError("vector outside its weight slice")
            out.append([sol.get(t, ZERO) for t in range(len(self.basis))])
        return out

    def in_lattice(self, coords: Sequence[FieldElement]) -> bool:
        return all(x.regular_at_infinity()[0] for x in coords)

    def residue(self, coords: Sequence[FieldElement], where: str = "") -> ResidueT:
        out = []
        for x in coords:
            ok, val = x.regular_at_infinity()
            if not ok:
                raise InternalConsistencyError(
                    f"vector has a pole at infinity relative to the lattice"
                    f"{' at ' + where if where else ''}")
            out.append(val)
        return tuple(out)


# ---------------------------------------------------------------------------
# Kashiwara operators via i-string decomposition
# ---------------------------------------------------------------------------

def _module_cache(m: Module) -> dict:
    cache = getattr(m, "_bases_cache", None)
    if cache is None:
        cache = {}
        m._bases_cache = cache
    return cache


def string_chains(m: Module, i: int) -> List[List[Vec]]:
    """i-string decomposition of m: chains [u, F_i^(1) u, ..., F_i^(mstr) u]
    over vectors u with E_i u = 0, spanning every weight space.

    The chain through a head of weight wt must have length <H_i, wt> + 1
    exactly; anything else means the module is not integrable and raises.
    """
    cache = _module_cache(m)
    key = ("chains", i)
    if key in cache:
        return cache[key]
    chains: List[List[Vec]] = []
    for wt in sorted(m.weight_multiplicities()):
        up = m.weight_plus_alpha(wt, i, +1)
        cols = m.weight_space(wt)
        block = m.E[i].restrict(m.weight_space(up), cols)
        for kv in kernel(block):
            head = v_clean({cols[t]: x for t, x in kv.items()})
            if v_is_zero(head):
                continue
            mstr = int(m.cartan.pairing(i, wt))
            if mstr < 0:
                raise InternalConsistencyError(
                    f"E_{i + 1}-highest vector at weight {wt} with negative "
                    f"pairing {mstr}; module is not integrable")
            chain = [v_clean(m.divided_power("F", i, n).apply(head))
                     for n in range(mstr + 1)]
            if any(v_is_zero(v) for v in chain) or not v_is_zero(
                    m.divided_power("F", i, mstr + 1).apply(head)):
                raise InternalConsistencyError(
                    f"i-string through weight {wt} does not have length "
                    f"{mstr + 1} for node {i + 1}")
            chains.append(chain)
    cache[key] = chains
    return chains


def operator_from_strings(m: Module, i: int, image_fn) -> SparseMatrix:
    """Matrix of the linear operator defined on i-string members.

    image_fn(chain, n) gives the image of the n-th divided-power member of
    a chain; the operator is extended linearly through the exact change of
    basis between string members and the module basis, weight space by
    weight space.  The strings through each weight space must form a basis
    of it.
    """
    by_weight: Dict[WeightT, List[Tuple[Vec, Vec]]] = {}
    for chain in string_chains(m, i):
        for n, vec in enumerate(chain):
            wt = m.weights[next(iter(vec))]
            by_weight.setdefault(wt, []).append((vec, image_fn(chain, n)))

    cols: List[Vec] = [{} for _ in range(m.dim)]
    for wt, members in by_weight.items():
        rows = m.weight_space(wt)
        if len(members) != len(rows):
            raise InternalConsistencyError(
                f"string decomposition of weight space {wt} for node {i + 1} "
                f"has rank {len(members)}, expected {len(rows)}")
        pos = {r: t for t, r in enumerate(rows)}
        smat = SparseMatrix.from_columns(
            [{pos[r]: x for r, x in vec.items()} for vec, _ in members],
            len(rows))
        units = [{t: ONE} for t in range(len(rows))]
        sols = solve_many(smat, units)
        for t, sol in zip(range(len(rows)), sols):
            if sol is None:
                raise InternalConsistencyError(
                    f"string vectors do not span weight space {wt}")
            img: Vec = {}
            for k, c in sol.items():
                target = members[k][1]
                if target:
                    img = v_add(img, v_scale(target, c))
            cols[rows[t]] = img
    return SparseMatrix.from_columns(cols, m.dim)


def kashiwara_operators(m: Module, i: int) -> Tuple[SparseMatrix, SparseMatrix]:
    """Matrices (Etilde, Ftilde) of the Kashiwara operators on all of m.

    On an i-string, Ftilde steps down one divided power and Etilde steps up
    one.
    """
    cache = _module_cache(m)
    key = ("kashiwara", i)
    if key in cache:
        return cache[key]

    def f_image(chain, n):
        return chain[n + 1] if n + 1 < len(chain) else {}

    def e_image(chain, n):
        return chain[n - 1] if n > 0 else {}

    out = (operator_from_strings(m, i, e_image),
           operator_from_strings(m, i, f_image))
    cache[key] = out
    return out


# ---------------------------------------------------------------------------
# Crystal graphs
# ---------------------------------------------------------------------------

class CrystalGraph:
    """Finite crystal: weighted vertices, f/e edges, string lengths.

    For crystals computed from a module, vertices carry representative
    vectors, frame coordinates and residues; purely combinatorial crystals
    (tensor products of computed ones) carry factor labels instead.
    """

    def __init__(self, cartan: CartanDatum, weights: Sequence[WeightT],
                 f_edges: Dict[Tuple[int, int], int],
                 module: Optional[Module] = None,
                 words: Optional[Sequence[Tuple[int, ...]]] = None,
                 reps: Optional[Sequence[Vec]] = None,
                 frames: Optional[Dict[WeightT, Frame]] = None,
                 residues: Optional[Sequence[ResidueT]] = None,
                 labels: Optional[Sequence[Tuple[int, int]]] = None):
        self.cartan = cartan
        self.weights = [tuple(w) for w in weights]
        self.size = len(self.weights)
        self.f_edges = dict(f_edges)
        self.e_edges: Dict[Tuple[int, int], int] = {}
        for (v, i), w in self.f_edges.items():
            if (w, i) in self.e_edges:
                raise InternalConsistencyError(
                    f"two f_{i + 1} edges end at vertex {w}")
            self.e_edges[(w, i)] = v
        self.module = module
        self.words = list(words) if words is not None else None
        self.reps = list(reps) if reps is not None else None
        self.frames = frames
        self.residues = list(residues) if residues is not None else None
        self.labels = list(labels) if labels is not None else None
        self._eps = [tuple(self._walk(v, i, self.e_edges)
                           for i in range(cartan.n))
                     for v in range(self.size)]
        self._phi = [tuple(self._walk(v, i, self.f_edges)
                           for i in range(cartan.n))
                     for v in range(self.size)]
        self._check_axioms()

    def _walk(self, v: int, i: int, edges: Dict[Tuple[int, int], int]) -> int:
        steps = 0
        while (v, i) in edges:
            v = edges[(v, i)]
            steps += 1
            if steps > self.size:
                raise InternalConsistencyError("crystal edge cycle detected")
        return steps

    def _check_axioms(self) -> None:
        n = self.cartan.n
        for v in range(self.size):
            for i in range(n):
                w = self.f_edges.get((v, i))
                if w is not None:
                    if self.weights[w] != tuple(
                            a - b for a, b in zip(self.weights[v],
                                                  self.cartan.alpha(i))):
                        raise InternalConsistencyError(
                            f"f_{i + 1} edge {v}->{w} is not weight-graded")
                    if self.e_edges.get((w, i)) != v:
                        raise InternalConsistencyError(
                            f"f_{i + 1} edge {v}->{w} has no matching e edge")
                if self._phi[v][i] - self._eps[v][i] != self.cartan.pairing(
                        i, self.weights[v]):
                    raise InternalConsistencyError(
                        f"phi - eps does not match the weight pairing at "
                        f"vertex {v}, node {i + 1}")

    # -- structure -----------------------------------------------------------

    def f(self, v: int, i: int) -> Optional[int]:
        return self.f_edges.get((v, i))

    def e(self, v: int, i: int) -> Optional[int]:
        return self.e_edges.get((v, i))

    def eps(self, v: int, i: int) -> int:
        return self._eps[v][i]

    def phi(self, v: int, i: int) -> int:
        return self._phi[v][i]

    def weight(self, v: int) -> WeightT:
        return self.weights[v]

    def highest(self) -> List[int]:
        return [v for v in range(self.size)
                if all(e == 0 for e in self._eps[v])]

    def lowest(self) -> List[int]:
        return [v for v in range(self.size)
                if all(p == 0 for p in self._phi[v])]

    # -- export ---------------------------------------------------------------

    def to_dot(self) -> str:
        lines = ["digraph crystal {"]
        for v in range(self.size):
            label = ",".join(str(c) for c in self.weights[v])
            if self.labels is not None:
                a, b = self.labels[v]
                label = f"{a}*{b}|{label}"
            lines.append(f'  v{v} [label="{label}"];')
        for (v, i) in sorted(self.f_edges):
            lines.append(f'  v{v} -> v{self.f_edges[(v, i)]} '
                         f'[label="{i + 1}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        return {
            "cartan": self.cartan.to_json_obj(),
            "vertices": [{"index": v, "weight": list(self.weights[v]),
                          "eps": list(self._eps[v]),
                          "phi": list(self._phi[v])}
                         for v in range(self.size)],
            "f_edges": [[v, i + 1, self.f_edges[(v, i)]]
                        for (v, i) in sorted(self.f_edges)],
            "highest": self.highest(),
        }


def crystal_graph(m: Module, hw_vec: Optional[Vec] = None) -> CrystalGraph:
    """Crystal of an irreducible module, by breadth-first residue search.

    Vertex representatives are Kashiwara-word vectors; at each new weight the
    frame is the echelon A-basis of all candidates arriving there, and
    candidates are identified by their residue tuples.  The e-edge structure
    is afterwards reverified against the algebraic Etilde residues.
    """
    if m.hw_index is None and hw_vec is None:
        raise ModuleConstructionError("crystal wants a highest weight vector")
    cache = _module_cache(m)
    if hw_vec is None and "crystal" in cache:
        return cache["crystal"]
    v0 = v_clean(dict(hw_vec)) if hw_vec is not None else m.hw_vector()
    if v_is_zero(v0):
        raise ModuleConstructionError("highest weight vector is zero")
    lam = m.weights[next(iter(v0))]
    for i in range(m.cartan.n):
        if not v_is_zero(m.E[i].apply(v0)):
            raise ModuleConstructionError(
                f"seed vector is not E_{i + 1}-highest")

    ops = [kashiwara_operators(m, i) for i in range(m.cartan.n)]

    weights: List[WeightT] = [lam]
    words: List[Tuple[int, ...]] = [()]
    depths: List[int] = [0]
    reps: List[Vec] = [v0]
    frames: Dict[WeightT, Frame] = {lam: Frame(m.weight_space(lam), [v0])}
    residues: List[ResidueT] = [frames[lam].residue(frames[lam].coords(v0))]
    vertex_at: Dict[Tuple[WeightT, ResidueT], int] = {(lam, residues[0]): 0}
    f_edges: Dict[Tuple[int, int], int] = {}

    layer = [0]
    while layer:
        grouped: Dict[WeightT, List[Tuple[int, int, Vec]]] = {}
        for v in layer:
            for i in range(m.cartan.n):
                img = v_clean(ops[i][1].apply(reps[v]))
                if v_is_zero(img):
                    continue
                grouped.setdefault(
                    m.weight_plus_alpha(weights[v], i, -1), []).append(
                        (v, i, img))
        nxt: List[int] = []
        for wt in sorted(grouped):
            cand = grouped[wt]
            if wt in frames:
                raise InternalConsistencyError(
                    f"weight {wt} reached at two different depths")
            fr = Frame(m.weight_space(wt), _echelon_lattice_basis(
                [vec for _, _, vec in cand]))
            frames[wt] = fr
            for v, i, vec in cand:
                res = fr.residue(fr.coords(vec), f"Ftilde_{i + 1} of vertex {v}")
                if all(c == 0 for c in res):
                    continue  # falls into q^-1 L: no f-edge
                key = (wt, res)
                tgt = vertex_at.get(key)
                if tgt is None:
                    tgt = len(weights)
                    vertex_at[key] = tgt
                    weights.append(wt)
                    words.append(words[v] + (i,))
                    depths.append(depths[v] + 1)
                    reps.append(vec)
                    residues.append(res)
                    nxt.append(tgt)
                f_edges[(v, i)] = tgt
        layer = nxt

    if len(weights) != m.dim:
        raise InternalConsistencyError(
            f"crystal has {len(weights)} vertices, module dimension {m.dim}")

    # algebraic verification of the e side
    e_expect: Dict[Tuple[int, int], int] = {}
    for (v, i), w in f_edges.items():
        e_expect[(w, i)] = v
    for v in range(len(weights)):
        for i in range(m.cartan.n):
            img = v_clean(ops[i][0].apply(reps[v]))
            up = m.weight_plus_alpha(weights[v], i, +1)
            parent = e_expect.get((v, i))
            if v_is_zero(img):
                if parent is not None:
                    raise InternalConsistencyError(
                        f"Etilde_{i + 1} kills vertex {v} but an f-edge "
                        f"arrives there")
                continue
            fr = frames.get(up)
            if fr is None:
                raise InternalConsistencyError(
                    f"Etilde_{i + 1} of vertex {v} lands outside the crystal")
            res = fr.residue(fr.coords(img), f"Etilde_{i + 1} of vertex {v}")
            want = residues[parent] if parent is not None else tuple(
                Fraction(0) for _ in res)
            if res != want:
                raise InternalConsistencyError(
                    f"Etilde_{i + 1} residue at vertex {v} disagrees with "
                    f"the crystal edge")

    graph = CrystalGraph(m.cartan, weights, f_edges, module=m, words=words,
                         reps=reps, frames=frames, residues=residues)
    if len(graph.highest()) != 1 or graph.highest()[0] != 0:
        raise InternalConsistencyError(
            "irreducible crystal must have exactly the seed as highest vertex")
    if hw_vec is None:
        cache["crystal"] = graph
    return graph


# ---------------------------------------------------------------------------
# Global bases
# ---------------------------------------------------------------------------

def symmetric_completion(f: FieldElement) -> FieldElement:
    """a_0 + sum_{n>0} a_n (q^n + q^-n) for a Laurent polynomial sum a_n q^n.

    The completion agrees with f in all degrees >= 0 and is bar-invariant, so
    subtracting it from a bar-invariant scalar leaves only negative degrees.
    """
    if not f.is_laurent():
        raise ValueError("symmetric completion wants a Laurent polynomial")
    terms = []
    for e, c in f.num.terms:
        if e > 0:
            terms.append((e, c))
            terms.append((-e, c))
        elif e == 0:
            terms.append((e, c))
    return FieldElement(QLaurent(terms))


class GlobalBasis:
    """Bar-fixed lift of a crystal: one element per vertex."""

    def __init__(self, module: Module, crystal: CrystalGraph,
                 elements: Sequence[Vec], hw_vec: Vec,
                 bar_scalar: FieldElement, monomial_words):
        self.module = module
        self.crystal = crystal
        self.elements = list(elements)
        self.hw_vec = dict(hw_vec)
        self.bar_scalar = bar_scalar
        self.monomial_words = list(monomial_words)
        self.change = SparseMatrix.from_columns(self.elements, module.dim)
        try:
            self.change_inv = inverse(self.change)
        except ValueError:
            raise InternalConsistencyError(
                "global basis elements are linearly dependent")
        self.hw_vertex = 0
        lows = crystal.lowest()
        if len(lows) != 1:
            raise InternalConsistencyError(
                f"expected one lowest vertex, found {len(lows)}")
        self.low_vertex = lows[0]

    def bar(self, v: Vec) -> Vec:
        """The transported bar involution of the module."""
        return v_scale(v_bar(v), self.bar_scalar)

    def element(self, v: int) -> Vec:
        return dict(self.elements[v])

    def to_json_obj(self) -> dict:
        return {
            "crystal": self.crystal.to_json_obj(),
            "elements": [sorted(
                ([r, x.to_json_obj()] for r, x in vec.items()),
                key=lambda p: p[0]) for vec in self.elements],
        }


def _adapted_word(crystal: CrystalGraph, v: int,
                  memo: Dict[int, Tuple[Tuple[int, int], ...]]
                  ) -> Tuple[Tuple[int, int], ...]:
    """Divided-power recipe for a vertex: peel full i-strings, lowest node
    index first."""
    if v in memo:
        return memo[v]
    if all(crystal.eps(v, i) == 0 for i in range(crystal.cartan.n)):
        memo[v] = ()
        return memo[v]
    i = min(j for j in range(crystal.cartan.n) if crystal.eps(v, j) > 0)
    a = crystal.eps(v, i)
    up = v
    for _ in range(a):
        up = crystal.e(up, i)
    memo[v] = ((i, a),) + _adapted_word(crystal, up, memo)
    return memo[v]


def _apply_divided_word(m: Module, word: Sequence[Tuple[int, int]],
                        v: Vec) -> Vec:
    out = v
    for i, a in reversed(list(word)):
        out = m.divided_power("F", i, a).apply(out)
    return v_clean(out)


def _monomial_generators(m: Module, hw_vec: Vec, wt: WeightT,
                         memo: Dict[WeightT, List[Vec]]) -> List[Vec]:
    """Spanning set of the integral form's weight slice: all vectors
    obtainable from the highest weight vector by divided-power F-monomials."""
    if wt in memo:
        return memo[wt]
    lam = m.weights[next(iter(hw_vec))]
    if wt == lam:
        memo[wt] = [dict(hw_vec)]
        return memo[wt]
    out: List[Vec] = []
    for i in range(m.cartan.n):
        a = 1
        while True:
            up = tuple(wt[k] + a * m.cartan.A[k][i] for k in range(m.cartan.n))
            if not m.weight_space(up):
                break
            for src in _monomial_generators(m, hw_vec, up, memo):
                vec = v_clean(m.divided_power("F", i, a).apply(src))
                if not v_is_zero(vec) and not any(v_eq(vec, got)
                                                  for got in out):
                    out.append(vec)
            a += 1
    memo[wt] = out
    return out


def _fits_vertex(frame: Frame, coords: List[FieldElement],
                 want: ResidueT) -> bool:
    if not frame.in_lattice(coords):
        return False
    return tuple(x.regular_at_infinity()[1] for x in coords) == want


def _triangular_solve(m: Module, crystal: CrystalGraph, v: int,
                      hw_vec: Vec, gen_memo: Dict[WeightT, List[Vec]]) -> Vec:
    """Exact solve for the global element at vertex v.

    The element is written as a bar-symmetric Laurent-window combination of
    divided-power monomial vectors; regularity at infinity and the residue
    pin become Q-linear conditions on the window coefficients.  Any solution
    satisfies all four characterizing conditions, so it is the element.
    """
    wt = crystal.weights[v]
    frame = crystal.frames[wt]
    want = crystal.residues[v]
    gens = _monomial_generators(m, hw_vec, wt, gen_memo)
    if not gens:
        raise InternalConsistencyError(
            f"no integral generators at weight {wt}")
    gcoords = frame.coords_many(gens)

    spread = Fraction(0)
    for row in gcoords:
        for x in row:
            if x.is_zero():
                continue
            spread = max(spread, abs(x.num.degree()), abs(x.num.valuation()),
                         abs(x.den.valuation()))
    window = int(spread) + 2

    for _ in range(4):
        sol = _window_solve(gens, gcoords, frame, want, window)
        if sol is not None:
            return sol
        window *= 2
    raise InternalConsistencyError(
        f"no bar-symmetric integral lift found for vertex {v} at weight {wt}")


def _window_solve(gens: List[Vec], gcoords: List[List[FieldElement]],
                  frame: Frame, want: ResidueT, window: int) -> Optional[Vec]:
    nunk = len(gens) * (window + 1)

    def unk(w: int, n: int) -> int:
        return w * (window + 1) + n

    rows: List[Vec] = []
    rhs: List[FieldElement] = []
    for t in range(len(frame.basis)):
        den = ONE
        for w in range(len(gens)):
            x = gcoords[w][t]
            if not x.is_zero():
                den = den * FieldElement(x.den)
        numers: List[QLaurent] = []
        for w in range(len(gens)):
            prod = gcoords[w][t] * den
            if not prod.is_laurent():
                raise InternalConsistencyError(
                    "common denominator failed to clear a frame coordinate")
            numers.append(prod.num)
        dtop = den.num.degree()
        # coefficient of q^e in sum_w z_w * numers[w], for e above the
        # regularity threshold, as a linear form in the window unknowns
        exps = {dtop}
        for w, nm in enumerate(numers):
            for e, _ in nm.terms:
                for n in range(window + 1):
                    for s in ((n, -n) if n else (0,)):
                        if e + s >= dtop:
                            exps.add(e + s)
        for e in sorted(exps, reverse=True):
            row: Vec = {}
            for w, nm in enumerate(numers):
                for n in range(window + 1):
                    c = nm.coeff(e - n) + (nm.coeff(e + n) if n else Fraction(0))
                    if c:
                        u = unk(w, n)
                        row[u] = row.get(u, ZERO) + FieldElement.from_fraction(c)
            row = v_clean(row)
            if e > dtop:
                if row:
                    rows.append(row)
                    rhs.append(ZERO)
            else:  # e == dtop: the residue row
                rows.append(row)
                rhs.append(FieldElement.from_fraction(
                    want[t] * den.num.coeff(dtop)))

    mat = SparseMatrix.from_triplets(
        len(rows), nunk,
        [(r, c, x) for r, row in enumerate(rows) for c, x in row.items()])
    sol = solve(mat, {r: x for r, x in enumerate(rhs) if not x.is_zero()})
    if sol is None:
        return None
    out: Vec = {}
    for w in range(len(gens)):
        z = ZERO
        for n in range(window + 1):
            a = sol.get(unk(w, n), ZERO)
            if a.is_zero():
                continue
            mono = FieldElement(QLaurent([(n, 1), (-n, 1)] if n else [(0, 1)]))
            z = z + a * mono
        if not z.is_zero():
            out = v_add(out, v_scale(gens[w], z))
    return v_clean(out)


def compute_global_basis(m: Module, hw_vec: Optional[Vec] = None) -> GlobalBasis:
    """Global basis of an irreducible module with a pinned highest weight
    vector.

    Stage 1 transports the bar involution: it fixes every F-word of the pin,
    so on coordinates it is coefficient-bar twisted by pin/bar(pin).  Stage 2
    builds the crystal and one bar-fixed divided-power monomial candidate per
    vertex.  Stage 3 keeps candidates that already lift their vertex (in the
    lattice, residue on the nose) and replaces the rest through the exact
    window solve.  Every characterizing condition is reverified before the
    basis is returned, so a bug upstream surfaces as an error here, not as a
    wrong basis.
    """
    cache = _module_cache(m)
    if hw_vec is None and "global" in cache:
        return cache["global"]

    for i in range(m.cartan.n):
        for mat in (m.E[i], m.F[i]):
            if mat.bar_entries() != mat:
                raise ModuleConstructionError(
                    "global basis wants a module whose E/F matrices are "
                    "bar-invariant (irreducible construction form)")

    seed = v_clean(dict(hw_vec)) if hw_vec is not None else m.hw_vector()
    if len(seed) != 1:
        raise ModuleConstructionError(
            "highest weight pin must be supported on the single top line")
    (_, c), = seed.items()
    bar_scalar = c / c.bar()

    def bar_m(v: Vec) -> Vec:
        return v_scale(v_bar(v), bar_scalar)

    crystal = crystal_graph(m, seed if hw_vec is not None else None)

    word_memo: Dict[int, Tuple[Tuple[int, int], ...]] = {}
    orders = sorted(range(crystal.size),
                    key=lambda v: (len(crystal.words[v]), crystal.weights[v], v))
    elements: Dict[int, Vec] = {}
    gen_memo: Dict[WeightT, List[Vec]] = {}
    for v in orders:
        wt = crystal.weights[v]
        frame = crystal.frames[wt]
        g = _apply_divided_word(m, _adapted_word(crystal, v, word_memo), seed)
        if v_is_zero(g):
            raise InternalConsistencyError(
                f"adapted monomial for vertex {v} vanishes")
        if not _fits_vertex(frame, frame.coords(g), crystal.residues[v]):
            g = _triangular_solve(m, crystal, v, seed, gen_memo)
        if v_sub(bar_m(g), g):
            raise InternalConsistencyError(
                f"global element at vertex {v} is not bar-fixed")
        elements[v] = g

    gb = GlobalBasis(m, crystal, [elements[v] for v in range(crystal.size)],
                     seed, bar_scalar,
                     [_adapted_word(crystal, v, word_memo)
                      for v in range(crystal.size)])
    verify_global_basis(gb)
    if hw_vec is None:
        cache["global"] = gb
    return gb


def verify_global_basis(gb: GlobalBasis) -> None:
    """Recheck every characterizing condition of a global basis.

    Raises InternalConsistencyError naming the offending vertex.
    """
    m = gb.module
    crystal = gb.crystal
    for v, g in enumerate(gb.elements):
        if v_sub(gb.bar(g), g):
            raise InternalConsistencyError(
                f"global basis element {v} is not bar-fixed")
        frame = crystal.frames[crystal.weights[v]]
        if not _fits_vertex(frame, frame.coords(g), crystal.residues[v]):
            raise InternalConsistencyError(
                f"global basis element {v} does not lift its vertex")
    # residues of the Kashiwara operators must reproduce the crystal edges
    for i in range(m.cartan.n):
        et, ft = kashiwara_operators(m, i)
        for mat, edges, sign in ((ft, crystal.f_edges, -1),
                                 (et, crystal.e_edges, +1)):
            for v, g in enumerate(gb.elements):
                img = v_clean(mat.apply(g))
                tgt = edges.get((v, i))
                if v_is_zero(img):
                    if tgt is not None:
                        raise InternalConsistencyError(
                            f"Kashiwara operator {i + 1} kills element {v} "
                            f"but the crystal has an edge")
                    continue
                wt2 = m.weight_plus_alpha(crystal.weights[v], i, sign)
                fr2 = crystal.frames.get(wt2)
                if fr2 is None:
                    raise InternalConsistencyError(
                        f"Kashiwara image of element {v} leaves the crystal")
                res = fr2.residue(fr2.coords(img),
                                  f"element {v}, node {i + 1}")
                want = crystal.residues[tgt] if tgt is not None else tuple(
                    Fraction(0) for _ in res)
                if res != want:
                    raise InternalConsistencyError(
                        f"Kashiwara residue of element {v} at node {i + 1} "
                        f"disagrees with the crystal edge")


# ---------------------------------------------------------------------------
# Tensor crystals
# ---------------------------------------------------------------------------

_ORIENTATIONS = ("left-dominant", "right-dominant")
_orientation_cache: Dict[tuple, str] = {}


def _cartan_key(cd: CartanDatum) -> tuple:
    return tuple(tuple(row) for row in cd.A)


def _pair_edges(bv: CrystalGraph, bw: CrystalGraph, orientation: str):
    """Signature-rule f and e edges on pairs, as index maps."""
    n = bv.cartan.n
    f_map: Dict[Tuple[int, int], Optional[int]] = {}
    e_map: Dict[Tuple[int, int], Optional[int]] = {}
    flip = orientation == "right-dominant"

    def enc(a: int, b: int) -> int:
        return a * bw.size + b

    for a in range(bv.size):
        for b in range(bw.size):
            for i in range(n):
                pa, eb = bv.phi(a, i), bw.eps(b, i)
                if flip:
                    act_left_f = bw.phi(b, i) <= bv.eps(a, i)
                    act_left_e = bw.phi(b, i) < bv.eps(a, i)
                else:
                    act_left_f = pa > eb
                    act_left_e = pa >= eb
                if act_left_f:
                    fa = bv.f(a, i)
                    f_map[(enc(a, b), i)] = None if fa is None else enc(fa, b)
                else:
                    fb = bw.f(b, i)
                    f_map[(enc(a, b), i)] = None if fb is None else enc(a, fb)
                if act_left_e:
                    ea = bv.e(a, i)
                    e_map[(enc(a, b), i)] = None if ea is None else enc(ea, b)
                else:
                    eb2 = bw.e(b, i)
                    e_map[(enc(a, b), i)] = None if eb2 is None else enc(a, eb2)
    return f_map, e_map


def _algebraic_pair_edges(bv: CrystalGraph, bw: CrystalGraph):
    """Residues of the algebraic Kashiwara operators on the tensor module,
    as edge maps on factor-vertex pairs."""
    if bv.module is None or bw.module is None:
        raise ModuleConstructionError(
            "algebraic cross-check wants computed crystals")
    tm = tensor(bv.module, bw.module)
    pure = {(a, b): kron_vec(bv.reps[a], bw.reps[b], bw.module.dim)
            for a in range(bv.size) for b in range(bw.size)}
    by_wt: Dict[WeightT, List[Tuple[int, int]]] = {}
    for (a, b) in sorted(pure):
        wt = tuple(x + y for x, y in zip(bv.weights[a], bw.weights[b]))
        by_wt.setdefault(wt, []).append((a, b))
    frames: Dict[WeightT, Frame] = {}
    res_of: Dict[Tuple[int, int], ResidueT] = {}
    pair_at: Dict[Tuple[WeightT, ResidueT], Tuple[int, int]] = {}
    for wt, pairs in by_wt.items():
        fr = Frame(tm.weight_space(wt),
                   _echelon_lattice_basis([pure[p] for p in pairs]))
        frames[wt] = fr
        for p in pairs:
            r = fr.residue(fr.coords(pure[p]), f"pure tensor {p}")
            if (wt, r) in pair_at:
                raise InternalConsistencyError(
                    f"pure tensors {pair_at[(wt, r)]} and {p} have equal "
                    f"residues")
            pair_at[(wt, r)] = p
            res_of[p] = r

    def classify(vec: Vec, wt: WeightT, what: str):
        if v_is_zero(vec):
            return None
        fr = frames.get(wt)
        if fr is None:
            raise InternalConsistencyError(f"{what} leaves the weight grid")
        r = fr.residue(fr.coords(vec), what)
        if all(c == 0 for c in r):
            return None
        got = pair_at.get((wt, r))
        if got is None:
            raise InternalConsistencyError(
                f"{what} has a residue matching no pure tensor")
        return got

    n = tm.cartan.n
    f_map: Dict[Tuple[Tuple[int, int], int], Optional[Tuple[int, int]]] = {}
    e_map: Dict[Tuple[Tuple[int, int], int], Optional[Tuple[int, int]]] = {}
    for i in range(n):
        et, ft = kashiwara_operators(tm, i)
        for (a, b), vec in pure.items():
            wt = tuple(x + y for x, y in zip(bv.weights[a], bw.weights[b]))
            f_map[((a, b), i)] = classify(
                v_clean(ft.apply(vec)), tm.weight_plus_alpha(wt, i, -1),
                f"Ftilde_{i + 1} of pure tensor {(a, b)}")
            e_map[((a, b), i)] = classify(
                v_clean(et.apply(vec)), tm.weight_plus_alpha(wt, i, +1),
                f"Etilde_{i + 1} of pure tensor {(a, b)}")
    return f_map, e_map


def signature_orientation(cd: CartanDatum) -> str:
    """Which tensor factor the signature rule favors, for this Cartan datum.

    Calibrated once per datum by comparing both candidate rules against the
    algebraic Kashiwara residues on V_{omega_1} tensor V_{omega_1}.
    """
    key = _cartan_key(cd)
    if key in _orientation_cache:
        return _orientation_cache[key]
    from .uqmod import make_irreducible
    probe = make_irreducible(cd, tuple(1 if k == 0 else 0
                                       for k in range(cd.n)))
    bp = crystal_graph(probe)
    alg_f, alg_e = _algebraic_pair_edges(bp, bp)
    matches = []
    for orientation in _ORIENTATIONS:
        f_map, e_map = _pair_edges(bp, bp, orientation)

        def dec(p):
            return None if p is None else (p // bp.size, p % bp.size)

        ok = all(dec(f_map[(a * bp.size + b, i)]) == alg_f[((a, b), i)]
                 and dec(e_map[(a * bp.size + b, i)]) == alg_e[((a, b), i)]
                 for a in range(bp.size) for b in range(bp.size)
                 for i in range(cd.n))
        if ok:
            matches.append(orientation)
    if len(matches) != 1:
        raise InternalConsistencyError(
            f"signature rule calibration found {len(matches)} matching "
            f"orientations")
    _orientation_cache[key] = matches[0]
    return matches[0]


def tensor_crystal(bv: CrystalGraph, bw: CrystalGraph) -> CrystalGraph:
    """Combinatorial crystal of a tensor product, via the signature rule."""
    if bv.cartan.A != bw.cartan.A:
        raise ModuleConstructionError("tensor crystal wants one Cartan datum")
    orientation = signature_orientation(bv.cartan)
    f_map, _ = _pair_edges(bv, bw, orientation)
    weights = []
    labels = []
    for a in range(bv.size):
        for b in range(bw.size):
            weights.append(tuple(x + y for x, y in zip(bv.weights[a],
                                                       bw.weights[b])))
            labels.append((a, b))
    f_edges = {(v, i): w for (v, i), w in f_map.items() if w is not None}
    graph = CrystalGraph(bv.cartan, weights, f_edges, labels=labels)
    for h in graph.highest():
        a, _ = graph.labels[h]
        if any(bv.eps(a, i) != 0 for i in range(bv.cartan.n)):
            raise InternalConsistencyError(
                f"highest pair vertex {graph.labels[h]} has a non-highest "
                f"left factor")
    return graph


def cross_validate_tensor_crystal(bv: CrystalGraph, bw: CrystalGraph) -> CrystalGraph:
    """Signature-rule crystal, rechecked edge by edge against the algebraic
    Kashiwara residues on the tensor module."""
    graph = tensor_crystal(bv, bw)
    alg_f, alg_e = _algebraic_pair_edges(bv, bw)
    _, e_map = _pair_edges(bv, bw, signature_orientation(bv.cartan))
    for a in range(bv.size):
        for b in range(bw.size):
            v = a * bw.size + b
            for i in range(bv.cartan.n):
                got = graph.f(v, i)
                want = alg_f[((a, b), i)]
                if (got is None) != (want is None) or (
                        got is not None and graph.labels[got] != want):
                    raise InternalConsistencyError(
                        f"signature rule disagrees with algebraic residues "
                        f"at pair {(a, b)}, node {i + 1} (f side)")
                got_e = e_map[(v, i)]
                want_e = alg_e[((a, b), i)]
                if (got_e is None) != (want_e is None) or (
                        got_e is not None and graph.labels[got_e] != want_e):
                    raise InternalConsistencyError(
                        f"signature rule disagrees with algebraic residues "
                        f"at pair {(a, b)}, node {i + 1} (e side)")
    return graph


# ---------------------------------------------------------------------------
# Highest weight sets
# ---------------------------------------------------------------------------

def highest_weight_set(vlam: Module, bmu: GlobalBasis, nu: Sequence[int]
                       ) -> List[int]:
    """S^nu: vertices b of the right crystal with b_lambda x b highest of
    weight nu, cross-checked against the isotypic decomposition."""
    nu = tuple(int(x) for x in nu)
    bl = crystal_graph(vlam)
    pair = tensor_crystal(bl, bmu.crystal)
    out = []
    for h in pair.highest():
        a, b = pair.labels[h]
        if a == 0 and pair.weight(h) == nu:
            out.append(b)
    out.sort()

    tm = tensor(vlam, bmu.module)
    dec = isotypic_decomposition(tm)
    comps = [k for k, comp in enumerate(dec.components) if comp.nu == nu]
    if len(comps) != len(out):
        raise InternalConsistencyError(
            f"|S^{nu}| = {len(out)} but the isotypic multiplicity is "
            f"{len(comps)}")
    for b in out:
        vec = kron_vec(vlam.hw_vector(), bmu.elements[b], bmu.module.dim)
        proj: Vec = {}
        for k in comps:
            proj = v_add(proj, dec.project(vec, k))
        if v_is_zero(proj):
            raise InternalConsistencyError(
                f"crystal predicts vertex {b} in S^{nu} but the isotypic "
                f"projection vanishes")
    return out
