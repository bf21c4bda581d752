"""Module endomorphisms transported from algebra morphisms.

A MorphismSpec records how an algebra morphism C acts on the generators
E_i, F_i, K_i and whether it is q-linear or bar-linear.  A TransportedMap is
the unique endomorphism T of a module satisfying T(X v) = C(X) T(v) for all
generators X, pinned by its value on one cyclic vector per component.
transport propagates the pins along E- and F-words, solves for the matrix,
and reverifies the compatibility square on every generator before returning.

Bar-linear maps are stored as (matrix, flag) with the convention "apply
coefficient-wise bar first, then the matrix"; composing two bar-linear maps
therefore yields a q-linear map with matrix M1 bar(M2).

Braid operators act on each i-string [u, F^(1)u, .., F^(m)u] by reversing it
with signed q_i-power coefficients.  Four sign/power variants are exposed;
the one compatible with C_{T_w0} is found by calibration on a probe module
and cached per Cartan datum.
"""

from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .bases import GlobalBasis, operator_from_strings
from .cartan import CartanDatum
from .linalg import (SparseMatrix, Vec, inverse, v_bar, v_clean, v_eq,
                     v_is_zero, v_scale, v_sub)
from .qscalar import ONE, FieldElement
from .uqmod import (InternalConsistencyError, Module,
                    ModuleConstructionError, make_irreducible)

ImageFn = Callable[[Module, int], SparseMatrix]


class MorphismSpec:
    """Generator images of an algebra morphism, with linearity metadata.

    comultiplicativity is "auto", "anti", or None; it is not used here but
    downstream braiding code reads it to decide whether a commutor built
    from this morphism needs the tensor flip.
    """

    def __init__(self, name: str, bar_linear: bool,
                 e_image: ImageFn, f_image: ImageFn,
                 k_image: Callable[[Module, int, int], SparseMatrix],
                 multiplicativity: str = "automorphism",
                 comultiplicativity: Optional[str] = None):
        self.name = name
        self.bar_linear = bar_linear
        self.e_image = e_image
        self.f_image = f_image
        self.k_image = k_image
        self.multiplicativity = multiplicativity
        self.comultiplicativity = comultiplicativity

    def __repr__(self):
        kind = "bar-linear" if self.bar_linear else "q-linear"
        return f"MorphismSpec({self.name}, {kind})"


def identity_spec() -> MorphismSpec:
    return MorphismSpec(
        "identity", False,
        lambda m, i: m.E[i],
        lambda m, i: m.F[i],
        lambda m, i, p: m.k_i(i, p))


def bar_spec() -> MorphismSpec:
    """E_i -> E_i, F_i -> F_i, K_i -> K_i^-1, bar-linear."""
    return MorphismSpec(
        "bar", True,
        lambda m, i: m.E[i],
        lambda m, i: m.F[i],
        lambda m, i, p: m.k_i(i, -p))


def theta_spec() -> MorphismSpec:
    """E_i -> E_i K_i^-1, F_i -> K_i F_i, K_i -> K_i^-1; bar-linear algebra
    involution and coalgebra anti-involution."""
    return MorphismSpec(
        "theta", True,
        lambda m, i: m.E[i] @ m.k_i(i, -1),
        lambda m, i: m.k_i(i, 1) @ m.F[i],
        lambda m, i, p: m.k_i(i, -p),
        comultiplicativity="anti")


def gamma_spec() -> MorphismSpec:
    """E_i -> -K_t F_t, F_i -> -E_t K_t^-1, K_i -> K_t with t = theta(i);
    bar-linear Hopf algebra automorphism."""
    def e_im(m, i):
        t = m.cartan.theta[i]
        return (m.k_i(t, 1) @ m.F[t]).scale(-ONE)

    def f_im(m, i):
        t = m.cartan.theta[i]
        return (m.E[t] @ m.k_i(t, -1)).scale(-ONE)

    return MorphismSpec(
        "gamma", True, e_im, f_im,
        lambda m, i, p: m.k_i(m.cartan.theta[i], p),
        comultiplicativity="auto")


def tw0_spec() -> MorphismSpec:
    """E_i -> -F_t K_t, F_i -> -K_t^-1 E_t, K_i -> K_t^-1, t = theta(i);
    q-linear."""
    def e_im(m, i):
        t = m.cartan.theta[i]
        return (m.F[t] @ m.k_i(t, 1)).scale(-ONE)

    def f_im(m, i):
        t = m.cartan.theta[i]
        return (m.k_i(t, -1) @ m.E[t]).scale(-ONE)

    return MorphismSpec(
        "tw0", False, e_im, f_im,
        lambda m, i, p: m.k_i(m.cartan.theta[i], -p))


def j_spec() -> MorphismSpec:
    """E_i -> K_i E_i, F_i -> F_i K_i^-1, K_i -> K_i; q-linear."""
    return MorphismSpec(
        "j", False,
        lambda m, i: m.k_i(i, 1) @ m.E[i],
        lambda m, i: m.F[i] @ m.k_i(i, -1),
        lambda m, i, p: m.k_i(i, p))


class TransportedMap:
    """Endomorphism of one module; bar-linear maps apply bar, then matrix."""

    def __init__(self, module: Module, matrix: SparseMatrix, bar_linear: bool,
                 provenance: str = ""):
        if matrix.nrows != module.dim or matrix.ncols != module.dim:
            raise ValueError("matrix shape does not match the module")
        self.module = module
        self.matrix = matrix
        self.bar_linear = bar_linear
        self.provenance = provenance

    def apply(self, v: Vec) -> Vec:
        return v_clean(self.matrix.apply(v_bar(v) if self.bar_linear else v))

    def compose(self, other: "TransportedMap") -> "TransportedMap":
        """self after other."""
        if other.module is not self.module:
            raise ValueError("composition wants maps on one module")
        inner = (other.matrix.bar_entries() if self.bar_linear
                 else other.matrix)
        return TransportedMap(
            self.module, self.matrix @ inner,
            self.bar_linear != other.bar_linear,
            f"({self.provenance} o {other.provenance})")

    def inverse(self) -> "TransportedMap":
        inv = inverse(self.matrix)
        if self.bar_linear:
            # y = A bar(x)  =>  x = bar(A)^-1-bar applied to y
            inv = inv.bar_entries()
        return TransportedMap(self.module, inv, self.bar_linear,
                              f"({self.provenance})^-1")

    def scale(self, c: FieldElement) -> "TransportedMap":
        return TransportedMap(self.module, self.matrix.scale(c),
                              self.bar_linear, f"{c} * {self.provenance}")

    def is_identity(self) -> bool:
        return not self.bar_linear and self.matrix.is_identity()

    def __eq__(self, other) -> bool:
        return (isinstance(other, TransportedMap)
                and self.module is other.module
                and self.bar_linear == other.bar_linear
                and self.matrix == other.matrix)

    def __repr__(self):
        kind = "bar-linear" if self.bar_linear else "q-linear"
        return f"TransportedMap({self.provenance or '?'}, {kind})"

    def to_json_obj(self) -> dict:
        return {
            "bar_linear": self.bar_linear,
            "provenance": self.provenance,
            "dim": self.module.dim,
            "entries": [[r, c, x.to_json_obj()]
                        for r, c, x in self.matrix.to_triplets()],
        }


def verify_compatibility(tmap: TransportedMap,
                         spec: MorphismSpec) -> List[str]:
    """Exact check of T(X v) = C(X) T(v) on generators and basis vectors.

    Returns one description per failing (generator, basis vector) pair;
    empty means the compatibility square commutes.
    """
    m = tmap.module
    a = tmap.matrix
    failures: List[str] = []
    for i in range(m.cartan.n):
        for label, mat, img in (
                (f"E_{i + 1}", m.E[i], spec.e_image(m, i)),
                (f"F_{i + 1}", m.F[i], spec.f_image(m, i)),
                (f"K_{i + 1}", m.k_i(i, 1), spec.k_image(m, i, 1))):
            lhs = a @ (mat.bar_entries() if tmap.bar_linear else mat)
            rhs = img @ a
            if lhs != rhs:
                diff = lhs.sub(rhs)
                bad = sorted({c for _, c, _ in diff.to_triplets()})
                for col in bad:
                    failures.append(
                        f"{label} compatibility fails at basis vector {col}")
    return failures


def _normalize_pins(v0, w0) -> List[Tuple[Vec, Vec]]:
    if isinstance(v0, dict):
        v0, w0 = [v0], [w0]
    if len(v0) != len(w0):
        raise ValueError("pin source and target lists differ in length")
    return [(v_clean(dict(a)), v_clean(dict(b))) for a, b in zip(v0, w0)]


def transport(m: Module, spec: MorphismSpec,
              v0: Union[Vec, Sequence[Vec]],
              w0: Union[Vec, Sequence[Vec]]) -> TransportedMap:
    """The endomorphism compatible with spec sending each v0 to its w0.

    Pins are propagated along E- and F-words (T(X x) = C(X) T(x)); the
    propagated pairs must span the module, which holds exactly when the pins
    generate it (one cyclic vector per component).  The matrix is solved
    from an independent subset of pairs and then verified against every
    propagated pair, every pin, and the full compatibility square.
    """
    pins = _normalize_pins(v0, w0)
    if not pins or any(v_is_zero(s) for s, _ in pins):
        raise ModuleConstructionError("transport wants nonzero pin sources")
    gens = [(m.E[i], spec.e_image(m, i)) for i in range(m.cartan.n)]
    gens += [(m.F[i], spec.f_image(m, i)) for i in range(m.cartan.n)]

    pairs: List[Tuple[Vec, Vec]] = list(pins)
    # incremental elimination over the pair sources picks the basis subset
    elim: List[Tuple[int, Vec]] = []
    chosen: List[int] = []

    def try_add(idx: int) -> bool:
        vec = dict(pairs[idx][0])
        for pcol, prow in elim:
            if pcol in vec:
                vec = v_sub(vec, v_scale(prow, vec[pcol]))
        vec = v_clean(vec)
        if v_is_zero(vec):
            return False
        pivot = min(vec)
        elim.append((pivot, v_scale(vec, vec[pivot].inv())))
        chosen.append(idx)
        return True

    frontier = list(range(len(pairs)))
    for idx in frontier:
        try_add(idx)
    while len(chosen) < m.dim:
        if not frontier:
            raise ModuleConstructionError(
                "pins do not generate the module under the E/F action")
        nxt: List[int] = []
        for idx in frontier:
            src, dst = pairs[idx]
            for act, img in gens:
                s2 = v_clean(act.apply(src))
                if v_is_zero(s2):
                    continue
                pairs.append((s2, v_clean(img.apply(dst))))
                if try_add(len(pairs) - 1):
                    nxt.append(len(pairs) - 1)
        if not nxt and len(chosen) < m.dim:
            raise ModuleConstructionError(
                "pins do not generate the module under the E/F action")
        frontier = nxt

    srcs = [v_bar(pairs[k][0]) if spec.bar_linear else pairs[k][0]
            for k in chosen]
    basis = SparseMatrix.from_columns(srcs, m.dim)
    coeff = inverse(basis)
    targets = SparseMatrix.from_columns([pairs[k][1] for k in chosen], m.dim)
    a = targets @ coeff

    tmap = TransportedMap(m, a, spec.bar_linear, spec.name)
    for k, (src, dst) in enumerate(pairs):
        if not v_eq(tmap.apply(src), dst):
            raise InternalConsistencyError(
                f"transport of {spec.name} is inconsistent on propagated "
                f"pair {k}")
    failures = verify_compatibility(tmap, spec)
    if failures:
        raise InternalConsistencyError(
            f"transport of {spec.name} violates compatibility: "
            + "; ".join(failures[:3]))
    return tmap


# ---------------------------------------------------------------------------
# The named maps
# ---------------------------------------------------------------------------

def _rho_pairing(cd: CartanDatum, wt: Sequence) -> Fraction:
    rho = tuple(1 for _ in range(cd.n))
    return cd.bilinear(wt, rho)


def make_theta(m: Module,
               pins: Optional[Sequence[Tuple[Vec, Vec]]] = None
               ) -> TransportedMap:
    """Theta: bar-linear, pinned on each component's highest weight vector
    by the eigenvalue q^(-(nu,nu)/2 + (nu,rho))."""
    if pins is None:
        hw = m.hw_vector()
        lam = m.weights[m.hw_index]
        exp = -m.cartan.bilinear(lam, lam) / 2 + _rho_pairing(m.cartan, lam)
        pins = [(hw, v_scale(hw, FieldElement.q_power(exp)))]
    tmap = transport(m, theta_spec(),
                     [s for s, _ in pins], [t for _, t in pins])
    tmap.provenance = "theta"
    return tmap


def theta_pin_target(m: Module, hw_vec: Vec) -> Vec:
    """The pinned Theta image of a component highest weight vector."""
    nu = m.weights[next(iter(hw_vec))]
    exp = -m.cartan.bilinear(nu, nu) / 2 + _rho_pairing(m.cartan, nu)
    return v_scale(hw_vec, FieldElement.q_power(exp))


def make_J(m: Module) -> TransportedMap:
    """J: q-linear, diagonal q^((mu,mu)/2 + (mu,rho)) on the mu weight
    space; verified against the C_J compatibility square."""
    rows = {}
    for idx, wt in enumerate(m.weights):
        exp = m.cartan.bilinear(wt, wt) / 2 + _rho_pairing(m.cartan, wt)
        rows[idx] = {idx: FieldElement.q_power(exp)}
    tmap = TransportedMap(m, SparseMatrix(m.dim, m.dim, rows), False, "J")
    failures = verify_compatibility(tmap, j_spec())
    if failures:
        raise InternalConsistencyError(
            "weight-diagonal J violates C_J compatibility: "
            + "; ".join(failures[:3]))
    return tmap


def k_2rho(m: Module) -> TransportedMap:
    """Multiplication by K_{2 H_rho}: diagonal q^(2 (rho, mu))."""
    rows = {}
    for idx, wt in enumerate(m.weights):
        rows[idx] = {idx: FieldElement.q_power(2 * _rho_pairing(m.cartan, wt))}
    return TransportedMap(m, SparseMatrix(m.dim, m.dim, rows), False, "K_2rho")


def make_bar(m: Module, hw_vec: Optional[Vec] = None) -> TransportedMap:
    """The bar involution of an irreducible module, fixing the pin."""
    pin = v_clean(dict(hw_vec)) if hw_vec is not None else m.hw_vector()
    tmap = transport(m, bar_spec(), pin, pin)
    tmap.provenance = "bar"
    return tmap


def make_gamma(m: Module, gb: GlobalBasis) -> TransportedMap:
    """Gamma: bar-linear, pinned by hw |-> lowest global basis element."""
    if gb.module is not m:
        raise ValueError("global basis belongs to a different module")
    tmap = transport(m, gamma_spec(), gb.hw_vec,
                     gb.elements[gb.low_vertex])
    tmap.provenance = "gamma"
    return tmap


# ---------------------------------------------------------------------------
# Braid operators
# ---------------------------------------------------------------------------

BRAID_VARIANTS = ("A+1", "A-1", "B+1", "B-1")
_braid_variant_cache: Dict[tuple, str] = {}


def _braid_coefficient(variant: str, d: int, mstr: int, n: int
                       ) -> FieldElement:
    e = 1 if variant.endswith("+1") else -1
    if variant[0] == "A":
        sign = -1 if (mstr - n) % 2 else 1
        return FieldElement.q_power(Fraction(e * d * (mstr - n) * (n + 1)),
                                    sign)
    sign = -1 if n % 2 else 1
    return FieldElement.q_power(Fraction(e * d * n * (mstr - n + 1)), sign)


def braid_operator(m: Module, i: int, variant: Optional[str] = None
                   ) -> SparseMatrix:
    """T_i: reverses every i-string with signed q_i-power coefficients.

    On a string [u_0, .., u_mstr] of divided powers, u_n maps to
    c_n u_(mstr-n); the four variants differ in the sign pattern and the
    sign of the exponent.  With no variant given, the one calibrated
    against C_{T_w0} for this Cartan datum is used.
    """
    if variant is None:
        variant = calibrate_braid_variant(m.cartan)
    if variant not in BRAID_VARIANTS:
        raise ValueError(f"unknown braid variant {variant!r}")
    cache = getattr(m, "_braid_cache", None)
    if cache is None:
        cache = {}
        m._braid_cache = cache
    key = (i, variant)
    if key in cache:
        return cache[key]
    d = m.cartan.d[i]

    def image(chain, n):
        mstr = len(chain) - 1
        return v_scale(chain[mstr - n],
                       _braid_coefficient(variant, d, mstr, n))

    out = operator_from_strings(m, i, image)
    cache[key] = out
    return out


def _braid_order(cd: CartanDatum, i: int, j: int) -> int:
    return {0: 2, 1: 3, 2: 4, 3: 6}[cd.A[i][j] * cd.A[j][i]]


def braid_relations_hold(m: Module, variant: str) -> bool:
    for i in range(m.cartan.n):
        for j in range(i + 1, m.cartan.n):
            k = _braid_order(m.cartan, i, j)
            ti, tj = braid_operator(m, i, variant), braid_operator(m, j, variant)
            lhs = SparseMatrix.identity(m.dim)
            rhs = SparseMatrix.identity(m.dim)
            for t in range(k):
                lhs = lhs @ (ti if t % 2 == 0 else tj)
                rhs = rhs @ (tj if t % 2 == 0 else ti)
            if lhs != rhs:
                return False
    return True


def _braid_product(m: Module, variant: str) -> SparseMatrix:
    out = SparseMatrix.identity(m.dim)
    for i in m.cartan.w0_word:
        out = out @ braid_operator(m, i, variant)
    return out


def calibrate_braid_variant(cd: CartanDatum) -> str:
    """The variant whose w0-product is compatible with C_{T_w0}.

    Probed on V_{omega_1}; the product must satisfy the full compatibility
    square and send the lowest global basis element to the highest one on
    the nose.  Exactly one variant qualifies; the winner is cached per
    Cartan datum.
    """
    key = tuple(tuple(row) for row in cd.A) + (tuple(cd.d),)
    if key in _braid_variant_cache:
        return _braid_variant_cache[key]
    from .bases import compute_global_basis
    probe = make_irreducible(cd, tuple(1 if k == 0 else 0
                                       for k in range(cd.n)))
    gb = compute_global_basis(probe)
    spec = tw0_spec()
    winners = []
    for variant in BRAID_VARIANTS:
        if not braid_relations_hold(probe, variant):
            continue
        tmap = TransportedMap(probe, _braid_product(probe, variant), False,
                              f"braid-{variant}")
        if verify_compatibility(tmap, spec):
            continue
        if not v_eq(tmap.apply(gb.elements[gb.low_vertex]), gb.hw_vec):
            continue
        winners.append(variant)
    if len(winners) != 1:
        raise InternalConsistencyError(
            f"braid calibration found {len(winners)} usable variants "
            f"{winners}; expected exactly one")
    _braid_variant_cache[key] = winners[0]
    return winners[0]


def make_Tw0(m: Module, method: str = "braid-product",
             gb: Optional[GlobalBasis] = None,
             pins: Optional[Sequence[Tuple[Vec, Vec]]] = None
             ) -> TransportedMap:
    """T_w0: q-linear, sends the lowest global basis element to the highest.

    braid-product composes the calibrated T_i along the reduced word of w0
    (intrinsic: works on any integrable module, tensor products included);
    when a global basis is available the product is rescaled per component
    onto the pin, which for the calibrated variant is a verified no-op.
    transport pins C_{T_w0} at the lowest global basis element directly.
    """
    spec = tw0_spec()
    if method == "transport":
        if pins is None:
            if gb is None:
                raise ValueError("transport method wants a global basis")
            pins = [(gb.elements[gb.low_vertex], gb.hw_vec)]
        tmap = transport(m, spec, [s for s, _ in pins], [t for _, t in pins])
        tmap.provenance = "tw0-transport"
        return tmap
    if method != "braid-product":
        raise ValueError(f"unknown T_w0 method {method!r}")
    variant = calibrate_braid_variant(m.cartan)
    mat = _braid_product(m, variant)
    if gb is not None:
        got = v_clean(mat.apply(gb.elements[gb.low_vertex]))
        want = gb.hw_vec
        ratio = None
        for r, x in want.items():
            if r not in got:
                raise InternalConsistencyError(
                    "braid product misses the T_w0 pin support")
            ratio = got[r] / x
            break
        if not v_eq(got, v_scale(want, ratio)):
            raise InternalConsistencyError(
                "braid product does not map the lowest global basis element "
                "onto the highest one")
        if not (ratio - ONE).is_zero():
            mat = mat.scale(ratio.inv())
    tmap = TransportedMap(m, mat, False, "tw0-braid")
    failures = verify_compatibility(tmap, spec)
    if failures:
        raise InternalConsistencyError(
            "braid-product T_w0 violates compatibility: "
            + "; ".join(failures[:3]))
    return tmap
