"""R-matrices three ways, tensor pinning, commutors, and the checkers."""

import json
import os
from fractions import Fraction

import pytest

from qrmat.cartan import make_cartan
from qrmat.linalg import SparseMatrix, inverse, v_clean, v_eq
from qrmat.qscalar import ONE, FieldElement
from qrmat.rmatrix import (RMatrixResult, based_irreducible,
                           based_tensor, braiding, build_commutor,
                           check_double_braiding, check_gamma_lemma,
                           check_hexagon, check_lemma_identities,
                           check_method_agreement, check_normalization,
                           check_scaling, check_ybe, flip_matrix,
                           gamma_system, identity_system, kron_matrix,
                           r_krls, r_matrix, r_oracle, r_theta,
                           scale_isotypic_block, theta_system,
                           _solve_sparse_unique)
from qrmat.sysmorph import make_J, make_Tw0
from qrmat.uqmod import (InternalConsistencyError, kron_vec,
                         make_irreducible, tensor)

A1 = make_cartan("A1")
A2 = make_cartan("A2")
B2 = make_cartan("B2")

CARTANS = {"A1": A1, "A2": A2, "B2": B2}
GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")

_memo = {}


def based_of(label, hw):
    key = (label, hw)
    if key not in _memo:
        _memo[key] = based_irreducible(make_irreducible(CARTANS[label], hw))
    return _memo[key]


def qp(e, c=1):
    return FieldElement.q_power(Fraction(e), c)


def canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def golden_bytes(name):
    with open(os.path.join(GOLDEN_DIR, name)) as f:
        return f.read()


# -- tensor pinning -----------------------------------------------------------


def test_a1_square_top_pin_is_hw_tensor_hw():
    bt = based_tensor(based_of("A1", (1,)), based_of("A1", (1,)))
    by_nu = {c.nu: c for c in bt.components}
    assert set(by_nu) == {(2,), (0,)}
    assert by_nu[(2,)].hw_vec == {0: ONE}


def test_a1_square_zero_weight_pin_ratio_is_minus_qinv():
    bt = based_tensor(based_of("A1", (1,)), based_of("A1", (1,)))
    pin = next(c.hw_vec for c in bt.components if c.nu == (0,))
    assert set(pin) == {1, 2}
    assert pin[2] / pin[1] == qp(-1, -1)


def test_a1_square_pins_match_golden():
    bt = based_tensor(based_of("A1", (1,)), based_of("A1", (1,)))
    pins = {}
    for c in bt.components:
        key = ",".join(str(x) for x in c.nu)
        pins[key] = [[t, c.hw_vec[t].to_json_obj()] for t in sorted(c.hw_vec)]
    assert canonical(pins) == golden_bytes("a1_omega_omega_pins.json")


def test_a2_fundamental_square_has_two_pins():
    bt = based_tensor(based_of("A2", (1, 0)), based_of("A2", (1, 0)))
    assert sorted(c.nu for c in bt.components) == [(0, 1), (2, 0)]


def test_pins_are_highest_weight_and_embeddings_intertwine():
    bt = based_tensor(based_of("B2", (1, 0)), based_of("B2", (0, 1)))
    assert sorted(c.nu for c in bt.components) == [(0, 1), (1, 1)]
    for c in bt.components:
        for i in range(bt.module.cartan.n):
            assert v_clean(bt.module.E[i].apply(c.hw_vec)) == {}
        phi = c.embed
        assert phi.column(0) == c.hw_vec


def test_based_tensor_is_cached_per_factor_pair():
    bl, br = based_of("A1", (1,)), based_of("A1", (2,))
    assert based_tensor(bl, br) is based_tensor(bl, br)


# -- the three constructions --------------------------------------------------


def test_r_oracle_a1_square_matches_golden():
    ro = r_oracle(based_of("A1", (1,)), based_of("A1", (1,)))
    assert ro.serialize() + "\n" == golden_bytes("a1_omega_omega_r.json")


def test_r_a1_square_diagonal_and_single_off_diagonal():
    ro = r_oracle(based_of("A1", (1,)), based_of("A1", (1,)))
    entries = {(r, c): x for r, c, x in ro.matrix.to_triplets()}
    assert entries[(0, 0)] == qp("1/2")
    assert entries[(1, 1)] == qp("-1/2")
    assert entries[(2, 2)] == qp("-1/2")
    assert entries[(3, 3)] == qp("1/2")
    off = {k: v for k, v in entries.items() if k[0] != k[1]}
    assert off == {(1, 2): qp("1/2") - qp("-3/2")}


@pytest.mark.parametrize("label,lam,mu", [
    ("A1", (1,), (1,)),
    ("A1", (1,), (2,)),
    ("A1", (2,), (1,)),
    ("A1", (3,), (2,)),
    ("A2", (1, 0), (0, 1)),
    ("B2", (0, 1), (0, 1)),
])
def test_three_methods_agree_entrywise(label, lam, mu):
    bl, br = based_of(label, lam), based_of(label, mu)
    rt = r_theta(bl, br)
    assert rt.matrix == r_krls(bl, br).matrix
    assert rt.matrix == r_oracle(bl, br).matrix


def test_r_matrix_dispatch_and_unknown_method():
    bl = based_of("A1", (1,))
    assert r_matrix(bl, bl, "oracle").method == "oracle"
    with pytest.raises(ValueError):
        r_matrix(bl, bl, "pbw")


def test_result_rejects_weight_grading_violation():
    bl = based_of("A1", (1,))
    bad = SparseMatrix.identity(4).add(
        SparseMatrix(4, 4, {0: {1: ONE}}))
    with pytest.raises(InternalConsistencyError):
        RMatrixResult(bad, "theta", bl, bl)


def test_serialization_is_deterministic_across_rebuilds():
    bl, br = based_of("A1", (1,)), based_of("A1", (2,))
    base = r_theta(bl, br).serialize()
    fresh = r_theta(based_irreducible(make_irreducible(A1, (1,))),
                    based_irreducible(make_irreducible(A1, (2,)))).serialize()
    assert fresh == base


# -- normalization and the krls pieces ----------------------------------------


def test_krls_prefactor_exponent_on_a1_is_half():
    assert A1.bilinear((1,), (1,)) == Fraction(1, 2)
    ro = r_krls(based_of("A1", (1,)), based_of("A1", (1,)))
    assert ro.matrix.rows[0][0] == qp("1/2")


@pytest.mark.parametrize("label,lam,mu", [
    ("A1", (1,), (1,)),
    ("A1", (2,), (1,)),
    ("A2", (1, 0), (0, 1)),
])
def test_r_scales_hw_tensor_basis_rows(label, lam, mu):
    bl, br = based_of(label, lam), based_of(label, mu)
    rep = check_normalization(bl, br)
    assert rep.passed, rep.counterexamples


def test_normalization_wants_irreducible_left_factor():
    bt = based_tensor(based_of("A1", (1,)), based_of("A1", (1,)))
    with pytest.raises(ValueError):
        check_normalization(bt, based_of("A1", (1,)))


def test_braid_product_conjugate_fixes_hw_tensor_every_basis_vector():
    # the pin-free product (T^-1 (x) T^-1) Delta(T) alone, no prefactor
    bl, br = based_of("A1", (2,)), based_of("A1", (1,))
    big = tensor(bl.module, br.module)
    prod = kron_matrix(inverse(make_Tw0(bl.module).matrix),
                       inverse(make_Tw0(br.module).matrix)) \
        @ make_Tw0(big).matrix
    hw = bl.components[0].hw_vec
    for b in range(br.module.dim):
        x = kron_vec(hw, {b: ONE}, br.module.dim)
        assert v_eq(v_clean(prod.apply(x)), x)


def test_jtw0_conjugate_equals_r_theta():
    # X = J T_w0 is pin-free; (X^-1 (x) X^-1) Delta(X) is the same R
    bl, br = based_of("A2", (1, 0)), based_of("A2", (0, 1))
    big = tensor(bl.module, br.module)

    def x_of(m):
        return make_J(m).compose(make_Tw0(m))

    mat = kron_matrix(x_of(bl.module).inverse().matrix,
                      x_of(br.module).inverse().matrix) @ x_of(big).matrix
    assert mat == r_theta(bl, br).matrix


# -- commutors ----------------------------------------------------------------


def test_theta_commutor_is_flip_after_r_theta():
    bl, br = based_of("A1", (1,)), based_of("A1", (2,))
    c = build_commutor(theta_system(), bl, br)
    assert c.flipped
    want = flip_matrix(bl.module.dim, br.module.dim) @ r_theta(bl, br).matrix
    assert c.matrix == want
    assert c.matrix == braiding(bl, br).matrix


def test_gamma_commutor_is_the_identity_endomorphism():
    bl, br = based_of("A1", (1,)), based_of("A1", (2,))
    c = build_commutor(gamma_system(), bl, br)
    assert not c.flipped
    assert c.matrix == SparseMatrix.identity(bl.module.dim * br.module.dim)


def test_identity_system_flip_fails_to_intertwine():
    with pytest.raises(InternalConsistencyError):
        build_commutor(identity_system(), based_of("A1", (1,)),
                       based_of("A1", (2,)))


# -- checkers: pass cases -----------------------------------------------------


@pytest.mark.parametrize("triple", [
    (("A1", (1,)), ("A1", (1,)), ("A1", (1,))),
    (("A1", (1,)), ("A1", (2,)), ("A1", (1,))),
    (("A2", (1, 0)), ("A2", (1, 0)), ("A2", (0, 1))),
])
def test_hexagon_both_equalities(triple):
    bu, bv, bw = (based_of(*t) for t in triple)
    rep = check_hexagon(bu, bv, bw)
    assert rep.passed, rep.counterexamples


def test_tensor_bracketings_share_action_matrices():
    u = based_of("A1", (1,)).module
    v = based_of("A1", (2,)).module
    left = tensor(tensor(u, v), u)
    right = tensor(u, tensor(v, u))
    for i in range(u.cartan.n):
        assert left.E[i] == right.E[i]
        assert left.F[i] == right.F[i]
    assert left.weights == right.weights


@pytest.mark.parametrize("label,hw", [
    ("A1", (1,)), ("A1", (2,)), ("A2", (1, 0)), ("B2", (0, 1))])
def test_ybe_braid_relation(label, hw):
    rep = check_ybe(based_of(label, hw))
    assert rep.passed, rep.counterexamples


def test_ybe_compares_all_64_entries_on_a1_fundamental():
    s = braiding(based_of("A1", (1,)), based_of("A1", (1,))).matrix
    cube = kron_matrix(s, SparseMatrix.identity(2))
    assert cube.nrows == cube.ncols == 8


@pytest.mark.parametrize("label,lam,mu", [
    ("A1", (1,), (2,)),
    ("A2", (1, 0), (0, 1)),
    ("B2", (1, 0), (0, 1)),
])
def test_gamma_lemma_on_pairs(label, lam, mu):
    rep = check_gamma_lemma(based_of(label, lam), based_of(label, mu))
    assert rep.passed, rep.counterexamples


@pytest.mark.parametrize("label,hw", [
    ("A1", (2,)), ("A2", (1, 1)), ("B2", (1, 0))])
def test_lemma_identities_on_irreducibles(label, hw):
    rep = check_lemma_identities(based_of(label, hw))
    assert rep.passed, rep.counterexamples


def test_lemma_identities_on_a_tensor_module():
    bt = based_tensor(based_of("A1", (1,)), based_of("A1", (2,)))
    rep = check_lemma_identities(bt)
    assert rep.passed, rep.counterexamples


def test_tensor_tw0_transport_from_tensor_pins_matches_braid_product():
    bt = based_tensor(based_of("A1", (1,)), based_of("A1", (2,)))
    pins = [(c.lowest_element(), c.hw_vec) for c in bt.components]
    transported = make_Tw0(bt.module, "transport", pins=pins)
    assert transported.matrix == make_Tw0(bt.module).matrix


def test_method_agreement_with_rescaled_pins():
    rep = check_method_agreement(based_of("A1", (1,)), based_of("A1", (1,)))
    assert rep.passed, rep.counterexamples


def test_scaling_independence_per_side():
    rep = check_scaling(based_of("A1", (1,)), based_of("A1", (2,)))
    assert rep.passed, rep.counterexamples


def test_double_braiding_scalars_match_golden():
    rep, scalars = check_double_braiding(based_of("A1", (1,)),
                                         based_of("A1", (1,)))
    assert rep.passed, rep.counterexamples
    assert canonical(scalars) == golden_bytes(
        "a1_omega_omega_double_braiding.json")


def test_double_braiding_scalar_values_a1_square():
    _, scalars = check_double_braiding(based_of("A1", (1,)),
                                       based_of("A1", (1,)))
    by_nu = {tuple(s["component"]): FieldElement.from_json_obj(s["scalar"])
             for s in scalars}
    assert by_nu[(2,)] == qp(1)
    assert by_nu[(0,)] == qp(-3)


# -- checkers: negative controls ----------------------------------------------


def test_wrong_theta_exponent_sign_breaks_agreement():
    rep = check_method_agreement(based_of("A1", (1,)), based_of("A1", (2,)),
                                 wrong_sign=True)
    assert not rep.passed
    ce = rep.counterexamples[0]
    assert ce["check"] == "theta vs krls"
    assert ce["lhs"] != ce["rhs"]


def test_scaled_isotypic_block_breaks_hexagon():
    rep = check_hexagon(based_of("A1", (1,)), based_of("A1", (2,)),
                        based_of("A1", (1,)), perturb="scale-block")
    assert not rep.passed
    assert rep.counterexamples


def test_unknown_perturbation_rejected():
    with pytest.raises(ValueError):
        check_hexagon(based_of("A1", (1,)), based_of("A1", (1,)),
                      based_of("A1", (1,)), perturb="typo")


def test_wrong_flip_side_fails_module_map_half_of_ybe():
    rep = check_ybe(based_of("A1", (1,)), wrong_flip=True)
    assert not rep.passed
    assert rep.counterexamples[0]["check"].startswith("sigma module map")


def test_scale_isotypic_block_changes_exactly_one_block():
    bl, br = based_of("A1", (1,)), based_of("A1", (1,))
    big = tensor(bl.module, br.module)
    r = r_theta(bl, br).matrix
    twisted = scale_isotypic_block(r, big, 0, qp(1))
    assert twisted != r
    assert scale_isotypic_block(twisted, big, 0, qp(-1)) == r


# -- the oracle's solver ------------------------------------------------------


def test_sparse_solver_unique_point():
    rows = [({0: ONE, 1: ONE}, qp(1)), ({1: ONE}, qp(2)),
            ({0: ONE, 1: ONE}, qp(1))]
    x = _solve_sparse_unique(rows, 2)
    assert x[1] == qp(2)
    assert x[0] == qp(1) - qp(2)


def test_sparse_solver_rejects_inconsistent_system():
    rows = [({0: ONE}, ONE), ({0: ONE}, qp(1))]
    with pytest.raises(InternalConsistencyError):
        _solve_sparse_unique(rows, 1)


def test_sparse_solver_rejects_underdetermined_system():
    with pytest.raises(InternalConsistencyError):
        _solve_sparse_unique([({0: ONE, 1: ONE}, ONE)], 2)


def test_sparse_solver_rejects_zero_rhs_mismatch():
    rows = [({0: ONE}, ONE), ({}, qp(1))]
    with pytest.raises(InternalConsistencyError):
        _solve_sparse_unique(rows, 1)
