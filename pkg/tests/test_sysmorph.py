"""Transported morphisms: bar, theta, gamma, J, T_w0, braid operators."""

from fractions import Fraction

import pytest

from qrmat.bases import compute_global_basis
from qrmat.cartan import make_cartan
from qrmat.linalg import SparseMatrix, v_eq, v_scale
from qrmat.qscalar import ONE, FieldElement
from qrmat.sysmorph import (TransportedMap, braid_operator,
                            braid_relations_hold, calibrate_braid_variant,
                            identity_spec, j_spec, k_2rho,
                            make_J, make_Tw0, make_bar, make_gamma,
                            make_theta, theta_pin_target, theta_spec,
                            transport, tw0_spec, verify_compatibility)
from qrmat.uqmod import (InternalConsistencyError,
                         ModuleConstructionError, make_irreducible, tensor)

A1 = make_cartan("A1")
A2 = make_cartan("A2")
B2 = make_cartan("B2")

CARTANS = {"A1": A1, "A2": A2, "B2": B2}
ACCEPTANCE_MODULES = [
    ("A1", (1,)), ("A1", (2,)), ("A1", (3,)),
    ("A2", (1, 0)), ("A2", (0, 1)), ("A2", (1, 1)),
    ("B2", (1, 0)), ("B2", (0, 1)),
]

_memo = {}


def module_of(label, hw):
    key = (label, hw)
    if key not in _memo:
        _memo[key] = make_irreducible(CARTANS[label], hw)
    return _memo[key]


def gb_of(label, hw):
    return compute_global_basis(module_of(label, hw))


def qp(e, c=1):
    return FieldElement.q_power(Fraction(e), c)


def rho(cd):
    return tuple(1 for _ in range(cd.n))


# -- explicit values on the smallest module ----------------------------------


def test_theta_on_a1_fundamental_global_basis():
    gb = gb_of("A1", (1,))
    theta = make_theta(gb.module)
    assert v_eq(theta.apply(gb.elements[0]), v_scale(gb.elements[0], qp("1/4")))
    assert v_eq(theta.apply(gb.elements[1]), v_scale(gb.elements[1], qp("-3/4")))


def test_j_on_a1_fundamental_is_q34_qm14():
    m = module_of("A1", (1,))
    assert make_J(m).matrix.to_triplets() == [
        (0, 0, qp("3/4")), (1, 1, qp("-1/4"))]


def test_k2rho_on_a1_fundamental_is_q_qinv():
    m = module_of("A1", (1,))
    assert k_2rho(m).matrix.to_triplets() == [(0, 0, qp(1)), (1, 1, qp(-1))]


def test_gamma_swaps_extreme_global_basis_elements_a1():
    gb = gb_of("A1", (1,))
    gamma = make_gamma(gb.module, gb)
    assert v_eq(gamma.apply(gb.elements[0]), gb.elements[1])


def test_tw0_sends_lowest_to_highest_with_unit_coefficient():
    for label, hw in ACCEPTANCE_MODULES:
        gb = gb_of(label, hw)
        tw0 = make_Tw0(gb.module, "braid-product")
        assert v_eq(tw0.apply(gb.elements[gb.low_vertex]), gb.hw_vec), (label, hw)


# -- the identity chain relating gamma, theta, bar, J, T_w0 ------------------


@pytest.mark.parametrize("label,hw", ACCEPTANCE_MODULES)
def test_gamma_equals_bar_after_inverse_tw0(label, hw):
    gb = gb_of(label, hw)
    m = gb.module
    gamma = make_gamma(m, gb)
    assert gamma == make_bar(m).compose(make_Tw0(m, "braid-product").inverse())


@pytest.mark.parametrize("label,hw", ACCEPTANCE_MODULES)
def test_theta_equals_k2rho_bar_j(label, hw):
    m = module_of(label, hw)
    assert make_theta(m) == k_2rho(m).compose(make_bar(m).compose(make_J(m)))


@pytest.mark.parametrize("label,hw", ACCEPTANCE_MODULES)
def test_j_diagonal_matches_transported_j(label, hw):
    m = module_of(label, hw)
    direct = make_J(m)
    via_pin = transport(m, j_spec(), m.hw_vector(),
                        direct.apply(m.hw_vector()))
    assert direct == via_pin


@pytest.mark.parametrize("label,hw", ACCEPTANCE_MODULES)
def test_theta_is_diagonal_on_the_global_basis(label, hw):
    gb = gb_of(label, hw)
    m = gb.module
    theta = make_theta(m)
    for b in gb.elements:
        mu = m.weights[next(iter(b))]
        e = -m.cartan.bilinear(mu, mu) / 2 + m.cartan.bilinear(mu, rho(m.cartan))
        assert v_eq(theta.apply(b), v_scale(b, qp(e)))


@pytest.mark.parametrize("label,hw", ACCEPTANCE_MODULES)
def test_gamma_inverse_theta_equals_j_tw0(label, hw):
    gb = gb_of(label, hw)
    m = gb.module
    lhs = make_gamma(m, gb).inverse().compose(make_theta(m))
    rhs = make_J(m).compose(make_Tw0(m, "braid-product"))
    assert lhs == rhs


@pytest.mark.parametrize("label,hw", ACCEPTANCE_MODULES)
def test_theta_is_an_involution(label, hw):
    theta = make_theta(module_of(label, hw))
    assert theta.compose(theta).is_identity()


def test_bar_fixes_the_standard_basis_of_irreducibles():
    # the construction basis comes from F-words with bar-fixed structure
    # constants, so the module bar is exactly coefficient-wise bar
    for label, hw in [("A1", (3,)), ("A2", (1, 1)), ("B2", (1, 0))]:
        b = make_bar(module_of(label, hw))
        assert b.bar_linear and b.matrix.is_identity()


def test_gamma_composed_with_inverse_is_identity():
    gb = gb_of("A2", (1, 1))
    gamma = make_gamma(gb.module, gb)
    assert gamma.inverse().compose(gamma).is_identity()
    assert gamma.compose(gamma.inverse()).is_identity()


# -- braid operators ----------------------------------------------------------


def test_braid_variant_families_on_a1_fundamental():
    m = module_of("A1", (1,))
    t = braid_operator(m, 0, "A+1")
    assert t.column(0) == {1: qp(1, -1)}
    assert t.column(1) == {0: ONE}
    t = braid_operator(m, 0, "B+1")
    assert t.column(0) == {1: ONE}
    assert t.column(1) == {0: qp(1, -1)}
    t = braid_operator(m, 0, "A-1")
    assert t.column(0) == {1: qp(-1, -1)}


def test_braid_calibration_selects_one_variant():
    for label in ("A1", "A2", "B2"):
        assert calibrate_braid_variant(CARTANS[label]) == "A+1"


def test_braid_relations_on_rank_two_types():
    assert braid_relations_hold(module_of("A2", (1, 1)), "A+1")
    assert braid_relations_hold(module_of("B2", (1, 0)), "A+1")


def test_braid_operator_maps_weight_spaces_by_simple_reflection():
    m = module_of("B2", (0, 1))
    for i in range(m.cartan.n):
        t = braid_operator(m, i)
        for col in range(m.dim):
            target = m.cartan.reflect(i, m.weights[col])
            for r in t.column(col):
                assert m.weights[r] == target


@pytest.mark.parametrize("label,hw", [("A1", (2,)), ("A2", (1, 1)),
                                      ("B2", (0, 1))])
def test_braid_product_tw0_equals_transported_tw0(label, hw):
    gb = gb_of(label, hw)
    m = gb.module
    assert make_Tw0(m, "braid-product") == make_Tw0(m, "transport", gb=gb)


def test_tw0_braid_product_works_on_tensor_modules():
    tm = tensor(module_of("A2", (1, 0)), module_of("A2", (0, 1)))
    tw0 = make_Tw0(tm, "braid-product")
    assert verify_compatibility(tw0, tw0_spec()) == []
    # weight spaces land on the w0-reflected weight
    for col in range(tm.dim):
        target = tm.cartan.apply_w0(tm.weights[col])
        for r in tw0.matrix.column(col):
            assert tm.weights[r] == target


def test_unknown_braid_variant_rejected():
    with pytest.raises(ValueError):
        braid_operator(module_of("A1", (1,)), 0, "C+1")
    with pytest.raises(ValueError):
        make_Tw0(module_of("A1", (1,)), "guess")


# -- transport mechanics -------------------------------------------------------


def test_transport_of_identity_spec_is_identity():
    m = module_of("A2", (1, 1))
    t = transport(m, identity_spec(), m.hw_vector(), m.hw_vector())
    assert t.is_identity()


def test_transport_rejects_pins_that_do_not_generate():
    tm = tensor(module_of("A1", (1,)), module_of("A1", (1,)))
    pin = {0: ONE}  # highest vector of the three dimensional component
    with pytest.raises(ModuleConstructionError):
        transport(tm, identity_spec(), pin, pin)


def test_transport_rejects_zero_pin():
    m = module_of("A1", (1,))
    with pytest.raises(ModuleConstructionError):
        transport(m, identity_spec(), {}, {})


def test_transport_detects_impossible_pin_target():
    # theta fixes weights, so pinning hw onto a different weight vector
    # cannot commute with the K action
    m = module_of("A1", (2,))
    with pytest.raises(InternalConsistencyError):
        transport(m, theta_spec(), m.hw_vector(), {1: ONE})


def test_compose_tracks_bar_linearity():
    m = module_of("A1", (2,))
    theta = make_theta(m)
    J = make_J(m)
    assert theta.compose(theta).bar_linear is False
    assert theta.compose(J).bar_linear is True
    assert J.compose(J).bar_linear is False
    v = {2: qp(3)}
    assert v_eq(theta.compose(J).apply(v), theta.apply(J.apply(v)))
    assert v_eq(J.compose(theta).apply(v), J.apply(theta.apply(v)))


def test_bar_linear_inverse_inverts_pointwise():
    gb = gb_of("A2", (1, 0))
    gamma = make_gamma(gb.module, gb)
    v = {0: qp(2), 2: ONE + qp(1)}
    assert v_eq(gamma.inverse().apply(gamma.apply(v)), v)


# -- compatibility verification and its limits --------------------------------


def test_verify_compatibility_flags_tampered_weight_space():
    m = module_of("A1", (2,))
    tw0 = make_Tw0(m, "braid-product")
    rows = {r: {} for r in range(m.dim)}
    for r, c, x in tw0.matrix.to_triplets():
        rows[r][c] = x
    rows.setdefault(1, {})[1] = rows.get(1, {}).get(1, ONE - ONE) + qp(1)
    tampered = TransportedMap(m, SparseMatrix(m.dim, m.dim, rows), False)
    assert verify_compatibility(tampered, tw0_spec()) != []


def test_scaled_pin_commutes_with_the_action_but_shifts_eigenvalues():
    # scaling the pin composes theta with a module endomorphism, so the
    # compatibility square still commutes and cannot flag it; the global
    # basis eigenvalue row is what detects it
    gb = gb_of("A1", (2,))
    m = gb.module
    q = qp(1)
    scaled = make_theta(m, pins=[(m.hw_vector(),
                                  v_scale(theta_pin_target(m, m.hw_vector()),
                                          q))])
    assert verify_compatibility(scaled, theta_spec()) == []
    assert scaled.compose(scaled).is_identity()  # q bar(q) = 1
    honest = make_theta(m)
    assert scaled != honest
    b = gb.elements[1]
    mu = m.weights[next(iter(b))]
    e = -m.cartan.bilinear(mu, mu) / 2 + m.cartan.bilinear(mu, rho(m.cartan))
    assert not v_eq(scaled.apply(b), v_scale(b, qp(e)))
    assert v_eq(scaled.apply(b), v_scale(b, qp(e + 1)))


def test_non_monomial_pin_scaling_breaks_the_involution():
    m = module_of("A1", (2,))
    z = ONE + qp(1)
    scaled = make_theta(m, pins=[(m.hw_vector(),
                                  v_scale(theta_pin_target(m, m.hw_vector()),
                                          z))])
    assert verify_compatibility(scaled, theta_spec()) == []
    assert not scaled.compose(scaled).is_identity()  # z bar(z) != 1


def test_theta_pin_covariance():
    # pin target scaled by z rescales the whole map by z
    m = module_of("A2", (1, 1))
    honest = make_theta(m)
    for z in (qp(1), ONE + qp(1), FieldElement.from_int(2) - qp(-1)):
        scaled = make_theta(m, pins=[
            (m.hw_vector(),
             v_scale(theta_pin_target(m, m.hw_vector()), z))])
        assert scaled.matrix == honest.matrix.scale(z)


def test_transported_map_serialization_roundtrip():
    m = module_of("A1", (1,))
    theta = make_theta(m)
    obj = theta.to_json_obj()
    assert obj["bar_linear"] is True
    assert obj["dim"] == 2
    rows = {}
    for r, c, x in obj["entries"]:
        rows.setdefault(r, {})[c] = FieldElement.from_json_obj(x)
    assert SparseMatrix(2, 2, rows) == theta.matrix
