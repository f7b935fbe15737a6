import numpy as np
import pytest

import oracle
from rdlkit.measures import join
from rdlkit.model import AuxChannel, JointPmf3, RdlPoint, bsc, dsbs, random_channel, random_model
from rdlkit.regions_discrete import (
    CardinalityError,
    MarkovPreconditionError,
    ReconstructionError,
    SettingId,
    cas_D_corner,
    feasibility_check_D14,
    induced_reconstruction_channel,
    logloss_quantities,
    one_sided_inner_corner,
    one_sided_logloss_corner,
    tri_A_BC_logloss_check,
    tri_A_logloss_check,
    tri_A_logloss_floors,
    tri_B_logloss_check,
    tri_B_logloss_floors,
    tri_C_BC_corner,
    tri_C_corner,
    tri_D_BC_corner,
    tri_D_corner,
    two_sided_corner,
)

HXY = oracle.hb(0.1)  # H(X|Y) of DSBS(0.1)
IXY = 1 - oracle.hb(0.1)


def u_of_y(w):
    return AuxChannel(("y",), "u", np.asarray(w, float))


def v_of_x(w):
    return AuxChannel(("x",), "v", np.asarray(w, float))


def chain_d_model():
    """X uniform, Z = X through BSC(0.1), Y = Z through BSC(0.2)."""
    p = np.zeros((2, 2, 2))
    for x in range(2):
        for z in range(2):
            for y in range(2):
                p[x, y, z] = 0.5 * (0.9 if z == x else 0.1) * (0.8 if y == z else 0.2)
    return JointPmf3.from_array(p)


def test_setting_markov_preconditions():
    assert SettingId.TriA.markov == "x-y-z"
    assert SettingId.CasB.markov == "x-y-z"
    assert SettingId.TriD_BC.markov == "x-z-y"
    assert SettingId.TriC.markov is None
    assert SettingId.OneSided.markov is None


# -- one-sided ------------------------------------------------------------------


def test_one_sided_no_descriptions():
    m = dsbs(0.1)
    c = one_sided_inner_corner(m, u_of_y([[1], [1]]), v_of_x([[1], [1]]))
    assert (c.point.r1, c.point.r2, c.point.d) == (0.0, 0.0, 0.5)
    assert c.point.delta == pytest.approx(IXY, abs=1e-12)


def test_one_sided_lossless():
    m = dsbs(0.1, z="y-noisy", pz=0.3)
    c = one_sided_inner_corner(m, u_of_y([[1], [1]]), v_of_x(np.eye(2)), g=np.array([[0, 1]]))
    i_xz = join(m).I("x", "z")
    assert c.point.as_tuple() == pytest.approx((1.0, 0.0, 0.0, 0.0, i_xz), abs=1e-12)


def test_one_sided_dsbs_corner_frozen():
    # brute-force oracle: U = Y through BSC(0.25), V = X through BSC(0.1), optimal g
    c = one_sided_inner_corner(dsbs(0.1), u_of_y(bsc(0.25)), v_of_x(bsc(0.1)))
    assert c.point.r1 == pytest.approx(0.4558231113837481, abs=1e-12)
    assert c.point.r2 == pytest.approx(0.18872187554086706, abs=1e-12)
    assert c.point.d == pytest.approx(0.1, abs=1e-12)
    assert c.point.delta == pytest.approx(0.5310044064107191, abs=1e-12)


def test_one_sided_caps_and_g_range():
    m = dsbs(0.1)
    with pytest.raises(CardinalityError):
        one_sided_inner_corner(m, u_of_y(np.full((2, 7), 1 / 7)), v_of_x(bsc(0.1)))
    with pytest.raises(CardinalityError):
        one_sided_inner_corner(m, u_of_y(bsc(0.1)), v_of_x(np.full((2, 4), 0.25)))
    with pytest.raises(ReconstructionError):
        one_sided_inner_corner(m, u_of_y(bsc(0.1)), v_of_x(bsc(0.1)), g=np.array([[0, 2], [1, 0]]))


def test_logloss_corner_frozen_and_clamp():
    m = dsbs(0.1)
    c = one_sided_logloss_corner(m, u_of_y(bsc(0.25)), 0.2)
    assert c.point.r1 == pytest.approx(0.6812908992306925, abs=1e-12)
    assert c.point.r2 == pytest.approx(0.18872187554086706, abs=1e-12)
    assert c.point.delta == pytest.approx(0.5310044064107191, abs=1e-12)
    hi = one_sided_logloss_corner(m, u_of_y(bsc(0.25)), 0.95)
    assert hi.point.r1 == 0.0  # clamp active
    const = one_sided_logloss_corner(m, u_of_y([[1], [1]]), 0.0)
    assert const.point.as_tuple() == pytest.approx((1.0, 0.0, 0.0, 0.0, IXY), abs=1e-12)
    with pytest.raises(CardinalityError):
        one_sided_logloss_corner(m, u_of_y(np.full((2, 5), 0.2)), 0.1)


def test_logloss_monotone_in_d():
    m = dsbs(0.15, z="y-noisy", pz=0.2)
    u = u_of_y(bsc(0.2))
    prev = None
    for D in np.linspace(0, 1.2, 13):
        q = one_sided_logloss_corner(m, u, D).point
        if prev is not None:
            assert q.r1 <= prev.r1 + 1e-15 and q.r2 <= prev.r2 and q.delta <= prev.delta
        prev = q


# -- two-sided ------------------------------------------------------------------


def test_two_sided_examples():
    m = dsbs(0.1)
    u = u_of_y([[1], [1]])
    ind = AuxChannel(("u", "x"), "h", np.full((1, 2, 2), 0.5))
    assert two_sided_corner(m, u, ind).point.r1 == pytest.approx(0.0, abs=1e-15)
    exact = AuxChannel(("u", "x"), "h", np.eye(2)[None])
    assert two_sided_corner(m, u, exact).point.as_tuple() == pytest.approx((1, 0, 0, 0, IXY), abs=1e-12)


def test_two_sided_marginal_matching(rng):
    for _ in range(10):
        m = random_model(rng, (2, 3, 2))
        u = u_of_y(random_channel(rng, 3, 2))
        wide = AuxChannel(("u", "x", "y"), "h", rng.dirichlet(np.ones(2), size=(2, 2, 3)))
        narrow = induced_reconstruction_channel(m, u, wide)
        a = two_sided_corner(m, u, wide).point.as_tuple()
        b = two_sided_corner(m, u, narrow).point.as_tuple()
        assert a == pytest.approx(b, abs=1e-12)


# -- settings A and B -------------------------------------------------------------


def test_tri_A_examples():
    m = dsbs(0.1)
    q = logloss_quantities(m)
    assert tri_A_logloss_check(m, RdlPoint(0, 0, HXY, q["I(X;Z)"])).member
    below = tri_A_logloss_check(m, RdlPoint(5, 5, 0.0, q["I(X;Z)"] - 0.01))
    assert not below.member and "leakage floor" in below.message
    a = HXY - 0.2 - 0.1
    v = tri_A_logloss_check(m, RdlPoint(a, a, 0.2, IXY + a, r3=0.1))
    assert v.member and v.on_boundary
    assert all(abs(s) <= 1e-12 for s in v.slacks.values())


def test_tri_A_refuses_without_markov():
    with pytest.raises(MarkovPreconditionError):
        tri_A_logloss_check(dsbs(0.1, z="x"), RdlPoint(1, 1, 0, 1))


def test_tri_A_BC_examples():
    m = dsbs(0.1)
    D = 0.2
    v = tri_A_BC_logloss_check(m, RdlPoint(HXY - D, 0, D, IXY + HXY - D))
    assert v.member and max(abs(s) for s in (v.slacks["r1"], v.slacks["delta"])) <= 1e-12
    assert tri_A_BC_logloss_check(m, RdlPoint(100, 0, 0, 100)).member
    assert not tri_A_BC_logloss_check(m, RdlPoint(100, 0, 0, IXY - 0.01)).member


def test_tri_B_full_key_protection():
    # X - Y - Z with Z constant: H(Y|X,Z) = H(Y|X) = h(0.3) > H(X|Y) - D
    m = dsbs(0.3, z="const")
    f = tri_B_logloss_floors(m, 0.5)
    assert f["delta"] == pytest.approx(logloss_quantities(m)["I(X;Z)"], abs=1e-15)


def test_tri_B_z_constant_formula():
    m = dsbs(0.05, z="const")
    D = 0.0
    qs = logloss_quantities(m)
    h_y_x = oracle.hb(0.05)
    assert qs["H(Y|X,Z)"] == pytest.approx(h_y_x, abs=1e-12)
    f = tri_B_logloss_floors(m, D)
    assert f["delta"] == pytest.approx(max(oracle.hb(0.05) - D - h_y_x, 0.0), abs=1e-12)


def test_tri_B_never_exceeds_tri_A(rng):
    for _ in range(50):
        m = random_model(rng, (2, 3, 2), "x-y-z")
        D, r3 = rng.uniform(0, 1), rng.uniform(0, 0.5)
        assert tri_B_logloss_floors(m, D, r3)["delta"] <= tri_A_logloss_floors(m, D, r3)["delta"] + 1e-15
        q = RdlPoint(2, 2, D, 3, r3)
        assert tri_B_logloss_check(m, q).member >= tri_A_logloss_check(m, q).member
        assert tri_B_logloss_check(m, q, bc=True).floors["r2"] == 0.0


# -- setting C ------------------------------------------------------------------


def test_tri_C_frozen_and_clamps():
    m = dsbs(0.1, z="const")
    u = AuxChannel(("x",), "u", bsc(0.2))
    c = tri_C_corner(m, u, r3=0.0)
    assert c.point.r1 == pytest.approx(0.10481827760525553, abs=1e-12)
    assert c.point.r1 == c.point.r2 == c.point.delta
    assert c.point.d == pytest.approx(0.1, abs=1e-12)
    big = tri_C_corner(m, u, r3=1.0)
    assert (big.point.r1, big.point.r2, big.point.delta) == (0.0, 0.0, 0.0)
    bc = tri_C_BC_corner(m, u)
    assert bc.point.r2 == 0.0 and bc.point.r1 == pytest.approx(0.10481827760525553, abs=1e-12)
    const = tri_C_corner(m, AuxChannel(("x",), "u", [[1.0], [1.0]]))
    assert const.point.as_tuple() == pytest.approx((0, 0, 0, 0.1, 0), abs=1e-12)


# -- setting D ------------------------------------------------------------------


def test_tri_D_frozen_pair_auxiliary():
    m = chain_d_model()
    pair = np.zeros((2, 2, 4))
    for x in range(2):
        for z in range(2):
            pair[x, z, 2 * x + z] = 1.0
    c = tri_D_corner(m, AuxChannel(("x", "z"), "u", pair))
    assert c.point.as_tuple() == pytest.approx(
        (0.46899559358928133, 1.1909236884766434, 0.0, 0.0, 1.0), abs=1e-12)


def test_tri_D_degenerate_auxiliaries():
    m = chain_d_model()
    const = AuxChannel(("x", "z"), "u", np.ones((2, 2, 1)))
    c = tri_D_corner(m, const)
    assert c.point.as_tuple() == pytest.approx((0, 0, 0, 0.26, 0.5310044064107187), abs=1e-12)
    u_is_z = AuxChannel(("x", "z"), "u", np.stack([np.eye(2), np.eye(2)]))
    assert tri_D_corner(m, u_is_z).point.r1 == pytest.approx(0.0, abs=1e-15)


def test_tri_D_requires_x_z_y():
    with pytest.raises(MarkovPreconditionError):
        tri_D_corner(random_model(np.random.default_rng(1)), AuxChannel(("x", "z"), "u", np.ones((2, 2, 1))))


def test_tri_D_bc_and_cascade(rng):
    for _ in range(10):
        m = random_model(rng, (2, 2, 2), "x-z-y")
        u = AuxChannel(("x", "z"), "u", rng.dirichlet(np.ones(3), size=(2, 2)))
        bc = tri_D_BC_corner(m, u)
        cas = cas_D_corner(m, u)
        assert bc.point.r1 + bc.point.r2 == pytest.approx(bc.values["sum_rate"], abs=1e-12)
        assert cas.point.r1 == pytest.approx(bc.point.r1, abs=1e-15)
        assert cas.point.delta >= join(m).I("x", "z") - 1e-12
    with pytest.raises(CardinalityError):
        tri_D_BC_corner(m, AuxChannel(("x", "z"), "u", np.full((2, 2, 7), 1 / 7)))


def test_feasibility_d14():
    m = chain_d_model()
    u = AuxChannel(("x", "z"), "u", rng_channel())
    bc = tri_D_BC_corner(m, u)
    r1 = bc.point.r1 + 0.1
    r2 = bc.values["sum_rate"] - bc.point.r1 + 0.1
    ok = feasibility_check_D14(m, u, r1, r2)
    assert ok.ok and ok.r_prime is not None
    assert feasibility_check_D14(m, u, r1, r2, ok.r_prime).ok
    low = feasibility_check_D14(m, u, max(bc.point.r1 - 0.1, 0.0), 5.0)
    assert not low.ok
    # grid scan confirms no R' works below the R1 floor
    for rp in np.linspace(0, 2, 201):
        assert not feasibility_check_D14(m, u, max(bc.point.r1 - 0.1, 0.0), 5.0, rp).ok
    const = feasibility_check_D14(m, AuxChannel(("x", "z"), "u", np.ones((2, 2, 1))), 0.0, 0.0, 0.0)
    assert const.ok and all(v == 0.0 for v in const.informations.values())


def rng_channel():
    return np.array([[[0.8, 0.2], [0.3, 0.7]], [[0.6, 0.4], [0.1, 0.9]]])
