import warnings

import numpy as np
import pytest

from rdlkit.measures import Joint, entropy, join
from rdlkit.model import AuxChannel, bsc, dsbs, from_chain
from rdlkit.schemesim import (
    Codebook,
    KeyConfig,
    all_sequences,
    block_pmf,
    keyed_scheme,
    observation_joint,
    run_exact_leakage,
    run_one_sided,
    run_triangular_forwarding,
    run_triangular_keyed,
    typicality_test,
)

G_UY = np.array([[0, 0], [1, 1]])  # x_hat = u


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def chain_model(a=0.25, b=0.25):
    return from_chain(0.5 * bsc(a), bsc(b))


# -- typicality -----------------------------------------------------------------


def test_most_likely_sequence_is_atypical():
    pmf = np.array([0.7, 0.3])
    assert not typicality_test([np.zeros(20, int)], pmf, 0.1)


def test_exact_type_is_typical_for_any_eps():
    pmf = np.array([[0.25, 0.25], [0.5, 0.0]])
    seqs = [np.array([0, 0, 1, 1]), np.array([0, 1, 0, 0])]
    for eps in (1e-9, 0.01, 1.0):
        assert typicality_test(seqs, pmf, eps)


def test_eps_two_is_the_factor_three_bound(rng):
    # |pi - p| <= 2p reduces to pi <= 3p on the support
    pmf = rng.dirichlet(np.ones(6)).reshape(2, 3)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        seqs = [rng.integers(0, 2, n), rng.integers(0, 3, n)]
        pi = np.bincount(np.ravel_multi_index(seqs, (2, 3)), minlength=6) / n
        assert typicality_test(seqs, pmf, 2.0) == bool(np.all(pi <= 3 * pmf.ravel() + 1e-15))
    assert typicality_test([np.array([0, 0, 1])], np.array([0.5, 0.5]), 2.0)


def test_zero_probability_symbol_fails():
    assert not typicality_test([np.array([1, 0])], np.array([1.0, 0.0]), 2.0)


def test_typicality_errors():
    with pytest.raises(ValueError):
        typicality_test([np.zeros(3, int), np.zeros(4, int)], np.full((2, 2), 0.25))
    with pytest.raises(ValueError):
        typicality_test([np.zeros(3, int)], np.full((2, 2), 0.25))


def test_jointpmf_accepted():
    m = dsbs(0.1, z="y")
    x = np.array([0] * 10 + [1] * 10)
    y = x.copy()
    y[[0, 10]] = 1 - y[[0, 10]]  # exact type of the model
    assert typicality_test([x, y, y], m, 1e-9)
    assert not typicality_test([x, x, x], m, 0.2)


# -- runs ------------------------------------------------------------------------


def one_sided_setup():
    m = dsbs(0.1)
    U = AuxChannel(("y",), "u", bsc(0.4))
    V = AuxChannel(("x",), "v", bsc(0.4))
    return m, U, V, np.array([[0, 1], [0, 1]])


def test_one_sided_seed_determinism():
    m, U, V, g = one_sided_setup()
    a = run_one_sided(m, U, V, g, (0.2, 0.2), 32, 20, eps=0.2, seed=7)
    b = run_one_sided(m, U, V, g, (0.2, 0.2), 32, 20, eps=0.2, seed=7)
    c = run_one_sided(m, U, V, g, (0.2, 0.2), 32, 20, eps=0.2, seed=8)
    assert a.to_json() == b.to_json()
    assert a.distortions == b.distortions
    assert a.distortions != c.distortions


def test_one_sided_exact_reproducible():
    m, U, V, g = one_sided_setup()
    a = run_one_sided(m, U, V, g, (0.5, 0.5), 4, 0, eps=1.0, seed=3, exact=True)
    b = run_one_sided(m, U, V, g, (0.5, 0.5), 4, 0, eps=1.0, seed=3, exact=True)
    assert a.exact_leakage == b.exact_leakage
    assert a.exact_leakage >= Joint(m.probs, "xyz").I("x", "z") - 1e-12


def test_blocks_share_codebook():
    m, U, V, g = one_sided_setup()
    rep = run_one_sided(m, U, V, g, (0.3, 0.3), 64, 10, eps=0.3, seed=1, block=16)
    assert rep.config["block"] == 16 and rep.trials == 10
    with pytest.raises(ValueError):
        run_one_sided(m, U, V, g, (0.3, 0.3), 64, 1, block=10)


def test_dry_run_has_no_statistics():
    m, U, V, g = one_sided_setup()
    rep = run_one_sided(m, U, V, g, (0.2, 0.2), 16, 0, seed=0)
    assert rep.distortion_mean is None and rep.error_rate is None


def test_size_guard():
    m, U, V, g = one_sided_setup()
    with pytest.raises(ValueError, match="size guard"):
        run_one_sided(m, U, V, g, (0.5, 0.5), 64, 1, codebook_rates=(0.5, 0.5), max_cells=1 << 20)
    with pytest.raises(ValueError):
        Codebook.draw(100, 30, np.ones(2) / 2, 0, np.random.SeedSequence(0), np.random.SeedSequence(1), 0)


def test_zero_key_rate_equals_forwarding():
    m = chain_model()
    U = AuxChannel(("x",), "u", bsc(0.4))
    fw = run_triangular_forwarding(m, U, G_UY, (0.1, 0.05), 64, 30, eps=0.3, seed=4, codebook_rate=0.1)
    kd = run_triangular_keyed(m, U, G_UY, (0.1, 0.05), KeyConfig(0.0), 64, 30, eps=0.3, seed=4,
                              codebook_rate=0.1)
    assert fw.distortions == kd.distortions
    assert fw.error_rate == kd.error_rate
    assert fw.index_entropy == kd.index_entropy


def test_split_does_not_change_decoding():
    m = chain_model()
    U = AuxChannel(("x",), "u", bsc(0.4))
    a = run_triangular_forwarding(m, U, G_UY, (0.125, 0.125), 64, 30, eps=0.3, seed=2, codebook_rate=0.15)
    b = run_triangular_forwarding(m, U, G_UY, (0.0, 0.25), 64, 30, eps=0.3, seed=2, codebook_rate=0.15)
    assert a.config["bits"] == [8, 8] and b.config["bits"] == [0, 16]
    assert a.distortions == b.distortions and a.error_rate == b.error_rate


def test_setting_a_needs_chain():
    m = dsbs(0.1, z="x")  # Z = X breaks X - Y - Z
    U = AuxChannel(("x",), "u", bsc(0.3))
    with pytest.raises(ValueError):
        run_triangular_forwarding(m, U, G_UY, (0.1, 0.0), 8, 1)


def test_below_floor_errors_grow_with_n():
    m = dsbs(0.1, z="const")
    U = AuxChannel(("x",), "u", bsc(0.4))
    j = join(m, U)
    cb = float(j.I("x", "u")) + 0.02
    wz = float(j.I("x", "u", "y"))
    below = [run_triangular_forwarding(m, U, G_UY, (0.0, 0.0), n, 100, eps=0.2, seed=3, codebook_rate=cb).error_rate
             for n in (64, 128, 256)]
    above = [run_triangular_forwarding(m, U, G_UY, (wz + 0.15, 0.0), n, 100, eps=0.2, seed=3,
                                       codebook_rate=cb).error_rate for n in (64, 128, 256)]
    assert below[0] <= below[1] <= below[2] and below[2] >= 0.9
    assert max(above) <= 0.05


# -- exact leakage ------------------------------------------------------------------


def test_block_pmf_is_product():
    m = chain_model()
    p = block_pmf(m, 2)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    xs = all_sequences(2, 2)
    assert xs.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert p[1, 2, 3] == pytest.approx(m.probs[0, 1, 1] * m.probs[1, 0, 1], abs=1e-16)


def test_constant_and_identity_encoders():
    m = chain_model(0.1, 0.2)
    j = Joint(m.probs, "xyz")
    assert run_exact_leakage("constant", m, 4) == pytest.approx(float(j.I("x", "z")), abs=1e-12)
    assert run_exact_leakage("identity", m, 4) == pytest.approx(float(j.H("x")), abs=1e-12)


def test_full_cascade_nothing_leaks_beyond_z():
    # the whole index rides the private link, so the helper sees nothing
    m = chain_model()
    U = AuxChannel(("x",), "u", bsc(0.1))
    rep = run_triangular_forwarding(m, U, G_UY, (0.0, 1.0), 4, 0, eps=2.0, seed=0, codebook_rate=1.0, exact=True)
    assert rep.exact_leakage == pytest.approx(float(Joint(m.probs, "xyz").I("x", "z")), abs=1e-12)


def test_deterministic_encoder_leaks_index_entropy():
    m = dsbs(0.1, z="const")
    U = AuxChannel(("x",), "u", bsc(0.2))
    n = 6
    sch = keyed_scheme(m, U, G_UY, (0.5, 0.0), KeyConfig(0.0, "none"), n, eps=0.5, seed=5, codebook_rate=0.5,
                       selection="first")
    xs = all_sequences(2, n)
    px = block_pmf(m, n).sum(axis=(1, 2))
    law = sch.observation_law(xs, all_sequences(2, n)[:1])[:, 0, :]
    assert np.all((law == 0) | (law == 1))
    h_w1 = entropy(px @ law)
    assert run_exact_leakage(sch) == pytest.approx(h_w1 / n, abs=1e-12)


def test_external_key_pads_the_whole_index():
    m = chain_model()
    U = AuxChannel(("x",), "u", bsc(0.1))
    sch = keyed_scheme(m, U, G_UY, (1.0, 0.0), KeyConfig(1.0, "external"), 4, eps=2.0, seed=0, codebook_rate=1.0)
    assert sch.key_bits == sch.b1 == 4
    pxzo = observation_joint(sch)
    # padded index is uniform and independent of (X^n, Z^n)
    pxz = pxzo.sum(axis=2, keepdims=True)
    assert np.allclose(pxzo, pxz / pxzo.shape[2], atol=1e-15)
    assert run_exact_leakage(sch) == pytest.approx(float(Joint(m.probs, "xyz").I("x", "z")), abs=1e-12)


def test_key_ordering_on_pinned_configuration():
    m = chain_model(0.25, 0.25)
    U = AuxChannel(("x",), "u", bsc(0.1))
    vals = [run_exact_leakage(keyed_scheme(m, U, G_UY, (1.0, 0.0), KeyConfig(0.25, mode), 4, eps=2.0, seed=0,
                                           codebook_rate=1.0)) for mode in ("external", "binned", "none")]
    assert vals[0] <= vals[1] <= vals[2]
    assert vals[0] < vals[2]


@pytest.mark.parametrize("seed", range(4))
def test_external_key_never_worse_than_binned(seed):
    m = chain_model(0.1, 0.2)
    U = AuxChannel(("x",), "u", bsc(0.1))
    ext, binned = [run_exact_leakage(keyed_scheme(m, U, G_UY, (1.0, 0.0), KeyConfig(0.5, mode), 4, eps=1.0,
                                                  seed=seed, codebook_rate=1.0))
                   for mode in ("external", "binned")]
    assert ext <= binned + 1e-12


def test_key_rate_limited_by_alphabet():
    m = chain_model()
    U = AuxChannel(("x",), "u", bsc(0.1))
    with pytest.raises(ValueError):
        keyed_scheme(m, U, G_UY, (1.0, 0.0), KeyConfig(1.5), 4)


def test_exact_guard():
    m = chain_model()
    with pytest.raises(ValueError, match="guard"):
        run_exact_leakage("constant", m, 8)
