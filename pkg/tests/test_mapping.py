import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from contsynth.dsl import default_inventory
from contsynth.mapping import (
    PROB_FLOOR,
    DegenerateProbabilities,
    GenomeDimensionError,
    LayoutMismatch,
    LengthExceedsInventory,
    TokenProbabilities,
    bin_map,
    build_layout,
    decode_k,
    dynamic_bin_map,
    dynamic_multi_group_map,
    genome_dimension,
    learned_mean,
    load_probabilities,
    make_scheme,
    multi_group_map,
    save_probabilities,
    single_group_map,
    uniform_layout,
)

INV = default_inventory()
INV3 = INV.subset(["Head", "Last", "Sort"])
INV4 = INV.subset(["Head", "Last", "Sort", "Sum"])

finite = st.floats(-50, 50, allow_nan=False)


def ids(program):
    return [t.id for t in program]


# --- probabilities and layouts ---------------------------------------------------


def test_layout_examples():
    assert np.allclose(uniform_layout(4).boundaries, [0, .25, .5, .75, 1])
    b = build_layout(TokenProbabilities(np.array([0.7, 0.1, 0.1, 0.1]))).boundaries
    assert np.allclose(b, [0, .7, .8, .9, 1])


@given(st.lists(st.floats(0, 100), min_size=2, max_size=41))
def test_floored_probabilities(weights):
    p = TokenProbabilities.from_weights(weights)
    assert abs(p.p.sum() - 1) < 1e-9
    assert p.p.min() >= PROB_FLOOR * (1 - 1e-12)
    layout = build_layout(p)
    assert layout.boundaries[0] == 0 and layout.boundaries[-1] == 1
    assert np.all(np.diff(layout.boundaries) > 0)
    assert np.allclose(layout.widths, p.p, atol=1e-12)


def test_two_token_example():
    w = np.zeros(41)
    w[3] = w[2] = 1
    p = TokenProbabilities.from_weights(w)
    assert np.isclose(p.p[3], (1 - 39 * PROB_FLOOR) / 2)


def test_degenerate_probabilities():
    with pytest.raises(DegenerateProbabilities):
        TokenProbabilities(np.array([0.5, 0.5, 0.0]))
    with pytest.raises(DegenerateProbabilities):
        TokenProbabilities.from_weights([1.0, -1.0])
    with pytest.raises(DegenerateProbabilities):
        TokenProbabilities.from_weights(np.ones(20_000))


def test_probability_file_round_trip(tmp_path):
    p = TokenProbabilities.from_weights(np.arange(41.0))
    path = tmp_path / "p.tsv"
    save_probabilities(p, INV, path)
    assert np.allclose(load_probabilities(path, INV).p, p.p)


# --- bin mapping ---------------------------------------------------------------------


def test_bin_examples():
    assert ids(bin_map([0.0], uniform_layout(4), INV4)) == [3]
    assert ids(bin_map(np.zeros(4), uniform_layout(41), INV)) == [21] * 4
    assert ids(bin_map([40.0, -40.0], uniform_layout(41), INV)) == [41, 1]


def test_bin_lookup_matches_linear_scan():
    rng = np.random.default_rng(0)
    p = TokenProbabilities.from_weights(rng.random(41))
    layout = build_layout(p)
    g = rng.normal(scale=2, size=2000)
    got = ids(bin_map(g, layout, INV))
    b = layout.boundaries
    for gi, tok in zip(g, got):
        u = ndtr(gi)
        j = next(j for j in range(41) if b[j] <= u < b[j + 1] or j == 40)
        assert tok == j + 1


def test_bin_map_rejects_wrong_layout():
    with pytest.raises(LayoutMismatch):
        bin_map([0.0], uniform_layout(4), INV)


def test_bin_stability_random_genomes():
    """Perturbations that keep Phi(g) inside its bin never change the program."""
    rng = np.random.default_rng(1)
    layout = build_layout(TokenProbabilities.from_weights(rng.random(41)))
    b = layout.boundaries
    violations = 0
    for _ in range(2000):
        g = rng.normal(scale=1.5, size=5)
        u = ndtr(g)
        room = np.min(np.abs(u[:, None] - b[None, :]), axis=1)
        target = np.clip(u + rng.uniform(-1, 1, size=5) * room / 2, 1e-300, 1 - 1e-16)
        g2 = np.array([_inv_ndtr(t) for t in target])
        violations += bin_map(g, layout, INV) != bin_map(g2, layout, INV)
    assert violations == 0


def _inv_ndtr(u):
    from scipy.special import ndtri
    return float(ndtri(u))


# --- group mappings ------------------------------------------------------------------


def test_single_group_examples():
    assert ids(single_group_map([0.9, 0.1, 0.5, 0.7], 2, INV4)) == [1, 4]
    assert ids(single_group_map([0.0] * 4, 3, INV4)) == [1, 2, 3]
    with pytest.raises(LengthExceedsInventory):
        single_group_map([0.0] * 4, 5, INV4)


@given(st.lists(finite, min_size=41, max_size=41), st.integers(1, 41))
def test_single_group_distinct(g, l):
    p = single_group_map(g, l, INV)
    assert len(set(ids(p))) == l == len(p)


def test_multi_group_examples():
    assert ids(multi_group_map([0, 1, 0, 2, 0, 0], 2, INV3)) == [2, 1]
    assert ids(multi_group_map([0, 5, 1, 0, 5, 1], 2, INV3)) == [2, 2]


@given(st.lists(st.integers(-100, 100), min_size=6, max_size=6), st.integers(-100, 100))
def test_multi_group_shift_invariance(g, c):
    # integer-valued genomes keep the shift exact
    g = np.array(g, dtype=float)
    shifted = g.copy()
    shifted[:3] += c
    assert multi_group_map(g, 2, INV3) == multi_group_map(shifted, 2, INV3)


@given(st.lists(st.integers(-100, 100), min_size=12, max_size=12))
def test_group_maps_monotone_invariance(g):
    # on integers both transforms stay strictly increasing in floating point
    g = np.array(g, dtype=float)
    assert multi_group_map(g, 3, INV4) == multi_group_map(np.arctan(g), 3, INV4)
    assert single_group_map(g[:4], 2, INV4) == single_group_map(g[:4] ** 3, 2, INV4)


def test_dynamic_multi_group_examples():
    # l = 4, |D| = 3: admissible k are 2 and 4 (k = 1 would need 4 <= 3)
    g0_for_k2 = -1.0   # Phi < 0.5 -> first of the two admissible values
    g = np.concatenate(([g0_for_k2], [5, 1, 3], [0, 2, 9], [0, 0, 0], [0, 0, 0]))
    assert decode_k(g0_for_k2, 4, 3) == 2
    assert ids(dynamic_multi_group_map(g, 4, INV3)) == [1, 3, 3, 2]


def test_dynamic_multi_group_reductions():
    rng = np.random.default_rng(2)
    body = rng.normal(size=3 * 41)
    # k = l: plain multi-group on the l groups
    g = np.concatenate(([8.0], body))
    assert dynamic_multi_group_map(g, 3, INV) == multi_group_map(body, 3, INV)
    # k = 1: top-l of the first group, largest first
    g = np.concatenate(([-8.0], body))
    assert dynamic_multi_group_map(g, 3, INV) == single_group_map(body[:41], 3, INV)


# --- dynamic bin ---------------------------------------------------------------------------


def test_dynamic_bin_candidates():
    rng = np.random.default_rng(3)
    layout = uniform_layout(41)
    g = rng.normal(size=4)
    cands = dynamic_bin_map(g, layout, INV)
    assert [len(c) for c in cands] == [1, 2, 3]
    for a, b in zip(cands, cands[1:]):
        assert b[: len(a)] == a
    assert cands[-1] == bin_map(g[:3], layout, INV)


# --- dimensions, totality, learned init ------------------------------------------------------


@pytest.mark.parametrize("name,l,dim", [
    ("bin", 10, 10), ("dynamic-bin", 10, 11), ("single-group", 10, 41),
    ("multi-group", 10, 410), ("dynamic-multi-group", 10, 411),
])
def test_dimensions(name, l, dim):
    assert genome_dimension(make_scheme(name, l), 41) == dim


def test_dimension_mismatch_is_an_error():
    with pytest.raises(GenomeDimensionError):
        multi_group_map(np.zeros(5), 2, INV3)
    with pytest.raises(GenomeDimensionError):
        single_group_map(np.zeros(5), 2, INV3)


@settings(max_examples=50)
@given(st.sampled_from(["bin", "dynamic-bin", "single-group", "multi-group", "dynamic-multi-group"]),
       st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_totality(name, l, seed):
    scheme = make_scheme(name, l)
    g = np.random.default_rng(seed).normal(scale=10, size=scheme.dimension(41))
    for cand in scheme.decode(g, uniform_layout(41)):
        assert 1 <= len(cand) <= l
        assert all(0 <= i < 41 for i in cand)


def test_batch_decode_matches_rowwise():
    rng = np.random.default_rng(4)
    layout = build_layout(TokenProbabilities.from_weights(rng.random(41)))
    for name in ("bin", "dynamic-bin", "multi-group"):
        scheme = make_scheme(name, 3)
        X = rng.normal(size=(50, scheme.dimension(41)))
        assert scheme.decode_batch(X, layout) == [scheme.decode(x, layout) for x in X]


def test_learned_mean_picks_dominant_token():
    eps = PROB_FLOOR
    p = TokenProbabilities(np.array([1 - 3 * eps, eps, eps, eps]))
    layout = build_layout(p)
    m = learned_mean(make_scheme("bin", 5), p, layout)
    assert ids(bin_map(m, layout, INV4)) == [1] * 5
    u = TokenProbabilities.uniform(4)
    m = learned_mean(make_scheme("bin", 2), u, build_layout(u))
    assert ids(bin_map(m, build_layout(u), INV4)) == [1, 1]
    m = learned_mean(make_scheme("multi-group", 2), p, layout)
    assert ids(multi_group_map(m, 2, INV4)) == [1, 1]


@settings(max_examples=50)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=41))
def test_edge_genomes_keep_decoding(weights):
    layout = build_layout(TokenProbabilities.from_weights(weights))
    lo, hi = layout.edge_genomes()
    k = layout.n_tokens
    assert lo < hi
    assert layout.lookup(ndtr(lo)) == 0 and layout.lookup(ndtr(hi)) == k - 1
    g = np.array([-40.0, lo - 1, lo, hi, hi + 1, 40.0])
    assert list(layout.lookup(ndtr(np.clip(g, lo, hi)))) == list(layout.lookup(ndtr(g)))
