import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdpfit.cost import social_cost
from sdpfit.model import Assignment, scheduling_instance, validate_instance
from sdpfit.sdp import (
    AsymmetricInput,
    CostKind,
    KernelVector,
    KindMismatch,
    NonPSDKernel,
    Space,
    SpaceMismatch,
    build_cost_matrix,
    embed_euclidean,
    embedding_matrix,
    factored_min_eigenvalue,
    gram_matrix,
    gram_min_eigenvalue,
    harmonic_kernel,
    inner_product,
    pair_legend,
    primal_value,
)
from strategies import random_instances

KINDS = {CostKind.SMITH: "smith", CostKind.RAND: "rand"}


def test_single_player_matrix():
    inst = scheduling_instance([[3.0]], [2.0])
    C = build_cost_matrix(inst, "smith").dense()
    assert C.tolist() == [[0.0, 0.0], [0.0, 6.0]]
    assert primal_value(build_cost_matrix(inst, "smith"), Assignment.from_choices(inst, [0])) == 6.0


def test_smith_off_diagonal():
    inst = scheduling_instance([[1.0], [2.0]], [1.0, 1.0])
    assert build_cost_matrix(inst, "smith").dense()[1, 2] == 0.5


def test_rand_off_diagonal():
    inst = scheduling_instance([[1.0], [2.0]], [1.0, 1.0])
    assert build_cost_matrix(inst, "rand").dense()[1, 2] == pytest.approx(2 / 3)


def test_affine_off_diagonal():
    inst = validate_instance(
        {
            "kind": "affine",
            "resources": [{"id": "e", "a": 1, "b": 0}],
            "players": [
                {"id": "p", "strategies": [["e"]], "resource_weights": {"e": 1}},
                {"id": "q", "strategies": [["e"]], "resource_weights": {"e": 2}},
            ],
        }
    )
    assert build_cost_matrix(inst, "affine").dense()[1, 2] == 2.0


def test_kind_mismatch(one_machine):
    with pytest.raises(KindMismatch):
        build_cost_matrix(one_machine, "affine")


def test_primal_matches_costs(one_machine, two_by_two):
    assert primal_value(build_cost_matrix(one_machine, "smith"), Assignment.from_choices(one_machine, [0, 0])) == 4.0
    inst = scheduling_instance([[1.0], [1.0]], [1.0, 1.0])
    assert primal_value(build_cost_matrix(inst, "rand"), Assignment.from_choices(inst, [0, 0])) == pytest.approx(3.0)


@given(random_instances(players=(1, 5), zero_weight=0.15), st.data())
def test_primal_value_is_social_cost(inst, data):
    choices = [data.draw(st.integers(0, n - 1)) for n in inst.strategy_counts]
    x = Assignment.from_choices(inst, choices)
    for kind, m in KINDS.items():
        assert primal_value(build_cost_matrix(inst, kind), x) == pytest.approx(social_cost(inst, x, m).social, rel=1e-9, abs=1e-12)


@given(random_instances(kind="affine", players=(1, 5)), st.data())
def test_primal_value_is_affine_cost(inst, data):
    choices = [data.draw(st.integers(0, n - 1)) for n in inst.strategy_counts]
    x = Assignment.from_choices(inst, choices)
    assert primal_value(build_cost_matrix(inst, "affine"), x) == pytest.approx(social_cost(inst, x).social, rel=1e-9)


@given(random_instances(players=(1, 5), zero_weight=0.15))
def test_matrix_structure(inst):
    for kind in KINDS:
        cm = build_cost_matrix(inst, kind)
        C = cm.dense()
        assert cm.size == 1 + len(pair_legend(inst))
        assert np.array_equal(C, C.T)
        assert not C[0].any() and not C[:, 0].any()


def test_inner_product_examples():
    f = KernelVector.steps("F", {0: [(1.0, 2.0)]})
    g = KernelVector.steps("F", {0: [(1.0, 1.0)]})
    assert inner_product(f, g) == 1.0
    r = KernelVector.steps("G", {0: [(1.0, 1.0)]})
    s = KernelVector.steps("G", {0: [(1.0, 2.0)]})
    assert inner_product(r, s) == pytest.approx(2 / 3)
    h = KernelVector.steps("F", {1: [(1.0, 2.0)]})
    assert inner_product(f, h) == 0.0


def test_space_mismatch():
    with pytest.raises(SpaceMismatch):
        inner_product(KernelVector.steps("F", {0: [(1.0, 1.0)]}), KernelVector.steps("G", {0: [(1.0, 1.0)]}))


def test_f_embedding_hand_construction():
    fam = [KernelVector.steps("F", {0: [(1.0, 2.0)]}), KernelVector.steps("F", {0: [(1.0, 1.0)]})]
    V = embedding_matrix(fam)
    np.testing.assert_allclose(V, [[1.0, 1.0], [1.0, 0.0]])
    assert V[0] @ V[1] == 1.0


def test_g_kernel_on_two_ratios():
    vals = np.array([1.0, 2.0])
    K = harmonic_kernel(vals[:, None], vals[None, :])
    np.testing.assert_allclose(K, [[0.5, 2 / 3], [2 / 3, 1.0]])
    assert np.linalg.det(K) == pytest.approx(1 / 18)
    assert gram_min_eigenvalue(K) > 0
    fam = [KernelVector.steps("G", {0: [(1.0, v)]}) for v in vals]
    V = embedding_matrix(fam)
    np.testing.assert_allclose(V @ V.T, K, atol=1e-14)


def test_single_vector_norm_preserved():
    v = KernelVector.steps("G", {0: [(2.0, 3.0), (-1.0, 0.5)], 2: [(1.5, 1.0)]})
    (u,) = embed_euclidean([v])
    assert inner_product(u, u) == pytest.approx(inner_product(v, v), rel=1e-14)


def test_non_psd_kernel_detected(monkeypatch):
    import sdpfit.sdp as sdp

    monkeypatch.setattr(sdp, "harmonic_kernel", lambda r, s: -np.ones(np.broadcast(r, s).shape))
    with pytest.raises(NonPSDKernel):
        embedding_matrix([KernelVector.steps("G", {0: [(1.0, 1.0)]})])


def test_min_eigenvalue_examples():
    assert gram_min_eigenvalue(np.eye(3)) == pytest.approx(1.0)
    assert gram_min_eigenvalue(np.ones((2, 2))) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(AsymmetricInput):
        gram_min_eigenvalue(np.array([[1.0, 2.0], [0.0, 1.0]]))


@st.composite
def families(draw, space):
    pool = draw(st.lists(st.floats(0.05, 20.0), min_size=1, max_size=5))
    size = draw(st.integers(1, 7))
    fam = []
    for _ in range(size):
        parts = {}
        for e in range(draw(st.integers(1, 3))):
            terms = draw(st.lists(st.tuples(st.floats(-3, 3), st.sampled_from(pool)), max_size=3))
            if terms:
                parts[e] = terms
        fam.append(KernelVector.steps(space, parts))
    return fam


@pytest.mark.parametrize("space", [Space.F, Space.G])
@given(data=st.data())
def test_embedding_preserves_inner_products(space, data):
    fam = data.draw(families(space))
    G = gram_matrix(fam, sparse=False)
    V = embedding_matrix(fam)
    scale = max(1.0, np.abs(G).max())
    assert np.abs(V @ V.T - G).max() <= 1e-10 * scale
    direct = np.array([[inner_product(u, v) for v in fam] for u in fam])
    assert np.abs(direct - G).max() <= 1e-10 * scale


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=60, unique=True))
def test_restricted_kernel_is_psd(vals):
    r = np.array(vals)
    K = harmonic_kernel(r[:, None], r[None, :])
    assert gram_min_eigenvalue(K) >= -1e-10 * np.trace(K)


@given(st.integers(1, 30), st.integers(1, 5), st.integers(0, 1000))
def test_factored_eigenvalue_matches_dense(n, d, seed):
    V = np.random.default_rng(seed).normal(size=(n, d))
    assert factored_min_eigenvalue(V) == pytest.approx(gram_min_eigenvalue(V @ V.T), abs=1e-9 * max(1.0, np.abs(V).max() ** 2 * d))


def test_sparse_and_dense_gram_agree():
    fam = [KernelVector.steps("F", {e: [(1.0 + e, 0.5 * (t + 1))] for e in range(2)}) for t in range(5)]
    np.testing.assert_allclose(gram_matrix(fam, sparse=True).toarray(), gram_matrix(fam, sparse=False))
