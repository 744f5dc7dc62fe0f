import numpy as np
import pytest

from grounded_choice.crossmodal import (
    LinearMap,
    build_prototypes,
    default_ridge,
    fit_linear_map,
    load_map,
    predict_image_vector,
    retrieve_exemplar,
    retrieve_prototype,
    save_map,
)
from grounded_choice.embeddings import EmbeddingSpace, ImageVectorStore, cosine, nearest_neighbors
from grounded_choice.errors import DimensionMismatch, GroundingError, OutOfVocabulary, SingularSystem


def gradient_descent_ridge(T, V, lam, iters=20000):
    """Plain full-batch gradient descent on ||TM - V||^2 + lam ||M||^2."""
    L = 2 * (np.linalg.eigvalsh(T.T @ T).max() + lam)
    M = np.zeros((T.shape[1], V.shape[1]))
    for _ in range(iters):
        grad = 2 * T.T @ (T @ M - V) + 2 * lam * M
        M -= grad / L
        if np.linalg.norm(grad) < 1e-12:
            break
    return M


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestPrototypes:
    def test_mean_of_copies(self):
        store = ImageVectorStore(["x", "x2"], [[2, 0], [2, 0]])
        protos = build_prototypes(store, {"c": ["x", "x2"]})
        assert list(protos["c"].vector) == [2.0, 0.0]
        assert protos["c"].members == ("x", "x2")

    def test_midpoint(self):
        store = ImageVectorStore(["x", "y"], [[1, 0], [0, 1]])
        assert list(build_prototypes(store, {"c": ["x", "y"]})["c"].vector) == [0.5, 0.5]

    def test_150_random(self, rng):
        ids = [f"i{j}" for j in range(150)]
        store = ImageVectorStore(ids, rng.normal(size=(150, 4)))
        proto = build_prototypes(store, {"c": ids})["c"].vector
        oracle = [sum(float(store[i][d]) for i in ids) / 150 for d in range(4)]
        assert np.max(np.abs(proto - oracle)) < 1e-12

    def test_identical_vectors_exact(self, rng):
        v = rng.normal(size=5)
        store = ImageVectorStore([f"i{j}" for j in range(7)], np.tile(v, (7, 1)))
        assert np.array_equal(build_prototypes(store, {"c": list(store.keys)})["c"].vector, v)

    def test_errors(self):
        store = ImageVectorStore(["x"], [[1, 0]])
        with pytest.raises(GroundingError, match="unknown"):
            build_prototypes(store, {"c": ["nope"]})
        with pytest.raises(GroundingError, match="no member"):
            build_prototypes(store, {"c": []})


class TestFit:
    def test_identity_design(self, rng):
        V = rng.normal(size=(4, 3))
        assert np.allclose(fit_linear_map(np.eye(4), V, 0).matrix, V, atol=1e-14)

    def test_recovery(self, rng):
        T = rng.normal(size=(200, 10))
        M_true = rng.normal(size=(10, 8))
        M = fit_linear_map(T, T @ M_true, 0).matrix
        assert rel_fro(M, M_true) <= 1e-8

    def test_huge_ridge_shrinks(self, rng):
        T, V = rng.uniform(-1, 1, size=(30, 5)), rng.uniform(-1, 1, size=(30, 4))
        assert np.linalg.norm(fit_linear_map(T, V, 1e12).matrix) < 1e-6

    def test_normal_equations(self, rng):
        T, V = rng.normal(size=(40, 6)), rng.normal(size=(40, 3))
        M = fit_linear_map(T, V, 0).matrix
        assert np.linalg.norm(T.T @ (T @ M - V)) <= 1e-8 * np.linalg.norm(T.T @ V)

    @pytest.mark.parametrize("lam", [0.0, 0.5, 5.0])
    def test_matches_gradient_descent(self, rng, lam):
        T, V = rng.normal(size=(10, 8)), rng.normal(size=(10, 8))
        closed = fit_linear_map(T, V, lam).matrix
        assert rel_fro(closed, gradient_descent_ridge(T, V, lam, iters=200000)) <= 1e-4

    def test_singular_at_zero(self):
        T = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(SingularSystem, match="ridge"):
            fit_linear_map(T, np.ones((3, 2)), 0)
        fit_linear_map(T, np.ones((3, 2)), 0.1)  # ridge rescues it

    def test_input_errors(self):
        with pytest.raises(DimensionMismatch):
            fit_linear_map(np.ones((3, 2)), np.ones((4, 2)), 1.0)
        with pytest.raises(GroundingError):
            fit_linear_map(np.array([[np.nan, 1.0]]), np.ones((1, 2)), 1.0)

    def test_default_ridge(self, rng):
        T = rng.normal(size=(9, 3))
        assert default_ridge(T) == pytest.approx(1e-2 * np.trace(T.T @ T) / 3)

    def test_map_file_roundtrip(self, tmp_path, rng):
        lmap = LinearMap(rng.normal(size=(4, 3)), mode="exemplar", ridge=0.25)
        save_map(lmap, tmp_path / "m.txt")
        back = load_map(tmp_path / "m.txt")
        assert np.array_equal(back.matrix, lmap.matrix)
        assert (back.mode, back.ridge) == ("exemplar", 0.25)
        assert (tmp_path / "m.txt").read_text().splitlines()[0] == "4 3 exemplar 0.25"


class TestPredict:
    def test_identity(self, tiny_space):
        assert list(predict_image_vector(LinearMap(np.eye(2)), tiny_space, "a")) == [1.0, 0.0]

    def test_zero_vector(self, rng):
        space = EmbeddingSpace(["z"], [[0.0, 0.0, 0.0]])
        assert not predict_image_vector(LinearMap(rng.normal(size=(3, 2))), space, "z").any()

    def test_linearity(self, rng):
        t1, t2 = rng.normal(size=4), rng.normal(size=4)
        space = EmbeddingSpace(["t1", "t2", "s"], [t1, t2, t1 + t2])
        lmap = LinearMap(rng.normal(size=(4, 3)))
        p = lambda w: predict_image_vector(lmap, space, w)  # noqa: E731
        assert np.max(np.abs(p("s") - (p("t1") + p("t2")))) < 1e-10

    def test_errors(self, tiny_space):
        with pytest.raises(OutOfVocabulary):
            predict_image_vector(LinearMap(np.eye(2)), tiny_space, "nope")
        with pytest.raises(DimensionMismatch):
            predict_image_vector(LinearMap(np.eye(3)), tiny_space, "a")


class TestRetrieval:
    def test_exemplar_exact(self):
        space = EmbeddingSpace(["w"], [[0.3, 0.7]])
        training = ImageVectorStore(["x", "y"], [[0.3, 0.7], [1, 0]])
        assert retrieve_exemplar(LinearMap(np.eye(2)), space, "w", training) == "x"

    def test_exemplar_tie(self):
        space = EmbeddingSpace(["w"], [[1.0, 0.0]])
        training = ImageVectorStore(["b", "a"], [[2, 0], [1, 0]])
        assert retrieve_exemplar(LinearMap(np.eye(2)), space, "w", training) == "a"

    def test_exemplar_brute_force_and_consistency(self, rng, random_store):
        space = EmbeddingSpace(["w"], rng.normal(size=(1, 5)))
        lmap = LinearMap(rng.normal(size=(5, 6)))
        pred = predict_image_vector(lmap, space, "w")
        got = retrieve_exemplar(lmap, space, "w", random_store)
        brute = max(random_store.keys, key=lambda i: (cosine(random_store[i], pred), [-ord(c) for c in i]))
        assert got == brute
        assert got == nearest_neighbors(random_store, pred, 1)[0][0]

    def test_scaling_invariance(self, rng, random_store):
        space = EmbeddingSpace(["w"], rng.normal(size=(1, 5)))
        lmap = LinearMap(rng.normal(size=(5, 6)))
        scaled = ImageVectorStore(random_store.keys, 7.5 * random_store.matrix)
        assert retrieve_exemplar(lmap, space, "w", random_store) == retrieve_exemplar(lmap, space, "w", scaled)

    def test_prototype_single(self):
        space = EmbeddingSpace(["w"], [[1.0, 2.0]])
        training = ImageVectorStore(["x"], [[1.0, 2.0]])
        protos = build_prototypes(training, {"c": ["x"]})
        assert retrieve_prototype(LinearMap(np.eye(2)), space, "w", protos, training) == "x"

    def test_prototype_two_step_brute_force(self):
        training = ImageVectorStore(
            ["a1", "a2", "b1", "b2"], [[1.0, 0.2], [1.0, -0.05], [0.1, 1.0], [-0.1, 1.0]])
        protos = build_prototypes(training, {"A": ["a1", "a2"], "B": ["b1", "b2"]})
        pA = protos["A"].vector
        space = EmbeddingSpace(["w"], [3 * pA])  # collinear with class A's prototype
        got = retrieve_prototype(LinearMap(np.eye(2)), space, "w", protos, training)
        best_cls = max(["A", "B"], key=lambda c: cosine(protos[c].vector, space["w"]))
        brute = max(protos[best_cls].members, key=lambda i: cosine(training[i], protos[best_cls].vector))
        assert best_cls == "A" and got == brute

    def test_prototype_orthogonal_tie(self):
        training = ImageVectorStore(["p", "q", "r"], [[0, 1, 0], [0, 0, 1], [0, 0, 2]])
        protos = build_prototypes(training, {"zeta": ["p"], "alpha": ["q", "r"]})
        space = EmbeddingSpace(["w"], [[1.0, 0.0, 0.0]])
        # both prototypes at cosine 0 -> "alpha" wins, then its nearest member (tie -> "q")
        assert retrieve_prototype(LinearMap(np.eye(3)), space, "w", protos, training) == "q"

    def test_global_search_flag(self):
        training = ImageVectorStore(
            ["a1", "a2", "a3", "b1", "b2"],
            [[1, 0.5], [1, 0], [1, 0], [1, 1 / 6], [-1, 5]])
        protos = build_prototypes(training, {"A": ["a1", "a2", "a3"], "B": ["b1", "b2"]})
        space = EmbeddingSpace(["w"], [protos["A"].vector])
        lm = LinearMap(np.eye(2))
        assert retrieve_prototype(lm, space, "w", protos, training) == "a2"
        assert retrieve_prototype(lm, space, "w", protos, training, within_class=False) == "b1"
