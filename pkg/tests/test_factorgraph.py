import numpy as np
import pytest

from gridflex.factorgraph import (
    FactorGraph,
    GaussianFactor,
    InvalidFactorError,
    UnderDeterminedGraphError,
    UnknownVariableError,
    VariableId,
    condition,
    dump_information_system,
    infer,
    linear_factor,
    prior_factor,
    sensor_factor,
)

from helpers import (
    build_random_graph,
    make_variables,
    oracle_condition,
    oracle_posterior,
)


class TestSensorFactor:
    def test_canonical_form(self):
        x = VariableId(0, "x")
        f = sensor_factor(x, 5.0, 0.25)
        assert f.scope == (x,)
        np.testing.assert_allclose(f.J, [[4.0]])
        np.testing.assert_allclose(f.eta, [20.0])

    def test_zero_observation(self):
        f = sensor_factor(VariableId(0, "x"), 0.0, 1.0)
        np.testing.assert_allclose(f.J, [[1.0]])
        np.testing.assert_allclose(f.eta, [0.0])

    def test_wide_noise(self):
        f = sensor_factor(VariableId(0, "x"), 110.0, 25.0)
        np.testing.assert_allclose(f.J, [[0.04]])
        np.testing.assert_allclose(f.eta, [4.4])

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_rejects_nonpositive_variance(self, bad):
        with pytest.raises(InvalidFactorError):
            sensor_factor(VariableId(0, "x"), 1.0, bad)


class TestLinearFactor:
    def test_double_parent_weight(self):
        c, x1 = VariableId(0, "c"), VariableId(1, "x1")
        f = linear_factor(c, [x1], [2.0], 0.0, 0.5)
        assert f.scope == (c, x1)
        np.testing.assert_allclose(f.J, [[2.0, -4.0], [-4.0, 8.0]])
        np.testing.assert_allclose(f.eta, [0.0, 0.0])

    def test_identity_model(self):
        c, p = VariableId(0, "c"), VariableId(1, "p")
        f = linear_factor(c, [p], [1.0], 0.0, 1.0)
        np.testing.assert_allclose(f.J, [[1.0, -1.0], [-1.0, 1.0]])
        np.testing.assert_allclose(f.eta, [0.0, 0.0])

    def test_two_parent_sum(self):
        c, p1, p2 = make_variables(3)
        f = linear_factor(c, [p1, p2], [1.0, 1.0], 0.0, 0.1)
        a = np.array([1.0, -1.0, -1.0])
        np.testing.assert_allclose(f.J, np.outer(a, a) * 10.0)

    def test_dimension_mismatch(self):
        c, p = VariableId(0, "c"), VariableId(1, "p")
        with pytest.raises(InvalidFactorError):
            linear_factor(c, [p], [1.0, 2.0], 0.0, 1.0)

    def test_nonpositive_residual(self):
        c, p = VariableId(0, "c"), VariableId(1, "p")
        with pytest.raises(InvalidFactorError):
            linear_factor(c, [p], [1.0], 0.0, 0.0)

    def test_bias_enters_information_vector(self):
        c, p = VariableId(0, "c"), VariableId(1, "p")
        f = linear_factor(c, [p], [3.0], 2.0, 0.5)
        np.testing.assert_allclose(f.eta, [4.0, -12.0])


class TestInfer:
    def test_prior_passthrough(self):
        (x,) = make_variables(1)
        g = FactorGraph([x], [prior_factor(x, 2.0, 4.0)])
        post = infer(g)
        assert post.mean_of("v0") == pytest.approx(2.0)
        assert post.variance_of("v0") == pytest.approx(4.0)

    def test_single_observation(self):
        (x,) = make_variables(1)
        g = FactorGraph([x], [sensor_factor(x, 5.0, 0.25)])
        post = infer(g)
        assert post.mean_of("v0") == pytest.approx(5.0)
        assert post.variance_of("v0") == pytest.approx(0.25)

    def test_chain_matches_dense_conditioning_oracle(self):
        # x1 ~ N(0,1); x2 = 2 x1 + eps(r=0.5); sensor on x2: y=4, var=0.1.
        # Oracle: joint covariance of (x1, x2, y), conditioned on y.
        var_x1, r, obs, obs_var = 1.0, 0.5, 4.0, 0.1
        cov_x1x2 = 2.0 * var_x1
        var_x2 = 4.0 * var_x1 + r
        var_y = var_x2 + obs_var
        mu1 = cov_x1x2 / var_y * obs
        mu2 = var_x2 / var_y * obs
        assert mu1 == pytest.approx(1.7391, abs=5e-5)
        assert mu2 == pytest.approx(3.9130, abs=5e-5)

        x1, x2 = make_variables(2)
        g = FactorGraph(
            [x1, x2],
            [
                prior_factor(x1, 0.0, var_x1),
                linear_factor(x2, [x1], [2.0], 0.0, r),
                sensor_factor(x2, obs, obs_var),
            ],
        )
        post = infer(g)
        assert post.mean_of("v0") == pytest.approx(mu1, abs=1e-12)
        assert post.mean_of("v1") == pytest.approx(mu2, abs=1e-12)

    def test_unreached_variable_is_named(self):
        x, orphan = make_variables(2)
        g = FactorGraph([x, orphan], [prior_factor(x, 0.0, 1.0)])
        with pytest.raises(UnderDeterminedGraphError) as err:
            infer(g)
        assert err.value.variable.label == "v1"

    def test_relational_chain_without_anchor_fails(self):
        # child <- parent relation alone leaves the pair under-determined
        c, p = make_variables(2)
        g = FactorGraph([c, p], [linear_factor(c, [p], [1.0], 0.0, 0.1)])
        with pytest.raises(UnderDeterminedGraphError):
            infer(g)


class TestCondition:
    def test_independent_variable_unchanged(self):
        x, y = make_variables(2)
        g = FactorGraph(
            [x, y], [prior_factor(x, 1.0, 2.0), prior_factor(y, -3.0, 1.0)]
        )
        base = infer(g)
        post = condition(g, {y: 10.0})
        assert post.variables == (x,)
        assert post.mean_of("v0") == pytest.approx(base.mean_of("v0"))
        assert post.variance_of("v0") == pytest.approx(base.variance_of("v0"))

    def test_chain_conditioned_exactly(self):
        x1, x2 = make_variables(2)
        g = FactorGraph(
            [x1, x2],
            [prior_factor(x1, 0.0, 1.0), linear_factor(x2, [x1], [2.0], 0.0, 0.5)],
        )
        post = condition(g, {x2: 4.0})
        # dense bivariate oracle: mu = cov/var * 4 = 2/4.5*4, var = 1 - 4/4.5
        assert post.mean_of("v0") == pytest.approx(2.0 / 4.5 * 4.0, abs=1e-12)
        assert post.variance_of("v0") == pytest.approx(1.0 - 4.0 / 4.5, abs=1e-12)
        assert post.mean_of("v0") == pytest.approx(1.7778, abs=5e-5)
        assert post.variance_of("v0") == pytest.approx(0.1111, abs=5e-5)

    def test_condition_at_posterior_mean_is_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            g = build_random_graph(rng, max_vars=12)
            if len(g) < 2:
                continue
            base = infer(g)
            v = g.variables[int(rng.integers(0, len(g)))]
            post = condition(g, {v: base.mean_of(v.label)})
            for u in post.variables:
                assert post.mean_of(u.label) == pytest.approx(
                    base.mean_of(u.label), abs=1e-9
                )
                assert post.variance_of(u.label) <= base.variance_of(u.label) + 1e-12

    def test_unknown_evidence_variable(self):
        x, = make_variables(1)
        g = FactorGraph([x], [prior_factor(x, 0.0, 1.0)])
        with pytest.raises(UnknownVariableError):
            condition(g, {VariableId(5, "ghost"): 1.0})

    def test_matches_dense_conditioning_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            g = build_random_graph(rng, max_vars=15)
            if len(g) < 3:
                continue
            picks = rng.choice(len(g), size=2, replace=False)
            evidence = {g.variables[i]: float(rng.normal(scale=3)) for i in picks}
            mean_o, var_o, u_idx = oracle_condition(g, evidence)
            post = condition(g, evidence)
            np.testing.assert_allclose(post.mean, mean_o, atol=1e-8)
            np.testing.assert_allclose(post.marginal_variance, var_o, atol=1e-8)
            assert [v.index for v in post.variables] == u_idx


class TestGraphProperties:
    def test_oracle_equivalence_random_graphs(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            g = build_random_graph(rng)
            mean_o, var_o = oracle_posterior(g)
            post = infer(g)
            np.testing.assert_allclose(post.mean, mean_o, atol=1e-8)
            np.testing.assert_allclose(post.marginal_variance, var_o, atol=1e-8)

    def test_assembled_matrix_bitwise_symmetric(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            g = build_random_graph(rng, max_vars=20)
            H, _ = g.assemble()
            assert np.array_equal(H, H.T)
            assert np.all(infer(g).marginal_variance >= 0.0)

    def test_factor_additivity(self):
        vs = make_variables(3)
        f1 = linear_factor(vs[0], [vs[1]], [1.5], 0.2, 0.3)
        f2 = linear_factor(vs[0], [vs[2]], [-0.5], 0.0, 0.7)
        priors = [prior_factor(v, i - 1.0, 1.0 + i) for i, v in enumerate(vs)]
        g_split = FactorGraph(vs, priors + [f1, f2])

        # merge f1 and f2 over the union scope by hand
        J = np.zeros((3, 3))
        eta = np.zeros(3)
        for f in (f1, f2):
            idx = [v.index for v in f.scope]
            J[np.ix_(idx, idx)] += f.J
            eta[idx] += f.eta
        merged = GaussianFactor(scope=tuple(vs), J=J, eta=eta)
        g_merged = FactorGraph(vs, priors + [merged])

        p1, p2 = infer(g_split), infer(g_merged)
        np.testing.assert_allclose(p1.mean, p2.mean, atol=1e-10)
        np.testing.assert_allclose(p1.marginal_variance, p2.marginal_variance, atol=1e-10)

    def test_factor_order_independence(self):
        rng = np.random.default_rng(11)
        g = build_random_graph(rng, max_vars=25)
        base = infer(g)
        for seed in range(3):
            order = np.random.default_rng(seed).permutation(len(g.factors))
            g2 = FactorGraph(g.variables, [g.factors[i] for i in order])
            post = infer(g2)
            np.testing.assert_allclose(post.mean, base.mean, atol=1e-12)
            np.testing.assert_allclose(
                post.marginal_variance, base.marginal_variance, atol=1e-12
            )


class TestFactorValidation:
    def test_asymmetric_information_matrix_rejected(self):
        vs = make_variables(2)
        with pytest.raises(InvalidFactorError):
            GaussianFactor(scope=tuple(vs), J=np.array([[1.0, 0.5], [0.1, 1.0]]), eta=np.zeros(2))

    def test_indefinite_information_matrix_rejected(self):
        vs = make_variables(2)
        with pytest.raises(InvalidFactorError):
            GaussianFactor(
                scope=tuple(vs), J=np.array([[1.0, 2.0], [2.0, 1.0]]), eta=np.zeros(2)
            )

    def test_repeated_scope_variable_rejected(self):
        v = VariableId(0, "x")
        with pytest.raises(InvalidFactorError):
            GaussianFactor(scope=(v, v), J=np.eye(2), eta=np.zeros(2))

    def test_factor_over_undeclared_variable_rejected(self):
        a, b = make_variables(2)
        with pytest.raises(UnknownVariableError):
            FactorGraph([a], [prior_factor(b, 0.0, 1.0)])


def test_dump_round_trips_the_assembled_system():
    rng = np.random.default_rng(5)
    g = build_random_graph(rng, max_vars=10)
    text = dump_information_system(g)
    lines = text.strip().splitlines()
    n = int(lines[0].split()[1])
    H = np.zeros((n, n))
    eta = np.zeros(n)
    labels = {}
    for line in lines[1:]:
        kind, *rest = line.split()
        if kind == "var":
            labels[int(rest[0])] = rest[1]
        elif kind == "H":
            H[int(rest[0]), int(rest[1])] = float(rest[2])
        elif kind == "eta":
            eta[int(rest[0])] = float(rest[1])
    H_ref, eta_ref = g.assemble()
    assert np.array_equal(H, H_ref)
    assert np.array_equal(eta, eta_ref)
    assert labels == {v.index: v.label for v in g.variables}
