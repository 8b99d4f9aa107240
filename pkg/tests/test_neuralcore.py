import numpy as np
import pytest

from abcgan import neuralcore as nc


def finite_difference_grads(net, batch, upstream, h=1e-5):
    """Central-difference oracle for the scalar loss sum(forward(net) * upstream)."""

    def loss():
        return float(np.sum(nc.forward(net, batch) * upstream))

    grads = []
    for param in net.parameters():
        g = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        while not it.finished:
            i = it.multi_index
            old = param[i]
            param[i] = old + h
            up = loss()
            param[i] = old - h
            down = loss()
            param[i] = old
            g[i] = (up - down) / (2 * h)
            it.iternext()
        grads.append(g)
    return grads


def random_net(rng, dims=None, acts=None):
    if dims is None:
        n_layers = int(rng.integers(1, 4))
        dims = [int(rng.integers(2, 8)) for _ in range(n_layers + 1)]
    if acts is None:
        acts = [str(rng.choice(["relu", "sigmoid", "identity"])) for _ in dims[1:]]
    return nc.init_network(dims, acts, rng)


class TestForward:
    def test_identity_layer_passes_input_through(self):
        layer = nc.DenseLayer(np.eye(2), np.zeros(2), "identity")
        out = nc.forward(nc.Network([layer]), np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(out, [[1.0, 2.0]])

    def test_relu_clips_negatives(self):
        layer = nc.DenseLayer(np.eye(3), np.zeros(3), "relu")
        out = nc.forward(nc.Network([layer]), np.array([[-1.0, 0.0, 2.0]]))
        np.testing.assert_array_equal(out, [[0.0, 0.0, 2.0]])

    def test_two_layer_hand_evaluation(self):
        # layer 1: W=[[1,2],[3,4]], b=(1,-1), relu; layer 2: W=[[1,-1]], b=0.5
        # input (1,1): z1 = (1+2+1, 3+4-1) = (4,6); relu -> (4,6); out = 4-6+0.5
        l1 = nc.DenseLayer(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1.0, -1.0]), "relu")
        l2 = nc.DenseLayer(np.array([[1.0, -1.0]]), np.array([0.5]), "identity")
        out = nc.forward(nc.Network([l1, l2]), np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(out, [[-1.5]])

    def test_dimension_mismatch_names_layer(self):
        net = nc.init_network([3, 2], ["identity"], np.random.default_rng(0))
        with pytest.raises(nc.ShapeError, match="layer 0"):
            nc.forward(net, np.ones((4, 5)))

    def test_sigmoid_outputs_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(1)
        net = nc.init_network([4, 8, 1], ["relu", "sigmoid"], rng)
        out = nc.forward(net, rng.uniform(-100, 100, size=(64, 4)))
        assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_forward_is_pure(self):
        rng = np.random.default_rng(2)
        net = random_net(rng)
        batch = rng.standard_normal((5, net.input_dim))
        first = nc.forward(net, batch)
        second = nc.forward(net, batch)
        np.testing.assert_array_equal(first, second)


class TestBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        rng = np.random.default_rng(3)
        net = random_net(rng)
        batch = rng.standard_normal((4, net.input_dim))
        grads = nc.backward(net, batch, np.zeros((4, net.output_dim)))
        for g in grads.parameter_grads():
            np.testing.assert_array_equal(g, np.zeros_like(g))
        np.testing.assert_array_equal(grads.input_grad, np.zeros_like(batch))

    def test_single_linear_neuron_weight_gradient(self):
        # y = w*x with w=2: dy/dw at x=3 is 3.
        net = nc.Network([nc.DenseLayer(np.array([[2.0]]), np.zeros(1), "identity")])
        grads = nc.backward(net, np.array([[3.0]]), np.array([[1.0]]))
        np.testing.assert_allclose(grads.weight_grads[0], [[3.0]])

    def test_matches_finite_differences_on_random_3layer_net(self):
        rng = np.random.default_rng(4)
        net = random_net(rng, dims=[4, 6, 5, 2], acts=["relu", "sigmoid", "identity"])
        batch = rng.standard_normal((3, 4))
        upstream = rng.standard_normal((3, 2))
        analytic = nc.backward(net, batch, upstream).parameter_grads()
        numeric = finite_difference_grads(net, batch, upstream)
        for a, n in zip(analytic, numeric):
            np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-7)

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        net = random_net(rng, dims=[3, 5, 1], acts=["relu", "identity"])
        batch = rng.standard_normal((2, 3))
        upstream = rng.standard_normal((2, 1))
        analytic = nc.backward(net, batch, upstream).input_grad
        h = 1e-6
        numeric = np.zeros_like(batch)
        for i in range(batch.shape[0]):
            for j in range(batch.shape[1]):
                for sign in (1, -1):
                    shifted = batch.copy()
                    shifted[i, j] += sign * h
                    numeric[i, j] += sign * float(np.sum(nc.forward(net, shifted) * upstream))
        numeric /= 2 * h
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)

    def test_upstream_shape_mismatch_raises(self):
        net = nc.init_network([2, 1], ["identity"], np.random.default_rng(0))
        with pytest.raises(nc.ShapeError):
            nc.backward(net, np.ones((3, 2)), np.ones((2, 1)))


class TestBceLoss:
    def test_half_probability_gives_ln2(self):
        loss, _ = nc.bce_loss(np.array([0.5]), np.array([1.0]))
        np.testing.assert_allclose(loss, np.log(2.0), rtol=1e-12)

    def test_perfect_prediction_is_tiny(self):
        loss, _ = nc.bce_loss(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
        assert loss <= 1e-6

    def test_hand_computed_batch(self):
        loss, _ = nc.bce_loss(np.array([0.9, 0.1]), np.array([1.0, 0.0]))
        np.testing.assert_allclose(loss, -np.log(0.9), rtol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        pred = rng.uniform(0.05, 0.95, size=8)
        label = rng.integers(0, 2, size=8).astype(float)
        _, grad = nc.bce_loss(pred, label)
        h = 1e-7
        for i in range(8):
            up = pred.copy()
            up[i] += h
            down = pred.copy()
            down[i] -= h
            numeric = (nc.bce_loss(up, label)[0] - nc.bce_loss(down, label)[0]) / (2 * h)
            np.testing.assert_allclose(grad[i], numeric, rtol=1e-5)

    def test_shape_mismatch_raises(self):
        with pytest.raises(nc.ShapeError):
            nc.bce_loss(np.array([0.5, 0.5]), np.array([1.0]))


class TestAdam:
    def test_zero_gradient_is_identity_on_params(self):
        rng = np.random.default_rng(7)
        params = [rng.standard_normal((3, 2)), rng.standard_normal(2)]
        before = [p.copy() for p in params]
        state = nc.OptimizerState.for_params(params, learning_rate=0.1)
        nc.adam_step(params, [np.zeros_like(p) for p in params], state)
        for p, b in zip(params, before):
            np.testing.assert_array_equal(p, b)

    def test_descends_quadratic(self):
        w = np.array([1.0])
        state = nc.OptimizerState.for_params([w], learning_rate=0.1)
        nc.adam_step([w], [2.0 * w], state)
        assert w[0] < 1.0

    def test_converges_on_shifted_quadratic(self):
        # f(w) = (w - 3)^2, 200 steps from w=0
        w = np.array([0.0])
        state = nc.OptimizerState.for_params([w], learning_rate=0.1)
        for _ in range(200):
            nc.adam_step([w], [2.0 * (w - 3.0)], state)
        assert abs(w[0] - 3.0) < 0.05

    def test_non_finite_gradient_raises(self):
        w = np.array([1.0])
        state = nc.OptimizerState.for_params([w], learning_rate=0.1)
        with pytest.raises(nc.NonFiniteGradientError):
            nc.adam_step([w], [np.array([np.nan])], state)

    def test_step_counter_increments(self):
        w = np.array([1.0])
        state = nc.OptimizerState.for_params([w], learning_rate=0.1)
        nc.adam_step([w], [np.array([0.5])], state)
        nc.adam_step([w], [np.array([0.5])], state)
        assert state.step == 2


class TestInitNetwork:
    def test_same_seed_gives_identical_networks(self):
        dims, acts = [4, 50, 1], ["relu", "identity"]
        a = nc.init_network(dims, acts, np.random.default_rng(42))
        b = nc.init_network(dims, acts, np.random.default_rng(42))
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)
            np.testing.assert_array_equal(la.bias, lb.bias)

    def test_layer_shapes(self):
        net = nc.init_network([4, 50, 1], ["relu", "identity"], np.random.default_rng(0))
        assert net.layers[0].weights.shape == (50, 4)
        assert net.layers[1].weights.shape == (1, 50)
        for layer in net.layers:
            np.testing.assert_array_equal(layer.bias, np.zeros(layer.out_dim))

    def test_weight_scale_matches_uniform_target(self):
        # uniform(-a, a) with a = sqrt(6/100) has std a/sqrt(3)
        net = nc.init_network([50, 50], ["relu"], np.random.default_rng(1))
        target = np.sqrt(6.0 / 100.0) / np.sqrt(3.0)
        observed = net.layers[0].weights.std()
        assert abs(observed - target) / target < 0.2

    def test_empty_layer_list_rejected(self):
        with pytest.raises(ValueError):
            nc.init_network([4], [], np.random.default_rng(0))


def test_gradient_check_suite_many_random_networks():
    """Every analytic gradient on 12 random nets matches central differences."""
    rng = np.random.default_rng(100)
    for _ in range(12):
        net = random_net(rng)
        batch = rng.standard_normal((3, net.input_dim))
        upstream = rng.standard_normal((3, net.output_dim))
        analytic = nc.backward(net, batch, upstream)
        numeric = finite_difference_grads(net, batch, upstream)
        for a, n in zip(analytic.parameter_grads(), numeric):
            np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-7)
