"""Unit tests for ParamStore and Adam."""
import numpy as np
import pytest

from app.engine import tensor as T
from app.engine.optim import AdamState, ParamStore, adam_step
from app.engine.tensor import Tape, TensorError


def _store(**arrays) -> ParamStore:
    store = ParamStore()
    for name, values in arrays.items():
        store.add(name, np.asarray(values, dtype=float))
    return store


def test_duplicate_parameter_name_rejected():
    store = _store(w=[1.0])
    with pytest.raises(TensorError):
        store.add("w", np.zeros(1))


def test_first_adam_step_moves_by_lr_against_gradient_sign():
    store = _store(w=[1.0, -2.0, 0.5])
    store["w"].grad = np.array([0.3, -4.0, 1e-3])
    adam_step(store, AdamState.for_params(store), lr=0.01)
    np.testing.assert_allclose(store["w"].data, [0.99, -1.99, 0.49], atol=1e-5)


def test_three_scalar_adam_steps_match_hand_values():
    store = _store(w=[1.0])
    state = AdamState.for_params(store)
    trajectory = []
    for grad in (0.5, -1.0, 2.0):
        store["w"].grad = np.array([grad])
        adam_step(store, state, lr=0.1)
        trajectory.append(store["w"].data[0])
    # m/v after each step: (0.05, 2.5e-4), (-0.055, 1.24975e-3), (0.1505, 5.2485e-3)
    assert trajectory == pytest.approx([0.9, 0.936610, 0.894645], abs=1e-5)
    np.testing.assert_allclose(state.first_moment["w"], [0.1505], rtol=1e-12)
    np.testing.assert_allclose(state.second_moment["w"], [0.00524850025], rtol=1e-12)


def test_adam_step_zeroes_gradients():
    store = _store(w=[1.0])
    store["w"].grad = np.array([2.0])
    adam_step(store, AdamState.for_params(store), lr=0.1)
    np.testing.assert_array_equal(store["w"].grad, [0.0])


def test_adam_with_zero_learning_rate_leaves_parameters():
    store = _store(w=[1.0, 2.0])
    store["w"].grad = np.array([5.0, -5.0])
    adam_step(store, AdamState.for_params(store), lr=0.0)
    np.testing.assert_array_equal(store["w"].data, [1.0, 2.0])


def test_adam_minimizes_a_quadratic():
    store = _store(w=[3.0, -4.0])
    state = AdamState.for_params(store)
    for _ in range(2000):
        with Tape() as tape:
            loss = T.sum_(T.square(store["w"]))
        tape.backward(loss)
        adam_step(store, state, lr=0.05)
    assert np.all(np.abs(store["w"].data) < 0.1)
    assert state.step == 2000


def test_state_dict_round_trip_is_a_copy():
    store = _store(a=[1.0, 2.0], b=[[3.0]])
    saved = store.state_dict()
    store["a"].data[0] = 99.0
    assert saved["a"][0] == 1.0
    store.load_state_dict(saved)
    np.testing.assert_array_equal(store["a"].data, [1.0, 2.0])


def test_load_state_dict_checks_names_shapes_and_values():
    store = _store(a=[1.0, 2.0])
    with pytest.raises(TensorError):
        store.load_state_dict({"b": np.zeros(2)})
    with pytest.raises(TensorError):
        store.load_state_dict({"a": np.zeros(3)})
    with pytest.raises(TensorError):
        store.load_state_dict({"a": np.array([np.nan, 0.0])})


def test_polyak_copy():
    target, source = _store(w=[0.0]), _store(w=[10.0])
    target.copy_from(source, tau=0.1)
    np.testing.assert_allclose(target["w"].data, [1.0])
    target.copy_from(source)
    np.testing.assert_array_equal(target["w"].data, [10.0])


def test_grad_norm():
    store = _store(a=[0.0], b=[0.0])
    store["a"].grad = np.array([3.0])
    store["b"].grad = np.array([4.0])
    assert store.grad_norm() == pytest.approx(5.0)
