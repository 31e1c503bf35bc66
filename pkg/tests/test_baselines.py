import numpy as np
import pytest
from scipy.stats import chisquare

from aogd.baselines import BufferOgd, OgdLast, ReservoirBuffer
from aogd.evaluation import local_loss_grad_oracle
from aogd.features import IdentityMap
from aogd.loss import PairLoss


def test_ogd_last_noop_and_zero_step():
    m = OgdLast(IdentityMap(2), PairLoss("squared"), eta=0.1)
    rep = m.update(np.array([1.0, 0.0]), 1)
    assert rep.avg_skipped
    np.testing.assert_array_equal(m.w, 0.0)
    z = OgdLast(IdentityMap(2), PairLoss("squared"), eta=1e-300)
    for k in range(6):
        z.update(np.array([k, 1.0]), 1 if k % 2 else -1)
    np.testing.assert_allclose(z.w, 0.0, atol=1e-290)


def test_ogd_last_hand_case():
    stream = [(np.array([1.0, 0.0]), 1), (np.array([0.0, 1.0]), -1), (np.array([0.5, 0.5]), -1)]
    m = OgdLast(IdentityMap(2), PairLoss("squared"), eta=0.2)
    for phi, y in stream:
        m.update(phi, y)
    # step 2 pairs with x1; step 3 pairs with x1 again (last positive)
    w = np.zeros(2)
    for neg in (stream[1][0], stream[2][0]):
        d = stream[0][0] - neg
        w = w - 0.2 * (-2.0 * (1 - w @ d) * d)
    np.testing.assert_allclose(m.w, w, atol=1e-15)


def test_reservoir_retention_uniform():
    # each of 10 items retained with probability 3/10
    counts = np.zeros(10)
    rng = np.random.default_rng(0)
    trials = 100_000
    for _ in range(trials):
        buf = ReservoirBuffer(3, 1, rng)
        for i in range(10):
            buf.add(np.array([float(i)]))
        counts[buf.contents[:, 0].astype(int)] += 1
    expect = trials * 0.3
    assert np.all(np.abs(counts - expect) < 3 * np.sqrt(expect * 0.7))
    assert chisquare(counts).pvalue > 1e-3


def test_reservoir_fills_then_samples():
    buf = ReservoirBuffer(2, 1, np.random.default_rng(1))
    assert buf.add(np.array([1.0])) == 0
    assert buf.add(np.array([2.0])) == 1
    assert buf.contents.shape == (2, 1)
    with pytest.raises(ValueError):
        ReservoirBuffer(0, 1, np.random.default_rng())


def test_buffer_size_one_pairs_a_past_point():
    m = BufferOgd(IdentityMap(1), PairLoss("squared"), eta=0.01, s=1, seed=3)
    negs = [float(k) for k in range(1, 6)]
    for v in negs:
        m.update(np.array([v]), -1)
    assert m.buffers[-1].contents[0, 0] in negs


@pytest.mark.parametrize("kind", ["squared", "hinge"])
def test_full_buffer_gradient_is_oracle(kind):
    rng = np.random.default_rng(5)
    T = 60
    Phi = rng.normal(size=(T, 4))
    y = rng.choice([-1, 1], size=T)
    loss = PairLoss(kind, 0.01)
    m = BufferOgd(IdentityMap(4), loss, eta=0.05, s=T, seed=0)
    history = []
    for phi, lab in zip(Phi, y):
        w_before = m.w.copy()
        m.update(phi, int(lab))
        ref = local_loss_grad_oracle(w_before, history, (phi, int(lab)), loss) if history else None
        if ref is None:
            assert m.last_grad is None
        else:
            np.testing.assert_allclose(m.last_grad, ref, atol=1e-10, rtol=0)
        history.append((phi, int(lab)))


def test_bad_labels_and_sizes():
    with pytest.raises(ValueError):
        BufferOgd(IdentityMap(1), PairLoss(), eta=0.1, s=0)
    with pytest.raises(ValueError):
        OgdLast(IdentityMap(1), PairLoss(), eta=0.1).update(np.zeros(1), 2)
