import numpy as np
import pytest

from mvhash.data import MultiViewDataset, SynthSpec, make_synthetic, split_protocol
from mvhash.errors import InvalidArgument


def test_spec_validation():
    with pytest.raises(InvalidArgument):
        SynthSpec(num_classes=1, samples_per_class=10, d_img=4, d_txt=4)
    with pytest.raises(InvalidArgument):
        SynthSpec(num_classes=3, samples_per_class=10, d_img=4, d_txt=4,
                  cluster_spread=0.0)
    with pytest.raises(InvalidArgument):
        SynthSpec(num_classes=3, samples_per_class=10, d_img=4, d_txt=4,
                  cross_view_consistency=1.5)


def test_synthetic_deterministic():
    spec = SynthSpec(5, 20, 8, 6, 0.3, 0.9, seed=7)
    a = make_synthetic(spec)
    b = make_synthetic(spec)
    assert (a.image_features == b.image_features).all()
    assert (a.text_features == b.text_features).all()
    assert (a.labels == b.labels).all()
    assert (a.train_mask == b.train_mask).all()


def test_synthetic_shapes_and_splits():
    ds = make_synthetic(SynthSpec(5, 20, 8, 6, 0.3, 0.9, seed=7))
    assert len(ds) == 100
    assert ds.image_features.shape == (100, 8)
    assert ds.text_features.shape == (100, 6)
    assert ds.labels.shape == (100, 5)
    # 70/20/10 stratified per class, all disjoint here
    assert ds.train_mask.sum() == 70
    assert ds.retrieval_mask.sum() == 20
    assert ds.query_mask.sum() == 10
    assert not (ds.train_mask & ds.retrieval_mask).any()
    assert not (ds.query_mask & ds.retrieval_mask).any()
    cls = ds.labels.argmax(axis=1)
    for c in range(5):
        assert ds.train_mask[cls == c].sum() == 14


def test_synthetic_degenerate_case_is_separable():
    # sigma -> 0 with full consistency: within-class features collapse
    ds = make_synthetic(SynthSpec(3, 10, 4, 4, 1e-12, 1.0, seed=1))
    cls = ds.labels.argmax(axis=1)
    for c in range(3):
        block = ds.image_features[cls == c]
        assert np.allclose(block, block[0], atol=1e-9)


def test_synthetic_consistency_controls_text_view():
    clean = make_synthetic(SynthSpec(4, 50, 4, 4, 0.01, 1.0, seed=3))
    noisy = make_synthetic(SynthSpec(4, 50, 4, 4, 0.01, 0.5, seed=3))
    cls = clean.labels.argmax(axis=1)

    def text_mismatch_rate(ds):
        # nearest prototype per text sample vs true class
        protos = np.stack([ds.text_features[cls == c].mean(axis=0) for c in range(4)])
        d = ((ds.text_features[:, None, :] - protos[None]) ** 2).sum(axis=2)
        return (d.argmin(axis=1) != cls).mean()

    assert text_mismatch_rate(clean) < 0.05
    assert text_mismatch_rate(noisy) > 0.2


def test_split_protocol_counts_and_subsets():
    ds = make_synthetic(SynthSpec(10, 30, 4, 4, 0.3, 1.0, seed=2))
    out = split_protocol(ds, train_n=100, query_per_class=2, seed=9)
    assert out.query_mask.sum() == 20
    assert out.train_mask.sum() == 100
    # train drawn from retrieval; query disjoint from retrieval
    assert (out.train_mask & ~out.retrieval_mask).sum() == 0
    assert not (out.query_mask & out.retrieval_mask).any()
    again = split_protocol(ds, train_n=100, query_per_class=2, seed=9)
    assert (out.query_mask == again.query_mask).all()
    assert (out.train_mask == again.train_mask).all()


def test_split_protocol_infeasible_counts():
    ds = make_synthetic(SynthSpec(4, 10, 4, 4, 0.3, 1.0, seed=2))
    with pytest.raises(InvalidArgument):
        split_protocol(ds, train_n=5, query_per_class=11, seed=0)
    with pytest.raises(InvalidArgument):
        split_protocol(ds, train_n=1000, query_per_class=1, seed=0)


def test_dataset_rejects_unlabeled_samples():
    with pytest.raises(InvalidArgument):
        MultiViewDataset(
            image_features=np.zeros((2, 3)),
            text_features=np.zeros((2, 3)),
            labels=np.array([[1, 0], [0, 0]], dtype=np.uint8),
            train_mask=np.array([True, False]),
            retrieval_mask=np.array([False, True]),
            query_mask=np.array([False, False]),
        )


def test_dataset_rejects_query_overlap():
    with pytest.raises(InvalidArgument):
        MultiViewDataset(
            image_features=np.zeros((2, 3)),
            text_features=np.zeros((2, 3)),
            labels=np.ones((2, 2), dtype=np.uint8),
            train_mask=np.array([True, False]),
            retrieval_mask=np.array([False, True]),
            query_mask=np.array([False, True]),
        )
