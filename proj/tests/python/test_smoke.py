"""Smoke tests for the python bindings: build, train a little, inspect."""

import math

import numpy as np
import pytest

import xcnn


@pytest.fixture(scope="module", autouse=True)
def single_thread():
    xcnn.set_blas_threads(1)


def blob_dataset(n=60, h=28, w=28):
    rng = np.random.default_rng(0)
    images = np.full((n, 1, h, w), -1.0, dtype=np.float32)
    labels = []
    for i in range(n):
        y = i % 4
        cy, cx = 3 + (y // 2) * 13, 3 + (y % 2) * 13
        images[i, 0, cy : cy + 8, cx : cx + 8] = 0.9
        images[i, 0] += rng.normal(0, 0.01, size=(h, w)).astype(np.float32)
        labels.append(y)
    np.clip(images, -1.0, 1.0, out=images)
    return xcnn.dataset_from_arrays(images, labels, num_classes=4)


def test_forward_shapes_and_heatmap_range():
    model = xcnn.build_model(variant="xcnn", in_channels=1, gen_channels=8,
                             disc="mnist_cnn", num_classes=10, seed=3)
    images = np.random.default_rng(1).uniform(-1, 1, (2, 1, 28, 28)).astype(np.float32)
    logits, heatmap = model.forward(images)
    assert logits.shape == (2, 10)
    assert heatmap.shape == (2, 1, 28, 28)
    assert heatmap.min() >= -1.0 and heatmap.max() <= 1.0


def test_baseline_has_no_heatmap():
    model = xcnn.build_model(variant="baseline", disc="mnist_cnn", num_classes=10)
    images = np.zeros((1, 1, 28, 28), dtype=np.float32)
    logits, heatmap = model.forward(images)
    assert logits.shape == (1, 10)
    assert heatmap is None


def test_training_reduces_loss_and_checkpoint_roundtrip(tmp_path):
    ds = blob_dataset()
    model = xcnn.build_model(variant="xcnn", in_channels=1, gen_channels=4,
                             disc="mnist_cnn", num_classes=4, seed=7)
    first = model.train_epoch(ds, epoch=0, batch_size=20, lr=0.05)
    assert math.isfinite(first.train_loss)
    for epoch in range(1, 15):
        last = model.train_epoch(ds, epoch=epoch, batch_size=20, lr=0.05)
    assert last.train_loss < first.train_loss

    acc, loss = model.evaluate(ds)
    path = str(tmp_path / "model.xcnn")
    model.save(path, epoch=15)
    loaded = xcnn.load_model(path)
    acc2, loss2 = loaded.evaluate(ds)
    assert acc2 == acc
    assert loss2 == loss
    assert loaded.manifest() == model.manifest()


def test_localize_and_render():
    heat = np.full((10, 10), -0.9, dtype=np.float32)
    heat[2:5, 3:7] = 0.9
    box = xcnn.localize(heat, threshold=0.5)
    assert (box.x0, box.y0, box.x1, box.y1) == (3, 2, 6, 4)

    assert xcnn.localize(np.full((4, 4), -1.0, dtype=np.float32)) is None

    rgb = xcnn.render_heatmap(np.array([[-1.0, 0.0, 1.0]], dtype=np.float32))
    assert rgb.shape == (1, 3, 3)
    assert rgb[0, 0].tolist() == [0, 0, 255]
    assert rgb[0, 1].tolist() == [255, 255, 255]
    assert rgb[0, 2].tolist() == [255, 0, 0]


def test_mutual_information_fixtures():
    labels = [i % 10 for i in range(5000)]
    assert xcnn.mutual_information(labels, labels) == pytest.approx(math.log(10), abs=1e-6)

    rng = np.random.default_rng(5)
    codes = rng.integers(0, 4, 3000).tolist()
    shuffled = rng.integers(0, 10, 3000).tolist()
    assert xcnn.mutual_information(codes, shuffled) < 0.02


def test_gradcheck_suite_quick():
    for entry in xcnn.gradcheck_suite(shapes=2):
        assert entry["pass"], entry


def test_shape_errors_surface_as_python_exceptions():
    model = xcnn.build_model(variant="xcnn", in_channels=1, gen_channels=4)
    with pytest.raises(ValueError):
        model.forward(np.zeros((1, 1, 27, 27), dtype=np.float32))
