"""Smoke test for the pallor extension module.

Build and run from the repository root:

    cargo build -p pallor-py --features extension-module
    cp target/debug/libpallor.so python/pallor.so
    python3 python/smoke_test.py
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pallor  # noqa: E402


def main():
    image, truth = pallor.synthesize("eye", 1, seed=3)
    assert (image.width, image.height) == (125, 125)
    assert {"g", "iris", "sclera", "conjunctiva"} <= set(truth)

    rois = pallor.segment(image, "eye")
    for name in ("iris", "sclera", "conjunctiva"):
        assert rois[name].pixel_count() > 0, name

    names, values = pallor.extract_features(image, "eye", "m1")
    assert len(names) == len(values) == 54
    names, values = pallor.extract_features(image, "eye", "m2")
    assert len(values) == 108

    rows = [[float(i % 2) * 3 + 0.1 * i, (i * 7) % 5] for i in range(20)]
    labels = [i % 2 == 1 for i in range(20)]
    order, scores = pallor.rank_features(rows, labels, "f_score")
    assert order[0] == 0

    model = pallor.train_model("logistic_regression", rows, labels, {"l2": 0.1})
    label, score = model.predict([3.5, 1.0])
    assert label and 0.5 <= score <= 1.0

    m = pallor.compute_metrics(8, 2, 7, 3)
    assert abs(m["precision"] - 0.8) < 1e-12
    assert pallor.compute_auc([0.9, 0.1, 0.8, 0.3], [True, False, True, False]) == 1.0
    folds = pallor.stratified_folds([0] * 6 + [1] * 6, 3)
    assert sorted(folds.count(f) for f in range(3)) == [4, 4, 4]

    try:
        pallor.segment(image, "ear")
    except pallor.PallorError:
        pass
    else:
        raise AssertionError("unknown site accepted")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.png")
        image.save_png(path)
        again = pallor.Image.load(path)
        assert abs(again.pixel(60, 60)[0] - image.pixel(60, 60)[0]) < 1 / 255 + 1e-9

    print("pallor smoke test ok")


if __name__ == "__main__":
    main()
