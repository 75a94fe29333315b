import json
from dataclasses import replace

import numpy as np
import pytest

from autoeval import transforms as T
from autoeval.errors import ConfigError, ParameterError
from autoeval.metaset import (
    TEST_STREAM,
    TRAIN_STREAM,
    BackgroundSpec,
    HeldOutRecipe,
    TransformRecipe,
    all_triples,
    apply_recipe,
    build_records,
    generate_sample_set,
    identity_recipe,
    make_record,
    read_manifest,
    record_rng,
    sample_heldout_recipe,
    sample_recipe,
    split_indices,
    write_manifest,
)
from autoeval.classifier import accuracy


class TestRecipes:
    def test_all_triples_observed(self):
        rng = np.random.default_rng(0)
        seen = {frozenset(sample_recipe(rng, 4).ids) for _ in range(10_000)}
        assert seen == all_triples() and len(seen) == 20

    def test_magnitudes_within_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            r = sample_recipe(rng, 4)
            assert len(set(r.ids)) == 3
            for name, rg in r.transforms:
                bounds = T.CATALOG[name]
                if bounds is None:
                    assert rg is None
                else:
                    assert bounds[0] <= rg[0] <= rg[1] <= bounds[1]
            lo, hi = r.background.scale
            assert 0.2 <= lo <= hi <= 1.0 and 0 <= r.background.source < 4

    def test_fixed_seed_same_recipe(self):
        assert sample_recipe(np.random.default_rng(9), 3) == sample_recipe(np.random.default_rng(9), 3)

    def test_invariants_enforced(self):
        with pytest.raises(ParameterError):
            TransformRecipe(None, (("rotation", (0, 1)), ("color", (1, 1))))
        with pytest.raises(ParameterError):
            TransformRecipe(None, (("rotation", (0, 1)), ("rotation", (0, 2)), ("color", (1, 1))))
        with pytest.raises(ParameterError):
            TransformRecipe(None, (("rotation", (0, 45)), ("color", (1, 1)), ("sharpness", (1, 1))))
        with pytest.raises(ParameterError):
            TransformRecipe(None, (("cutout", (0.1, 0.2)), ("color", (1, 1)), ("sharpness", (1, 1))))
        with pytest.raises(ParameterError):
            BackgroundSpec(0, (0.1, 0.5))

    def test_heldout_recipes_use_only_heldout_ops(self):
        rng = np.random.default_rng(2)
        for v in "ABCD":
            r = sample_heldout_recipe(rng, 3, v)
            assert isinstance(r, HeldOutRecipe) and not isinstance(r, TransformRecipe)
            assert set(r.ids) <= set(T.HELD_OUT_CATALOG)
        with pytest.raises(ParameterError):
            HeldOutRecipe(None, (("rotation", (0.0, 1.0)),))

    def test_dict_round_trip(self):
        rng = np.random.default_rng(3)
        for r in (sample_recipe(rng, 5), sample_heldout_recipe(rng, 5, "D"), identity_recipe()):
            assert type(r).from_dict(json.loads(json.dumps(r.to_dict()))) == r

    def test_empty_corpus(self):
        with pytest.raises(ConfigError):
            sample_recipe(np.random.default_rng(0), 0)


class TestApplyRecipe:
    def test_identity_magnitudes_keep_foreground(self, small_bench):
        seed, masks = small_bench.seed, small_bench.masks
        recipe = TransformRecipe(BackgroundSpec(0), identity_recipe().transforms)
        out = apply_recipe(seed, masks, recipe, small_bench.backgrounds, np.random.default_rng(0))
        fg = masks.astype(bool)
        assert np.array_equal(out.images[fg], seed.images[fg])
        assert np.any(out.images[~fg] != seed.images[~fg])

    def test_labels_and_determinism(self, small_bench):
        rng_a, rng_b = record_rng(0, 5), record_rng(0, 5)
        recipe = sample_recipe(rng_a, len(small_bench.backgrounds))
        assert recipe == sample_recipe(rng_b, len(small_bench.backgrounds))
        a = apply_recipe(small_bench.seed, small_bench.masks, recipe, small_bench.backgrounds, rng_a)
        b = apply_recipe(small_bench.seed, small_bench.masks, recipe, small_bench.backgrounds, rng_b)
        assert a.images.tobytes() == b.images.tobytes()
        assert np.array_equal(a.labels, small_bench.seed.labels)
        assert a.images.min() >= 0 and a.images.max() <= 1

    def test_empty_corpus(self, small_bench):
        with pytest.raises(ConfigError):
            apply_recipe(small_bench.seed, small_bench.masks, identity_recipe(), [], np.random.default_rng(0))


class TestRecords:
    def test_identity_control_record(self, small_bench):
        ctx = small_bench.context(TRAIN_STREAM)
        rec = make_record(replace(ctx, recipe_fn=identity_recipe), 0)
        assert rec.accuracy == pytest.approx(accuracy(small_bench.clf, small_bench.seed))
        assert rec.fd < 50

    def test_streams_are_independent(self, small_bench):
        a = small_bench.records(TRAIN_STREAM, [0])[0][0]
        b = small_bench.records(TEST_STREAM, [0])[0][0]
        assert a.recipe != b.recipe

    def test_prefix_property_and_order(self, small_bench):
        ctx = small_bench.context(TRAIN_STREAM)
        fwd = build_records(ctx, [0, 1, 2])
        rev = build_records(ctx, [2, 1, 0])
        assert [r.fd for r in fwd] == [r.fd for r in rev[::-1]]

    def test_parallel_matches_serial(self, small_bench):
        ctx = small_bench.context(TRAIN_STREAM)
        serial = build_records(ctx, range(4), jobs=1)
        parallel = build_records(ctx, range(4), jobs=2)
        assert [(r.fd, r.accuracy) for r in serial] == [(r.fd, r.accuracy) for r in parallel]

    def test_accuracy_reproducible_from_provenance(self, small_bench):
        rec, _ = small_bench.records(TRAIN_STREAM, [3])[0]
        recipe, data = generate_sample_set(small_bench.context(TRAIN_STREAM), 3)
        assert recipe == rec.recipe
        assert accuracy(small_bench.clf, data) == rec.accuracy


class TestMetaDataset:
    def test_split(self):
        assert split_indices(9) == (list(range(6)), [6, 7, 8])
        tr, va = split_indices(200)
        assert len(tr) == 133 and len(va) == 67

    def test_invariants_and_manifest_round_trip(self, small_bench, tmp_path):
        meta = small_bench.meta_dataset()
        assert len(meta) == small_bench.cfg.meta_size
        assert all(0 <= r.accuracy <= 1 and r.fd >= 0 for r in meta.records)
        assert sorted(meta.train_idx + meta.val_idx) == list(range(len(meta)))
        path = write_manifest(meta, tmp_path)
        back = read_manifest(path)
        assert back.manifest_hash() == meta.manifest_hash()
        assert back.provenance["classifier_sha256"] == small_bench.clf_hash
        lines = path.read_text().splitlines()
        assert len(lines) == len(meta)
        first = json.loads(lines[0])
        assert set(first) >= {"id", "recipe", "fd", "accuracy", "stats"}
        assert (tmp_path / first["stats"]).exists()

    def test_no_heldout_ids_in_training_manifest(self, small_bench):
        for line in small_bench.meta_dataset().manifest_lines():
            ids = {name for name, _ in json.loads(line)["recipe"]["transforms"]}
            assert not ids & set(T.HELD_OUT_CATALOG)
