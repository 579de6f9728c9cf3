import dataclasses

import numpy as np
import pytest

from labeldist.labels import vote_entropy
from labeldist.synth import (ConfigError, GeneratorConfig, GroupSpec, SplitError, SplitSpec,
                             class_frequency_report, entropy_summary, generate,
                             latent_distribution, load_generator_config, make_rng, sample_votes,
                             split)


def small_config(**kw):
    groups = tuple(GroupSpec(f"g{i}", 30) for i in range(4))
    params = dict(class_count=5, feature_dim=4, groups=groups, seed=3)
    params.update(kw)
    return GeneratorConfig(**params)


class TestGenerate:
    def test_zero_ambiguity_is_unanimous(self):
        data = generate(small_config(ambiguity=0.0))
        assert np.all(data.counts.max(axis=1) == 10)
        assert not data.tied.any()
        np.testing.assert_array_equal(data.distributional, data.latent)

    def test_every_record_has_j_votes(self):
        data = generate(small_config(annotators=7))
        assert data.votes.shape == (len(data), 7)
        assert data.votes.min() >= 0 and data.votes.max() < 5
        assert np.all(data.counts.sum(axis=1) == 7)
        assert all(len(r.votes) == 7 for r in data.records())

    def test_same_seed_identical(self):
        a, b = generate(small_config()), generate(small_config())
        assert a.digest() == b.digest()
        np.testing.assert_array_equal(a.votes, b.votes)
        np.testing.assert_array_equal(a.latent, b.latent)

    def test_other_seed_differs(self):
        assert generate(small_config()).digest() != generate(small_config(seed=4)).digest()

    def test_features_standardised(self):
        f = generate(small_config()).features
        np.testing.assert_allclose(f.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(f.std(axis=0), 1, atol=1e-12)

    def test_latent_on_simplex_and_peaked_at_truth(self):
        data = generate(small_config(ambiguity=0.5))
        np.testing.assert_allclose(data.latent.sum(axis=1), 1, atol=1e-12)
        # group order in the config is class-major, so the true class is recoverable
        truth = np.tile(np.repeat(np.arange(5), 30), 4)
        assert np.all(data.latent[np.arange(len(data)), truth] > 0.5)

    def test_imbalanced_groups(self):
        groups = (GroupSpec("a", [5, 0, 2]), GroupSpec("b", 1))
        data = generate(GeneratorConfig(class_count=3, feature_dim=2, groups=groups))
        assert len(data) == 10
        assert list(data.group_ids).count("a") == 7

    @pytest.mark.parametrize("kw", [dict(class_count=9, feature_dim=4), dict(annotators=0),
                                    dict(ambiguity=-1.0), dict(class_separation=0.0),
                                    dict(groups=())])
    def test_config_errors(self, kw):
        with pytest.raises(ConfigError):
            generate(small_config(**kw))

    def test_duplicate_group_ids(self):
        with pytest.raises(ConfigError):
            small_config(groups=(GroupSpec("a", 1), GroupSpec("a", 2)))


class TestVoteSampler:
    def test_matches_multinomial_oracle(self):
        # compare per-class vote frequencies with numpy's multinomial sampler
        p = np.array([0.55, 0.25, 0.15, 0.05])
        votes = sample_votes(np.tile(p, (4000, 1)), 50, make_rng(0))
        ours = np.bincount(votes.ravel(), minlength=4) / votes.size
        ref = np.random.default_rng(1).multinomial(50, p, size=4000).sum(axis=0) / (50 * 4000)
        np.testing.assert_allclose(ours, p, atol=0.004)
        np.testing.assert_allclose(ours, ref, atol=0.006)

    @pytest.mark.parametrize("ambiguity", [0.05, 1.5])
    def test_thousand_vote_l1_matches_multinomial(self, ambiguity):
        groups = tuple(GroupSpec(f"g{i}", 100) for i in range(3))
        cfg = GeneratorConfig(class_count=10, feature_dim=16, groups=groups, annotators=1000,
                              ambiguity=ambiguity, group_shift=3.0, seed=7)
        data = generate(cfg)
        ours = np.abs(data.distributional - data.latent).sum(axis=1) <= 0.05
        ref = np.random.default_rng(0).multinomial(1000, data.latent) / 1000
        theirs = np.abs(ref - data.latent).sum(axis=1) <= 0.05
        assert abs(ours.mean() - theirs.mean()) < 0.04
        if ambiguity < 0.1:
            assert ours.mean() >= 0.99

    def test_l1_error_shrinks_like_inverse_sqrt(self):
        lat = latent_distribution(np.zeros((1, 2)), np.array([0]), np.eye(3, 2), 1.0, 1.0)
        lat = np.tile(lat, (2000, 1))
        errs = []
        for j in (100, 400, 1600):
            counts = np.stack([np.bincount(v, minlength=3) for v in
                               sample_votes(lat, j, make_rng(j))])
            errs.append(np.abs(counts / j - lat).sum(axis=1).mean())
        assert errs[0] / errs[1] == pytest.approx(2, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(2, rel=0.1)


class TestSplit:
    def test_partition_and_binomial_bounds(self):
        groups = tuple(GroupSpec(f"g{i}", 100) for i in range(10))
        data = generate(GeneratorConfig(class_count=10, feature_dim=8, groups=groups))
        spec = SplitSpec(["g0", "g1"], [f"g{i}" for i in range(2, 10)], seed=5)
        tr, va, te = split(data, spec)
        ids = [set(p.sample_ids) for p in (tr, va, te)]
        assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
        assert set().union(*ids) == set(data.sample_ids)
        assert len(va) + len(te) == 8000
        assert abs(len(va) - 4000) < 4 * np.sqrt(8000 * 0.25)
        assert set(tr.group_ids) == {"g0", "g1"}

    def test_all_train(self):
        data = generate(small_config())
        tr, va, te = split(data, SplitSpec(["g0", "g1", "g2", "g3"], []))
        assert len(tr) == len(data) and len(va) == len(te) == 0

    def test_unknown_group(self):
        with pytest.raises(SplitError):
            split(generate(small_config()), SplitSpec(["g0"], ["g1", "g2"]))

    def test_overlapping_groups_rejected(self):
        with pytest.raises(SplitError):
            SplitSpec(["g0", "g1"], ["g1"])

    def test_seeded(self):
        data = generate(small_config())
        spec = SplitSpec(["g0"], ["g1", "g2", "g3"], seed=9)
        a, b = split(data, spec), split(data, spec)
        assert all(x.digest() == y.digest() for x, y in zip(a, b))


class TestReports:
    def test_frequency_rows(self):
        data = generate(small_config())
        parts = split(data, SplitSpec(["g0", "g1"], ["g2", "g3"], seed=2))
        rep = class_frequency_report(*parts)
        np.testing.assert_allclose(rep.fractions.sum(axis=1), 1, atol=1e-9)
        assert list(rep.set_totals) == [len(p) for p in parts]
        rows = rep.to_rows()
        assert rows[0] == ["class", "train", "val", "test", "total"]
        assert rows[-1][-1] == len(data)

    def test_single_class_in_train(self):
        data = generate(GeneratorConfig(class_count=2, feature_dim=1, ambiguity=0.0,
                                        groups=(GroupSpec("a", [4, 0]), GroupSpec("b", [0, 3]))))
        tr, va, te = split(data, SplitSpec(["a"], ["b"]))
        rep = class_frequency_report(tr, va, te)
        np.testing.assert_allclose(rep.fractions[0], [1.0, 0.0, 0.0])

    def test_unanimous_entropy_single_bucket(self):
        summ = entropy_summary(generate(small_config(ambiguity=0.0)))
        assert summ.histograms["all"][0] == summ.sizes["all"] == 600
        assert summ.means["all"] == 0.0

    def test_bucket_counts_and_groups(self):
        data = generate(small_config())
        summ = entropy_summary(data, {"low": [0, 1], "high": [2, 3, 4]})
        assert sum(h.sum() for h in summ.histograms.values()) == len(data)
        with pytest.raises(ValueError):
            entropy_summary(data, {"none": []})

    def test_ambiguity_raises_entropy(self):
        # paired seeds, 600 samples each
        for seed in range(3):
            zero = generate(small_config(ambiguity=0.0, seed=seed))
            amb = generate(small_config(ambiguity=1.0, seed=seed))
            assert vote_entropy(amb.distributional).mean() > vote_entropy(zero.distributional).mean()

    def test_config_round_trip(self, tmp_path):
        import json
        cfg = small_config()
        spec = SplitSpec(["g0"], ["g1", "g2", "g3"], val_fraction=0.3, seed=4)
        path = tmp_path / "gen.json"
        path.write_text(json.dumps({"generator": cfg.to_dict(), "split": spec.to_dict()}))
        gen, sp = load_generator_config(path)
        assert gen == cfg and dataclasses.asdict(sp) == dataclasses.asdict(spec)
