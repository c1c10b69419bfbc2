import numpy as np
import pytest

from hycal import (
    ConfigError,
    SyntheticDomainSpec,
    domain_gravity_scenario,
    gaussian_entropy_nats,
    generate_domain,
    generate_domains,
)
from hycal.core import stack_embeddings
from hycal.synthetic import distribute_total, geometric_spectrum


def spec(**overrides):
    base = dict(
        domain_id=0,
        n_classes=3,
        dim=4,
        dispersion=5.0,
        scale=1.0,
        spectrum=(1.0, 1.0, 1.0, 1.0),
        train_count=6,
        test_count=4,
        seed=11,
    )
    base.update(overrides)
    return SyntheticDomainSpec(**base)


class TestGenerateDomain:
    def test_zero_scale_collapses_to_class_mean(self):
        task, entries = generate_domain(spec(n_classes=1, scale=0.0))
        vectors = stack_embeddings(task.train_samples + task.test_samples)
        assert np.all(vectors == vectors[0])
        # Default text noise is proportional to scale, so the anchor
        # coincides with the degenerate cluster too.
        assert np.array_equal(entries[0].text_embedding.values, vectors[0])

    def test_same_seed_is_bit_identical(self):
        t1, e1 = generate_domain(spec())
        t2, e2 = generate_domain(spec())
        assert stack_embeddings(t1.train_samples).tobytes() == stack_embeddings(
            t2.train_samples
        ).tobytes()
        assert stack_embeddings(t1.test_samples).tobytes() == stack_embeddings(
            t2.test_samples
        ).tobytes()
        for cid in e1:
            assert e1[cid].text_embedding.values.tobytes() == e2[
                cid
            ].text_embedding.values.tobytes()

    def test_different_seeds_differ(self):
        t1, _ = generate_domain(spec(seed=1))
        t2, _ = generate_domain(spec(seed=2))
        assert not np.array_equal(
            stack_embeddings(t1.train_samples), stack_embeddings(t2.train_samples)
        )

    def test_shot_counts_and_class_ids(self):
        task, entries = generate_domain(spec(train_count=(2, 3, 4)), class_id_start=10)
        assert task.class_ids == (10, 11, 12)
        assert task.shots == {10: 2, 11: 3, 12: 4}
        assert len(task.train_samples) == 9
        assert len(task.test_samples) == 12
        assert set(entries) == {10, 11, 12}

    def test_scaled_spectrum_raises_empirical_entropy(self):
        low, _ = generate_domain(spec(train_count=400, spectrum=(1.0,) * 4, seed=3))
        high, _ = generate_domain(spec(train_count=400, spectrum=(5.0,) * 4, seed=3))

        def mean_class_entropy(task):
            ents = []
            for cid in task.class_ids:
                x = stack_embeddings(task.train_for_class(cid))
                ents.append(gaussian_entropy_nats(np.cov(x.T, bias=True)))
            return float(np.mean(ents))

        assert mean_class_entropy(high) > mean_class_entropy(low)


class TestEntropyHelpers:
    def test_analytic_entropy_shift_under_scaling(self, rng):
        d = 5
        a = rng.standard_normal((d, d))
        cov = a @ a.T + np.eye(d)
        c = 3.7
        shift = gaussian_entropy_nats(c * cov) - gaussian_entropy_nats(cov)
        assert shift == pytest.approx((d / 2) * np.log(c), abs=1e-10)

    def test_rejects_indefinite(self):
        with pytest.raises(ConfigError):
            gaussian_entropy_nats(np.array([[1.0, 0.0], [0.0, -1.0]]))


class TestDistributeTotal:
    def test_even_split(self):
        assert distribute_total(12, 4) == (3, 3, 3, 3)

    def test_remainder_spread(self):
        assert distribute_total(11, 4) == (3, 3, 3, 2)
        assert sum(distribute_total(470, 47)) == 470

    def test_too_small_budget(self):
        with pytest.raises(ConfigError):
            distribute_total(3, 4)


class TestGravityScenario:
    def test_equal_ratio_balances_totals(self):
        stream, registry = domain_gravity_scenario(ratio=1.0, entropy_ratio=1.0, seed=0)
        totals = [t.total_shots for t in stream]
        assert abs(totals[0] - totals[1]) <= 1

    def test_nine_to_one_ratio(self):
        stream, _ = domain_gravity_scenario(ratio=9.0, entropy_ratio=1.0, seed=0)
        totals = [t.total_shots for t in stream]
        assert abs(totals[0] - totals[1] / 9.0) <= 1.0
        assert [len(t.class_ids) for t in stream] == [11, 47]

    def test_stream_invariants_hold(self):
        stream, registry = domain_gravity_scenario(ratio=4.0, entropy_ratio=2.0, seed=1)
        all_ids = stream.all_class_ids()
        assert len(set(all_ids)) == len(all_ids) == 58
        assert len(registry) == 58

    def test_invalid_ratios(self):
        with pytest.raises(ConfigError):
            domain_gravity_scenario(ratio=0.5, entropy_ratio=1.0)
        with pytest.raises(ConfigError):
            domain_gravity_scenario(ratio=1.0, entropy_ratio=0.2)


class TestSpecValidation:
    def test_bad_spectrum_length(self):
        with pytest.raises(ConfigError):
            spec(spectrum=(1.0, 2.0))

    def test_nonpositive_spectrum(self):
        with pytest.raises(ConfigError):
            spec(spectrum=(1.0, 0.0, 1.0, 1.0))

    def test_geometric_spectrum(self):
        s = geometric_spectrum(4, 8.0)
        assert s[0] == pytest.approx(1.0) and s[-1] == pytest.approx(8.0)
        assert all(b > a for a, b in zip(s, s[1:]))

    def test_generate_domains_assigns_disjoint_ids(self):
        stream, registry = generate_domains(
            [spec(domain_id=0, seed=1), spec(domain_id=1, seed=2)]
        )
        assert stream.tasks[0].class_ids == (0, 1, 2)
        assert stream.tasks[1].class_ids == (3, 4, 5)
        assert len(registry) == 6
