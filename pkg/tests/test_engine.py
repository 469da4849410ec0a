import numpy as np
import pytest
from scipy import stats

from brwlab import (
    OccupancyBatch,
    RetryBudgetExceeded,
    binary_law,
    embed_final,
    geometric_law,
    law_by_name,
    make_lattice,
    merge_batches,
    occupancy_spectrum,
    rejection_occupancy,
    rejection_z,
    sample_conditioned_spine,
    spine_occupancy,
    spine_z,
    survival_exact,
    unconditioned_occupancy,
    unconditioned_z,
)
from brwlab.engine import _StepTables, gw_population_step
from brwlab.streams import substream


class TestPopulationStep:
    @pytest.mark.parametrize("name", ["binary", "geometric", "poisson"])
    def test_moments_one_step(self, name):
        # a row of size z steps to a sum of z offspring draws
        law = law_by_name(name)
        tables = _StepTables(law)
        z = np.full(60_000, 7, dtype=np.int64)
        out = gw_population_step(z, tables, substream(70, name))
        se = out.std(ddof=1) / np.sqrt(len(out))
        assert abs(out.mean() - 7.0) < 4 * se
        var_se = out.var(ddof=1) * np.sqrt(2.0 / len(out))
        assert abs(out.var(ddof=1) - 7 * law.sigma2) < 5 * var_se

    def test_matches_direct_sampling(self):
        law = geometric_law()
        tables = _StepTables(law)
        z = np.full(20_000, 5, dtype=np.int64)
        fast = gw_population_step(z, tables, substream(71, 0))
        rng = substream(71, 1)
        slow = law.sample(rng, (20_000, 5)).sum(axis=1)
        assert stats.ks_2samp(fast, slow).pvalue > 1e-4

    def test_zero_rows_stay_zero(self):
        tables = _StepTables(binary_law())
        z = np.array([0, 3, 0], dtype=np.int64)
        out = gw_population_step(z, tables, substream(72, 0))
        assert out[0] == 0 and out[2] == 0


class TestFinalSizes:
    def test_unconditioned_survival(self):
        law = geometric_law()
        n, trials = 40, 200_000
        z = unconditioned_z(law, n, trials, substream(73, 0))
        p_hat = (z > 0).mean()
        exact = survival_exact(law, n)
        se = np.sqrt(exact * (1 - exact) / trials)
        assert abs(p_hat - exact) < 4 * se

    def test_spine_z_matches_treewise_sampler(self):
        law = geometric_law()
        n, trials = 25, 4000
        fast = spine_z(law, n, trials, substream(74, 0))
        slow = np.array([
            sample_conditioned_spine(law, n, substream(74, "tree", t)).z[n]
            for t in range(2000)
        ])
        assert fast.min() >= 1
        assert stats.ks_2samp(fast, slow).pvalue > 1e-4

    def test_spine_z_matches_rejection(self):
        law = binary_law()
        n, trials = 16, 5000
        fast = spine_z(law, n, trials, substream(75, 0))
        rej, attempts = rejection_z(law, n, trials, substream(75, 1))
        assert stats.ks_2samp(fast, rej).pvalue > 1e-4
        expected_attempts = trials / survival_exact(law, n)
        assert 0.75 * expected_attempts < attempts < 1.35 * expected_attempts

    def test_rejection_budget(self):
        law = binary_law()
        with pytest.raises(RetryBudgetExceeded):
            rejection_z(law, 64, 50, substream(76, 0), max_attempts=50)

    def test_deterministic(self):
        law = geometric_law()
        a = spine_z(law, 12, 300, substream(77, 0))
        b = spine_z(law, 12, 300, substream(77, 0))
        assert np.array_equal(a, b)


class TestOccupancy:
    def test_partition_identity_per_tree(self):
        law = geometric_law()
        lat = make_lattice(3)
        batch = spine_occupancy(law, lat, 20, 600, substream(78, 0), r=4)
        weights = np.arange(5)
        recon = batch.m_counts @ weights + batch.overflow_mass
        assert np.array_equal(recon, batch.z_final)
        assert batch.z_final.min() >= 1
        for j in range(1, 5):
            assert np.all(batch.m_counts[:, j] <= batch.z_final // j)

    def test_matches_treewise_pipeline(self):
        # engine batches against the explicit tree + embedding + spectrum path
        law = geometric_law()
        lat = make_lattice(3)
        n, r = 15, 3
        fast = spine_occupancy(law, lat, n, 2500, substream(79, 0), r=r)
        slow = np.empty((1200, r), dtype=np.int64)
        for t in range(1200):
            f = sample_conditioned_spine(law, n, substream(79, "tree", t))
            pos = embed_final(f, lat, substream(79, "pos", t))
            slow[t] = occupancy_spectrum(pos, r).counts[1:]
        for j in range(1, r + 1):
            a, b = fast.m_counts[:, j], slow[:, j - 1]
            se = np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
            assert abs(a.mean() - b.mean()) < 4 * se

    def test_matches_rejection_occupancy(self):
        law = binary_law()
        lat = make_lattice(3)
        n = 12
        fast = spine_occupancy(law, lat, n, 3000, substream(80, 0), r=2)
        rej, _ = rejection_occupancy(law, lat, n, 3000, substream(80, 1), r=2)
        for j in (1, 2):
            a, b = fast.m_counts[:, j], rej.m_counts[:, j]
            se = np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
            assert abs(a.mean() - b.mean()) < 4 * se
        se_z = np.sqrt(
            fast.z_final.var(ddof=1) / len(fast.z_final)
            + rej.z_final.var(ddof=1) / len(rej.z_final)
        )
        assert abs(fast.z_final.mean() - rej.z_final.mean()) < 4 * se_z

    def test_unconditioned_mass_is_survival_weighted(self):
        # E[Z_n] = 1 for a plain critical tree, dead trees reporting zero
        law = geometric_law()
        lat = make_lattice(3)
        batch = unconditioned_occupancy(law, lat, 15, 150_000, substream(81, 0), r=2)
        mass = batch.m_counts @ np.arange(3) + batch.overflow_mass
        se = mass.std(ddof=1) / np.sqrt(len(mass))
        assert abs(mass.mean() - 1.0) < 4 * se

    def test_ancestor_tracking_fields(self):
        law = geometric_law()
        lat = make_lattice(3)
        batch = spine_occupancy(
            law, lat, 12, 400, substream(82, 0), r=2, m=6, gap_j=1
        )
        assert batch.shared is not None and batch.gap is not None
        assert batch.ancestors_at_m is not None
        assert batch.shared.min() >= 0 and batch.gap.min() >= 0
        assert batch.ancestors_at_m.min() >= 1
        assert np.all(batch.shared <= batch.z_final)

    def test_shared_matches_treewise(self):
        from brwlab import label_ancestors, shared_site_count

        law = geometric_law()
        lat = make_lattice(3)
        n, m = 12, 6
        fast = spine_occupancy(law, lat, n, 2500, substream(83, 0), r=1, m=m)
        slow = np.empty(1200, dtype=np.int64)
        for t in range(1200):
            f = sample_conditioned_spine(law, n, substream(83, "tree", t), keep_left=True)
            label_ancestors(f, m)
            pos = embed_final(f, lat, substream(83, "pos", t))
            slow[t] = shared_site_count(f, pos, m)
        se = np.sqrt(
            fast.shared.var(ddof=1) / len(fast.shared) + slow.var(ddof=1) / len(slow)
        )
        assert abs(fast.shared.mean() - slow.mean()) < 4 * se

    def test_independent_spine_term(self):
        law = geometric_law()
        lat = make_lattice(3)
        batch = spine_occupancy(
            law, lat, 10, 300, substream(84, 0), r=2, m=5, gap_j=1,
            spine_term="independent",
        )
        assert batch.gap is not None and batch.gap.min() >= 0
        with pytest.raises(ValueError):
            spine_occupancy(
                law, lat, 10, 10, substream(84, 1), r=2, spine_term="typo"
            )

    def test_m_bounds(self):
        law = geometric_law()
        lat = make_lattice(3)
        with pytest.raises(ValueError):
            spine_occupancy(law, lat, 10, 10, substream(85, 0), r=2, m=11)


class TestMerge:
    def test_merge_concatenates(self):
        law = geometric_law()
        lat = make_lattice(3)
        parts = [
            spine_occupancy(law, lat, 8, 100, substream(86, k), r=2, m=4, gap_j=1)
            for k in range(3)
        ]
        merged = merge_batches(parts)
        assert len(merged.z_final) == 300
        assert merged.m_counts.shape == (300, 3)
        assert np.array_equal(merged.z_final[:100], parts[0].z_final)
        assert np.array_equal(merged.gap[200:], parts[2].gap)

    def test_merge_drops_optional_fields_when_absent(self):
        law = geometric_law()
        lat = make_lattice(3)
        a = spine_occupancy(law, lat, 8, 50, substream(87, 0), r=2, m=4)
        b = spine_occupancy(law, lat, 8, 50, substream(87, 1), r=2)
        merged = merge_batches([a, b])
        assert merged.shared is None and merged.gap is None
        assert len(merged.z_final) == 100

    def test_merge_empty(self):
        with pytest.raises(ValueError):
            merge_batches([])

    def test_batch_fields(self):
        b = OccupancyBatch(
            z_final=np.ones(2, dtype=np.int64),
            m_counts=np.zeros((2, 3), dtype=np.int64),
            overflow_sites=np.zeros(2, dtype=np.int64),
            overflow_mass=np.ones(2, dtype=np.int64),
        )
        assert b.shared is None and b.attempts == 0
