import numpy as np
import pytest
from oracles import depth2_occupancy_exact

from brwlab import (
    binary_law,
    collect_occupancy,
    estimate_A,
    estimate_mu_kappa,
    fourth_moment_ratio,
    geometric_law,
    make_lattice,
    make_law,
    sigma_tilde,
    spine_occupancy,
    unconditioned_occupancy,
)
from brwlab.streams import substream

THREE_POINT = {0: 0.25, 1: 0.5, 2: 0.25}


class TestKappa:
    def test_depth2_matches_enumeration(self):
        # unconditioned E[M_2(j)] from full enumeration of shapes and steps
        law = binary_law()
        lat = make_lattice(3)
        exact = depth2_occupancy_exact(law.pmf, 3)
        est = estimate_mu_kappa(law, lat, 2, trials=150_000, rng=substream(110, 0), r=2)
        assert abs(est.value_at(1) - exact["mu1"]) < 4 * est.se_at(1)
        assert abs(est.value_at(2) - exact["mu2"]) < 4 * est.se_at(2)
        assert est.survival == pytest.approx(exact["survival"], abs=1e-12)

    def test_weighted_total_is_one(self):
        # sum_j j mu_n(j) + overflow equals E[Z_n] = 1 exactly in law
        law = geometric_law()
        lat = make_lattice(3)
        est = estimate_mu_kappa(law, lat, 12, trials=40_000, rng=substream(110, 1), r=3)
        assert abs(est.weighted_total - 1.0) < 4 * est.weighted_total_se

    def test_overflow_share_bounds(self):
        law = geometric_law()
        lat = make_lattice(3)
        est = estimate_mu_kappa(law, lat, 10, trials=5_000, rng=substream(110, 2), r=2)
        assert 0.0 <= est.overflow_share < 1.0
        big_r = estimate_mu_kappa(law, lat, 10, trials=5_000, rng=substream(110, 2), r=12)
        assert big_r.overflow_share < est.overflow_share + 1e-12

    def test_precomputed_sample(self):
        law = binary_law()
        lat = make_lattice(3)
        batch = collect_occupancy(law, lat, 6, 2_000, substream(110, 3), r=2)
        est = estimate_mu_kappa(law, lat, 6, sample=batch, r=2)
        assert est.trials == 2_000
        with pytest.raises(ValueError):
            estimate_mu_kappa(law, lat, 6, r=2)

    def test_batching_matches_single_pass(self):
        # the batch split must not change the collected law, only the stream use
        law = geometric_law()
        lat = make_lattice(3)
        split = collect_occupancy(law, lat, 8, 3_000, substream(110, 4), r=2, batch_size=500)
        whole = collect_occupancy(law, lat, 8, 3_000, substream(110, 5), r=2)
        assert len(split.z_final) == len(whole.z_final) == 3_000
        for field in ("z_final", "m_counts"):
            a = getattr(split, field).astype(np.float64)
            b = getattr(whole, field).astype(np.float64)
            se = np.sqrt(a.var(axis=0, ddof=1) / len(a) + b.var(axis=0, ddof=1) / len(b))
            assert np.all(np.abs(a.mean(axis=0) - b.mean(axis=0)) <= 4 * se + 1e-12)

    def test_to_dict_roundtrip(self):
        law = binary_law()
        lat = make_lattice(3)
        est = estimate_mu_kappa(law, lat, 4, trials=500, rng=substream(110, 6), r=2)
        d = est.to_dict()
        assert d["law"] == "binary" and len(d["kappa"]) == 2


class TestCovariance:
    def test_depth2_matches_enumeration(self):
        law = binary_law()
        lat = make_lattice(3)
        exact = depth2_occupancy_exact(law.pmf, 3)
        est = estimate_A(
            law, lat, 2, trials=150_000, rng=substream(111, 0), r=2, n_boot=120,
        )
        for (j, k), key in [((1, 1), "a11"), ((1, 2), "a12"), ((2, 2), "a22")]:
            assert abs(est.value_at(j, k) - exact[key]) < 4 * est.se_at(j, k), key

    def test_three_point_matches_enumeration(self):
        law = make_law(THREE_POINT, name="three-point")
        lat = make_lattice(3)
        exact = depth2_occupancy_exact(THREE_POINT, 3)
        est = estimate_A(
            law, lat, 2, trials=150_000, rng=substream(111, 1), r=2, n_boot=120,
        )
        assert abs(est.value_at(1, 1) - exact["a11"]) < 4 * est.se_at(1, 1)

    def test_symmetric_and_psd(self):
        law = geometric_law()
        lat = make_lattice(3)
        est = estimate_A(law, lat, 10, trials=8_000, rng=substream(111, 2), r=3, n_boot=0)
        assert np.array_equal(est.matrix, est.matrix.T)
        assert np.linalg.eigvalsh(est.matrix).min() >= -1e-10

    def test_vanishing_on_extinction_identity(self):
        # survival-scaled conditioned moments equal plain unconditioned ones
        law = binary_law()
        lat = make_lattice(3)
        n, r = 6, 2
        cond = estimate_A(law, lat, n, trials=60_000, rng=substream(111, 3), r=r, n_boot=80)
        plain = unconditioned_occupancy(law, lat, n, 400_000, substream(111, 4), r=r)
        m = plain.m_counts[:, 1 : r + 1].astype(np.float64)
        z = plain.z_final.astype(np.float64)
        mu = m.mean(axis=0)
        u = m - np.outer(z, mu)
        a_plain = u.T @ u / len(z)
        boot = substream(111, 5)
        boots = np.empty((80, r, r))
        for b in range(80):
            idx = boot.integers(0, len(z), len(z))
            ub = m[idx] - np.outer(z[idx], m[idx].mean(axis=0))
            boots[b] = ub.T @ ub / len(z)
        se_plain = boots.std(axis=0, ddof=1)
        gap = np.abs(cond.matrix - a_plain)
        assert np.all(gap <= 4 * np.sqrt(cond.se**2 + se_plain**2))

    def test_bootstrap_se_positive(self):
        law = binary_law()
        lat = make_lattice(3)
        est = estimate_A(law, lat, 4, trials=2_000, rng=substream(111, 6), r=2, n_boot=60)
        assert np.all(est.se > 0)


class TestFourthMoment:
    def test_companion_consistent_with_a(self):
        law = binary_law()
        lat = make_lattice(3)
        batch = collect_occupancy(law, lat, 8, 20_000, substream(112, 0), r=1)
        est = estimate_A(law, lat, 8, sample=batch, r=1, n_boot=0)
        chk = fourth_moment_ratio(
            law, lat, 8, j=1, sample=batch, n_boot=40, boot_rng=substream(112, 1)
        )
        assert chk.companion == pytest.approx(
            3.0 * law.sigma2 * est.value_at(1, 1) ** 2, rel=1e-12
        )
        assert chk.ratio == pytest.approx(chk.value / chk.companion, rel=1e-12)
        assert chk.ratio_se > 0 and chk.trials == 20_000

    def test_ratio_positive(self):
        law = geometric_law()
        lat = make_lattice(3)
        chk = fourth_moment_ratio(
            law, lat, 12, j=1, trials=8_000, rng=substream(112, 2), n_boot=30
        )
        assert chk.value > 0 and chk.companion > 0


class TestSigmaTilde:
    def test_scaling(self):
        law = geometric_law()
        lat = make_lattice(3)
        est = estimate_A(law, lat, 8, trials=4_000, rng=substream(113, 0), r=2, n_boot=0)
        fac = sigma_tilde(est, law)
        want = (law.sigma2 / 2.0) * (est.matrix + est.matrix.T) / 2.0
        assert np.allclose(fac.factor @ fac.factor.T, want, atol=1e-9)
        assert fac.r == 2
