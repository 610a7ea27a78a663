import numpy as np
import pytest

from conftest import assert_rel_close, random_netlist
from diffplace import autodiff as ad
from diffplace import ddpm
from diffplace import denoiser as dn
from diffplace.netlist import Netlist

# closed-form cosine alphabar at T=1000, offset 0.008, evaluated at 50 digits
# with mpmath: f(t)/f(0), f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2)
ALPHABAR_SPOTS = {
    250: 0.84701216132690473446,
    500: 0.49384359044063771332,
    750: 0.14427210238573571088,
}


class TestSchedule:
    def test_invariants_T1000(self):
        s = ddpm.cosine_schedule(1000)
        assert (np.diff(s.alphabar) < 0).all()
        assert s.alphabar[0] > 0.999
        assert s.alphabar[-1] < 1e-3
        assert (s.sigma >= 0).all()
        assert s.sigma[1] == 0.0

    def test_normalized_at_zero(self):
        s = ddpm.cosine_schedule(1000)
        assert s.alphabar[0] == 1.0

    def test_spot_values_match_closed_form(self):
        s = ddpm.cosine_schedule(1000)
        for t, expected in ALPHABAR_SPOTS.items():
            # cumprod of per-step ratios vs the direct closed form
            assert_rel_close(s.alphabar[t], expected, 1e-12)

    def test_alpha_floor(self):
        s = ddpm.cosine_schedule(1000)
        assert s.alpha[1:].min() >= 0.001

    def test_small_T(self):
        s = ddpm.cosine_schedule(10)
        assert s.alphabar[-1] < 1e-3
        assert (np.diff(s.alphabar) < 0).all()

    def test_bad_T(self):
        with pytest.raises(ValueError):
            ddpm.cosine_schedule(0)


class TestQSamplePredict:
    def test_t_zero_identity(self, rng):
        s = ddpm.cosine_schedule(1000)
        x0 = rng.normal(size=(5, 2))
        eps = rng.normal(size=(5, 2))
        np.testing.assert_array_equal(ddpm.q_sample(x0, 0, eps, s), x0)

    def test_exact_inverse(self, rng):
        s = ddpm.cosine_schedule(1000)
        x0 = rng.uniform(-1, 1, (50, 2))
        eps = rng.normal(size=(50, 2))
        for t in (1, 250, 500, 999, 1000):
            xt = ddpm.q_sample(x0, t, eps, s)
            back = ddpm.predict_x0(xt, t, eps, s, clip=None)
            # cancellation in (x_t - sb*eps) is amplified by 1/sqrt(abar_t)
            # at extreme t; 1e-11 is the double-precision identity there
            assert_rel_close(back, x0, 1e-11, atol=1e-11)

    def test_per_row_timesteps(self, rng):
        s = ddpm.cosine_schedule(1000)
        x0 = rng.uniform(-1, 1, (6, 2))
        eps = rng.normal(size=(6, 2))
        t = np.asarray([1, 10, 100, 500, 900, 1000])
        xt = ddpm.q_sample(x0, t, eps, s)
        for i, ti in enumerate(t):
            row = ddpm.q_sample(x0[i : i + 1], int(ti), eps[i : i + 1], s)
            np.testing.assert_array_equal(xt[i : i + 1], row)

    def test_true_eps_recovers_x0(self, rng):
        s = ddpm.cosine_schedule(1000)
        x0 = rng.uniform(-0.9, 0.9, (10, 2))
        eps = rng.normal(size=(10, 2))
        xt = ddpm.q_sample(x0, 700, eps, s)
        np.testing.assert_allclose(ddpm.predict_x0(xt, 700, eps, s), x0, atol=1e-12)

    def test_variance_matches_schedule(self, rng):
        s = ddpm.cosine_schedule(1000)
        t = 600
        x0 = np.zeros((1, 2))
        draws = np.asarray(
            [ddpm.q_sample(x0, t, rng.normal(size=(1, 2)), s)[0] for _ in range(4000)]
        )
        var = draws.var(axis=0)
        expected = 1.0 - s.alphabar[t]
        assert np.abs(var - expected).max() < 5 * expected / np.sqrt(4000)

    def test_clipping_engages_only_beyond_threshold(self):
        s = ddpm.cosine_schedule(1000)
        t = 900
        # adversarial eps_hat pushing the raw estimate far outside the canvas
        xt = np.asarray([[0.5, 0.5]])
        eps_big = np.asarray([[-50.0, 50.0]])
        clipped = ddpm.predict_x0(xt, t, eps_big, s)
        assert clipped[0, 0] == 1.5 and clipped[0, 1] == -1.5
        raw = ddpm.predict_x0(xt, t, eps_big, s, clip=None)
        assert abs(raw[0, 0]) > 1.5
        # in-range estimates pass through untouched (early step, mild noise)
        eps_small = np.asarray([[0.1, -0.1]])
        a = ddpm.predict_x0(xt, 100, eps_small, s)
        b = ddpm.predict_x0(xt, 100, eps_small, s, clip=None)
        assert np.abs(b).max() < 1.5
        np.testing.assert_array_equal(a, b)


class TestTrainingStep:
    def _batch(self, rng, count=3):
        out = []
        for _ in range(count):
            nl = random_netlist(rng, n=6, edge_count=8)
            out.append((nl, rng.uniform(-0.8, 0.8, (6, 2))))
        return out

    def test_initial_loss_near_two(self, rng):
        cfg = dn.DenoiserConfig(
            model_size=16, blocks=1, attgnn_size=8, resgnn_size=16,
            t_enc_dim=8, xy_enc_dim=8,
        )
        params = dn.init_params(cfg, 0)
        opt = ad.Adam(params)
        s = ddpm.cosine_schedule(1000)
        batch = self._batch(rng, count=40)
        loss = ddpm.training_step(batch, params, cfg, opt, s, rng)
        assert abs(loss - 2.0) < 0.2  # E||eps||^2 = 2 per node with zero head

    def test_deterministic_loss_curve(self, rng):
        cfg = dn.DenoiserConfig(
            model_size=8, blocks=1, attgnn_size=8, resgnn_size=8,
            t_enc_dim=8, xy_enc_dim=8, heads=2,
        )
        s = ddpm.cosine_schedule(100)
        curves = []
        for _ in range(2):
            r = np.random.default_rng(777)
            batch_rng = np.random.default_rng(5)
            batch = self._batch(batch_rng, count=3)
            params = dn.init_params(cfg, 1)
            opt = ad.Adam(params, lr=1e-3)
            losses = [
                ddpm.training_step(batch, params, cfg, opt, s, r) for _ in range(5)
            ]
            curves.append(losses)
        assert curves[0] == curves[1]

    def test_empty_batch_rejected(self, rng):
        cfg = dn.DenoiserConfig(model_size=8, blocks=1, attgnn_size=8, resgnn_size=8,
                                t_enc_dim=8, xy_enc_dim=8, heads=2)
        params = dn.init_params(cfg, 0)
        with pytest.raises(ValueError):
            ddpm.training_step([], params, cfg, ad.Adam(params),
                               ddpm.cosine_schedule(10), rng)


def oracle_eps_fn(target, schedule):
    """Analytic noise prediction for a point mass at `target`: inverts
    q_sample exactly, so predicted x0 is always the target."""

    def eps_fn(x, t_nodes):
        t = int(t_nodes[0])
        sa = schedule.sqrt_ab[t]
        sb = schedule.sqrt_1mab[t]
        return (x - sa * target) / max(sb, 1e-12)

    return eps_fn


class TestSampling:
    def test_oracle_denoiser_concentrates_on_target(self):
        s = ddpm.cosine_schedule(1000)
        nl = Netlist.build([(0.3, 0.3)])
        target = np.asarray([[0.4, -0.3]])
        gp = np.asarray([0, 1], dtype=np.int64)
        finals = []
        for seed in range(20):
            x, _ = ddpm.sample_batch(nl, gp, oracle_eps_fn(target, s), s, seed)
            finals.append(x[0])
        finals = np.asarray(finals)
        spread = np.abs(finals - target[0]).max()
        assert spread < 0.15
        assert np.abs(finals.mean(axis=0) - target[0]).max() < 0.03

    def test_deterministic_mode_hits_target_exactly(self):
        s = ddpm.cosine_schedule(1000)
        nl = Netlist.build([(0.3, 0.3)])
        target = np.asarray([[0.4, -0.3]])
        gp = np.asarray([0, 1], dtype=np.int64)
        x, _ = ddpm.sample_batch(
            nl, gp, oracle_eps_fn(target, s), s, 0, deterministic=True
        )
        np.testing.assert_allclose(x, target, atol=1e-9)

    def test_same_seed_identical(self, rng):
        s = ddpm.cosine_schedule(50)
        nl = random_netlist(rng, n=5, edge_count=6)
        gp = np.asarray([0, 5], dtype=np.int64)
        eps_fn = lambda x, t: np.zeros_like(x)
        a, _ = ddpm.sample_batch(nl, gp, eps_fn, s, seed=3)
        b, _ = ddpm.sample_batch(nl, gp, eps_fn, s, seed=3)
        np.testing.assert_array_equal(a, b)
        c, _ = ddpm.sample_batch(nl, gp, eps_fn, s, seed=4)
        assert not np.array_equal(a, c)

    def test_output_clamped_to_canvas(self, rng):
        s = ddpm.cosine_schedule(50)
        nl = random_netlist(rng, n=8, edge_count=4)
        gp = np.asarray([0, 8], dtype=np.int64)
        eps_fn = lambda x, t: np.zeros_like(x)
        x, _ = ddpm.sample_batch(nl, gp, eps_fn, s, seed=1)
        assert (np.abs(x) <= 1.0).all()

    def test_fixed_objects_pinned(self, rng):
        s = ddpm.cosine_schedule(50)
        sizes = np.full((6, 2), 0.2)
        fixed = np.asarray([True, False, False, False, False, True])
        nl = Netlist(sizes, fixed_mask=fixed)
        gp = np.asarray([0, 6], dtype=np.int64)
        fixed_coords = np.zeros((6, 2))
        fixed_coords[0] = (0.7, 0.7)
        fixed_coords[5] = (-0.7, -0.7)
        eps_fn = lambda x, t: np.zeros_like(x)
        x, _ = ddpm.sample_batch(nl, gp, eps_fn, s, 0, fixed_coords=fixed_coords)
        np.testing.assert_array_equal(x[0], [0.7, 0.7])
        np.testing.assert_array_equal(x[5], [-0.7, -0.7])

    def test_fixed_without_coords_rejected(self):
        s = ddpm.cosine_schedule(10)
        nl = Netlist(np.full((2, 2), 0.2), fixed_mask=np.asarray([True, False]))
        gp = np.asarray([0, 2], dtype=np.int64)
        with pytest.raises(ValueError, match="fixed"):
            ddpm.sample_batch(nl, gp, lambda x, t: np.zeros_like(x), s, 0)

    def test_snapshot_panel_count(self, rng):
        # snapshots at 200-step intervals: ceil(T/200) middles + x_T + x_0
        s = ddpm.cosine_schedule(1000)
        nl = random_netlist(rng, n=3)
        gp = np.asarray([0, 3], dtype=np.int64)
        eps_fn = lambda x, t: np.zeros_like(x)
        _, snaps = ddpm.sample_batch(nl, gp, eps_fn, s, 0, snapshot_every=200)
        assert len(snaps) == int(np.ceil(1000 / 200)) + 2
        assert snaps[0][0] == "x_T" and snaps[-1][0] == "x_0"

    def test_nonfinite_state_aborts_with_step(self, rng):
        s = ddpm.cosine_schedule(50)
        nl = random_netlist(rng, n=3)
        gp = np.asarray([0, 3], dtype=np.int64)

        def bad_eps(x, t):
            out = np.zeros_like(x)
            if int(t[0]) == 30:
                out[:] = np.nan
            return out

        with pytest.raises(RuntimeError, match="t=29"):
            ddpm.sample_batch(nl, gp, bad_eps, s, 0)
