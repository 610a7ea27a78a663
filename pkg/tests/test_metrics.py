import numpy as np
import pytest

from conftest import (
    assert_rel_close,
    central_diff,
    mc_union_area,
    nondegenerate_coords,
    random_coords,
    random_netlist,
)
from diffplace import metrics
from diffplace.netlist import Netlist, Pin, Placement


def naive_hpwl(netlist, coords):
    ptr, owner, off = netlist.hpwl_csr()
    total = 0.0
    for k in range(ptr.shape[0] - 1):
        s, e = int(ptr[k]), int(ptr[k + 1])
        if e <= s:
            continue
        xs = [coords[owner[t], 0] + off[t, 0] for t in range(s, e)]
        ys = [coords[owner[t], 1] + off[t, 1] for t in range(s, e)]
        total += (max(xs) - min(xs)) + (max(ys) - min(ys))
    return total


class TestHpwl:
    def test_two_pin_net_across_canvas(self):
        nl = Netlist.build(
            [(0.1, 0.1)] * 2, nets=[[Pin(0, 0.0, 0.0), Pin(1, 0.0, 0.0)]]
        )
        coords = np.asarray([[-1.0, -1.0], [1.0, 1.0]])
        assert metrics.hpwl(nl, coords) == 4.0

    def test_coincident_pins_contribute_zero(self):
        nl = Netlist.build(
            [(0.2, 0.2)] * 2,
            nets=[[Pin(0, 0.1, 0.0), Pin(1, -0.1, 0.0)]],
        )
        coords = np.asarray([[0.0, 0.0], [0.2, 0.0]])  # both pins at (0.1, 0)
        assert metrics.hpwl(nl, coords) == 0.0

    def test_empty_netlist(self):
        nl = Netlist.build([(0.1, 0.1)])
        assert metrics.hpwl(nl, np.zeros((1, 2))) == 0.0

    def test_matches_naive_loop(self, rng):
        # 50 random nets over 20 objects, many instances
        for _ in range(10):
            nl = random_netlist(rng, n=20, nets_count=50)
            coords = random_coords(rng, 20)
            assert_rel_close(metrics.hpwl(nl, coords), naive_hpwl(nl, coords), 1e-12)

    def test_edges_without_nets_use_two_pin_semantics(self, rng):
        nl = random_netlist(rng, n=10, edge_count=25)
        coords = random_coords(rng, 10)
        assert_rel_close(metrics.hpwl(nl, coords), naive_hpwl(nl, coords), 1e-12)

    def test_translation_invariance_and_scaling(self, rng):
        nl = random_netlist(rng, n=12, nets_count=20)
        coords = random_coords(rng, 12)
        shifted = coords + np.asarray([0.31, -0.17])
        assert_rel_close(metrics.hpwl(nl, coords), metrics.hpwl(nl, shifted), 1e-12)
        # uniform scaling of centers and offsets scales HPWL linearly
        k = 1.7
        scaled = Netlist(
            nl.sizes,
            nl.edges,
            nl.edge_attr,
            nets=(nl.net_ptr, nl.net_pin_owner, nl.net_pin_offset * k),
        )
        assert_rel_close(
            metrics.hpwl(scaled, coords * k), k * metrics.hpwl(nl, coords), 1e-12
        )


class TestHpwlSubgradient:
    def test_two_pin_unit_gradient(self):
        nl = Netlist.build(
            [(0.1, 0.1)] * 2, nets=[[Pin(0, 0.0, 0.0), Pin(1, 0.0, 0.0)]]
        )
        coords = np.asarray([[-0.5, 0.0], [0.5, 0.3]])
        _, g = metrics.hpwl_subgradient(nl, coords)
        np.testing.assert_array_equal(g, [[-1.0, -1.0], [1.0, 1.0]])

    def test_interior_pin_gets_zero(self):
        nl = Netlist.build(
            [(0.1, 0.1)] * 3,
            nets=[[Pin(0, 0.0, 0.0), Pin(1, 0.0, 0.0), Pin(2, 0.0, 0.0)]],
        )
        coords = np.asarray([[-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]])
        _, g = metrics.hpwl_subgradient(nl, coords)
        assert g[1, 0] == 0.0

    def test_matches_finite_differences(self, rng):
        for _ in range(5):
            nl = random_netlist(rng, n=8, nets_count=12)
            coords = nondegenerate_coords(rng, nl)
            _, g = metrics.hpwl_subgradient(nl, coords)
            fd = central_diff(lambda c: metrics.hpwl(nl, c), coords, h=1e-6)
            assert_rel_close(g, fd, 1e-5)


class TestSignedDistance:
    def test_touching_squares(self):
        nl = Netlist.build([(1.0, 1.0)] * 2)
        coords = np.asarray([[0.0, 0.0], [1.0, 0.0]])
        assert metrics.signed_distance(nl, coords, 0, 1) == 0.0

    def test_coincident_squares(self):
        nl = Netlist.build([(0.3, 0.3)] * 2)
        coords = np.zeros((2, 2))
        assert metrics.signed_distance(nl, coords, 0, 1) == pytest.approx(-0.3)

    def test_symmetry_and_interval_oracle(self, rng):
        nl = random_netlist(rng, n=10)
        coords = random_coords(rng, 10)
        w, h = nl.sizes[:, 0], nl.sizes[:, 1]
        for _ in range(50):
            i, j = rng.choice(10, 2, replace=False)
            d = metrics.signed_distance(nl, coords, int(i), int(j))
            assert d == metrics.signed_distance(nl, coords, int(j), int(i))
            # interval-overlap oracle: overlap with positive area iff both
            # axis intervals strictly overlap
            ox = abs(coords[i, 0] - coords[j, 0]) < (w[i] + w[j]) / 2
            oy = abs(coords[i, 1] - coords[j, 1]) < (h[i] + h[j]) / 2
            assert (d < 0) == (ox and oy)

    def test_same_object_rejected(self, rng):
        nl = random_netlist(rng, n=3)
        with pytest.raises(ValueError):
            metrics.signed_distance(nl, np.zeros((3, 2)), 1, 1)


class TestLegalityPotential:
    def test_legal_placement_is_zero(self):
        nl = Netlist.build([(0.4, 0.4), (0.4, 0.4)])
        coords = np.asarray([[-0.5, 0.0], [0.5, 0.0]])
        v, g = metrics.legality_potential(nl, coords)
        assert v == 0.0
        np.testing.assert_array_equal(g, np.zeros((2, 2)))

    def test_coincident_squares_value(self):
        w = 0.3
        nl = Netlist.build([(w, w)] * 2)
        v, _ = metrics.legality_potential(nl, np.zeros((2, 2)))
        assert v == pytest.approx(w * w)

    def test_boundary_term(self):
        # one object sticking 0.1 out of the right wall
        nl = Netlist.build([(0.4, 0.4)])
        v, g = metrics.legality_potential(nl, np.asarray([[0.9, 0.0]]))
        assert v == pytest.approx(0.01)
        assert g[0, 0] == pytest.approx(0.2)  # descent pushes it back inside

    def test_gradient_matches_finite_differences(self, rng):
        done = 0
        while done < 8:
            nl = random_netlist(rng, n=7, max_size=0.6)
            coords = nondegenerate_coords(rng, nl)
            v, g = metrics.legality_potential(nl, coords)
            if v == 0.0:
                continue  # want overlapping instances
            fd = central_diff(
                lambda c: metrics.legality_potential(nl, c)[0], coords, h=1e-6
            )
            assert_rel_close(g, fd, 1e-5)
            done += 1

    def test_zero_potential_iff_unit_legality(self, rng):
        for _ in range(30):
            nl = random_netlist(rng, n=6, max_size=0.5)
            coords = random_coords(rng, 6)
            v, _ = metrics.legality_potential(nl, coords)
            score = metrics.legality_score(nl, coords)
            assert (v == 0.0) == (score == 1.0)


class TestLegalityScore:
    def test_disjoint_in_bounds_exactly_one(self, rng):
        nl = Netlist.build([(0.3, 0.2), (0.25, 0.4), (0.1, 0.1)])
        coords = np.asarray([[-0.6, -0.6], [0.5, 0.5], [0.0, 0.0]])
        assert metrics.legality_score(nl, coords) == 1.0

    def test_half_overlap_strip(self):
        nl = Netlist.build([(1.0, 1.0), (1.0, 1.0)])
        coords = np.asarray([[-0.25, 0.0], [0.25, 0.0]])
        assert metrics.legality_score(nl, coords) == pytest.approx(0.75)

    def test_zero_area_netlist_rejected(self):
        nl = Netlist(np.zeros((1, 2)))
        with pytest.raises(ValueError):
            metrics.legality_score(nl, np.zeros((1, 2)))

    def test_out_of_bounds_clipping(self):
        # object half outside the canvas: union is clipped, sum is not
        nl = Netlist.build([(0.4, 0.4)])
        coords = np.asarray([[1.0, 0.0]])
        assert metrics.legality_score(nl, coords) == pytest.approx(0.5)

    def test_matches_monte_carlo_oracle(self, rng):
        for trial in range(5):
            n = 200
            nl = random_netlist(rng, n=n, max_size=0.3)
            coords = random_coords(rng, n, -1.0, 1.0)
            score = metrics.legality_score(nl, coords)
            union_mc = mc_union_area(nl, coords, n_side=1000, seed=trial)
            score_mc = union_mc / float(nl.areas().sum())
            assert abs(score - score_mc) <= 2e-3


class TestRudy:
    def test_empty_netlist(self):
        nl = Netlist.build([(0.1, 0.1)])
        grid, scalar = metrics.rudy(nl, np.zeros((1, 2)), grid_n=8)
        assert scalar == 0.0 and grid.sum() == 0.0

    def test_single_net_covering_one_cell(self):
        # net box exactly equal to cell (0, 0) of an 8x8 grid
        nl = Netlist.build(
            [(0.1, 0.1)] * 2,
            nets=[[Pin(0, 0.0, 0.0), Pin(1, 0.0, 0.0)]],
        )
        coords = np.asarray([[-1.0, -1.0], [-0.75, -0.75]])
        grid, _ = metrics.rudy(nl, coords, grid_n=8)
        dx = dy = 0.25
        w = (dx + dy) / (dx * dy)
        assert grid[0, 0] == pytest.approx(w)  # full fractional overlap
        assert grid.sum() == pytest.approx(w)  # nothing anywhere else

    def test_matches_per_cell_integration_oracle(self, rng):
        grid_n = 4
        pitch = 2.0 / grid_n
        for _ in range(5):
            nl = random_netlist(rng, n=10, nets_count=15)
            coords = random_coords(rng, 10)
            grid, scalar = metrics.rudy(nl, coords, grid_n=grid_n)
            # oracle: exact overlap integration per cell
            ptr, owner, off = nl.hpwl_csr()
            pos = coords[owner] + off
            expect = np.zeros((grid_n, grid_n))
            for k in range(ptr.shape[0] - 1):
                s, e = int(ptr[k]), int(ptr[k + 1])
                xs, ys = pos[s:e, 0], pos[s:e, 1]
                dx = max(xs.max() - xs.min(), pitch)
                dy = max(ys.max() - ys.min(), pitch)
                cx, cy = (xs.max() + xs.min()) / 2, (ys.max() + ys.min()) / 2
                lox, hix = max(cx - dx / 2, -1), min(cx + dx / 2, 1)
                loy, hiy = max(cy - dy / 2, -1), min(cy + dy / 2, 1)
                w = (dx + dy) / (dx * dy)
                for i in range(grid_n):
                    for j in range(grid_n):
                        ox = min(hix, -1 + (i + 1) * pitch) - max(lox, -1 + i * pitch)
                        oy = min(hiy, -1 + (j + 1) * pitch) - max(loy, -1 + j * pitch)
                        expect[i, j] += w * max(ox, 0) * max(oy, 0) / pitch**2
            assert np.abs(grid - expect).max() <= 1e-9
            flat = np.sort(expect.reshape(-1))[::-1]
            top = max(1, int(np.ceil(flat.size / 10)))
            assert scalar == pytest.approx(flat[:top].mean())

    def test_mass_conservation(self, rng):
        # total mass equals sum of weight * covered fraction / cell area
        nl = random_netlist(rng, n=8, nets_count=12)
        coords = random_coords(rng, 8)
        grid_n = 32
        pitch = 2.0 / grid_n
        grid, _ = metrics.rudy(nl, coords, grid_n=grid_n)
        ptr, owner, off = nl.hpwl_csr()
        pos = coords[owner] + off
        expect = 0.0
        for k in range(ptr.shape[0] - 1):
            s, e = int(ptr[k]), int(ptr[k + 1])
            xs, ys = pos[s:e, 0], pos[s:e, 1]
            dx = max(xs.max() - xs.min(), pitch)
            dy = max(ys.max() - ys.min(), pitch)
            cx, cy = (xs.max() + xs.min()) / 2, (ys.max() + ys.min()) / 2
            covered = (min(cx + dx / 2, 1) - max(cx - dx / 2, -1)) * (
                min(cy + dy / 2, 1) - max(cy - dy / 2, -1)
            )
            expect += (dx + dy) / (dx * dy) * covered / pitch**2
        assert_rel_close(grid.sum(), expect, 1e-9)


class TestHpwlRatio:
    def test_plain_quotients(self):
        assert metrics.hpwl_ratio(4.0, 4.0) == 1.0
        assert metrics.hpwl_ratio(3.0, 4.0) == 0.75

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            metrics.hpwl_ratio(1.0, 0.0)


def test_evaluate_report(rng):
    nl = random_netlist(rng, n=6, nets_count=8)
    coords = random_coords(rng, 6)
    rep = metrics.evaluate(nl, coords, grid_n=16, unit_scale=100.0)
    assert rep.hpwl_raw == pytest.approx(rep.hpwl * 100.0)
    assert 0 < rep.legality <= 1.0
    d = rep.to_dict()
    assert set(d) == {"hpwl", "legality", "rudy_scalar", "hpwl_raw"}


def test_purity(rng):
    nl = random_netlist(rng, n=10, nets_count=10)
    coords = random_coords(rng, 10)
    a = metrics.evaluate(nl, coords, grid_n=8)
    b = metrics.evaluate(nl, coords, grid_n=8)
    assert a.hpwl == b.hpwl and a.legality == b.legality
    np.testing.assert_array_equal(a.rudy_map, b.rudy_map)
