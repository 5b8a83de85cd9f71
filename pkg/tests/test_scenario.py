"""Scenario sampling: quadratic variation bounds, reproducibility, the
deterministic family recipe, textual round trips."""

import numpy as np
import pytest

from gsde.expr import parse
from gsde.gcalc import AmbiguityBounds
from gsde.scenario import (
    BangBangInTime,
    BangBangInX,
    Constant,
    FeedbackSignVxx,
    PiecewiseRandom,
    ScenarioError,
    enumerate_family,
    parse_scenario,
    sample_path,
    standard_increments,
    uniform_grid,
    variance_stream,
)

B = AmbiguityBounds(0.5, 1.0)


class TestGrid:
    def test_uniform_grid_endpoints(self):
        g = uniform_grid(0.0, 200.0, 1e-3)
        assert g.size == 200001
        assert g[0] == 0.0
        assert g[-1] == 200.0

    def test_uniform_grid_rejects_bad_args(self):
        with pytest.raises(ValueError):
            uniform_grid(0.0, -1.0, 0.1)
        with pytest.raises(ValueError):
            uniform_grid(0.0, 1.0, 0.0)


class TestQuadraticVariation:
    def test_qv_exact_at_band_top(self):
        grid = uniform_grid(0.0, 200.0, 1e-3)
        pb = sample_path(Constant(1.0), B, grid, seed=7)
        # v = 1.0 makes dqv = dtau bitwise; grid increments telescope
        assert pb.qv[-1] == 200.0

    def test_qv_exact_at_band_bottom(self):
        grid = uniform_grid(0.0, 200.0, 1e-3)
        pb = sample_path(Constant(0.25), B, grid, seed=7)
        assert pb.qv[-1] == 50.0

    def test_per_step_sandwich_is_exact(self):
        """Every dqv increment sits in [v_lower*dtau, v_upper*dtau] with no
        tolerance: rounding of v*dtau is monotone in v at fixed dtau > 0."""
        grid = uniform_grid(0.0, 10.0, 0.01)
        dtau = np.diff(grid)
        for s in (
            Constant(0.6),
            BangBangInTime((3.0, 7.0), (1.0, 0.25)),
            PiecewiseRandom(0.5),
        ):
            pb = sample_path(s, B, grid, seed=42)
            assert np.all(pb.dqv >= B.v_lower * dtau)
            assert np.all(pb.dqv <= B.v_upper * dtau)

    def test_out_of_band_rate_is_clamped(self):
        grid = uniform_grid(0.0, 1.0, 0.1)
        pb_low = sample_path(Constant(0.01), B, grid, seed=1)
        pb_high = sample_path(Constant(50.0), B, grid, seed=1)
        assert np.all(pb_low.v == B.v_lower)
        assert np.all(pb_high.v == B.v_upper)


class TestReproducibility:
    def test_same_seed_same_path(self):
        grid = uniform_grid(0.0, 1.0, 0.01)
        a = sample_path(PiecewiseRandom(0.1), B, grid, seed=3, path_index=5)
        b = sample_path(PiecewiseRandom(0.1), B, grid, seed=3, path_index=5)
        np.testing.assert_array_equal(a.dW, b.dW)
        np.testing.assert_array_equal(a.v, b.v)
        np.testing.assert_array_equal(a.dB, b.dB)

    def test_different_paths_differ(self):
        grid = uniform_grid(0.0, 1.0, 0.01)
        a = sample_path(Constant(1.0), B, grid, seed=3, path_index=0)
        b = sample_path(Constant(1.0), B, grid, seed=3, path_index=1)
        assert not np.array_equal(a.dW, b.dW)

    def test_wiener_draws_independent_of_scenario(self):
        """Common random numbers: the Wiener stream never depends on the
        scenario, including level-drawing ones."""
        grid = uniform_grid(0.0, 1.0, 0.01)
        a = sample_path(Constant(1.0), B, grid, seed=3)
        b = sample_path(PiecewiseRandom(0.05), B, grid, seed=3)
        np.testing.assert_array_equal(a.dW, b.dW)

    def test_chunked_draws_match_whole_path(self):
        z_all = standard_increments(11, 2, 1000)
        import gsde.scenario as sc

        gen = sc.stream_generator(11, sc.WIENER_STREAM, 2)
        chunks = np.concatenate([gen.standard_normal(256) for _ in range(3)]
                                + [gen.standard_normal(1000 - 3 * 256)])
        np.testing.assert_array_equal(z_all, chunks)

    def test_increment_moments(self):
        grid = uniform_grid(0.0, 1.0, 0.5)
        zs = np.array(
            [sample_path(Constant(1.0), B, grid, seed=0, path_index=p).dW[0]
             for p in range(10000)]
        )
        # dW ~ N(0, 0.5); mean within 4 standard errors
        assert abs(zs.mean()) < 4 * np.sqrt(0.5) / 100
        assert zs.std() == pytest.approx(np.sqrt(0.5), rel=0.05)


class TestScenarioKinds:
    def test_bangbang_time_levels(self):
        s = BangBangInTime((2.0, 5.0), (1.0, 0.25))
        grid = uniform_grid(0.0, 10.0, 1.0)
        pb = sample_path(s, B, grid, seed=0)
        # levels[j] applies for t < times[j]; last level holds afterwards
        np.testing.assert_array_equal(pb.v[:2], [1.0, 1.0])
        np.testing.assert_array_equal(pb.v[2:5], [0.25, 0.25, 0.25])
        np.testing.assert_array_equal(pb.v[5:], [0.25] * 5)

    def test_bangbang_time_validation(self):
        with pytest.raises(ValueError):
            BangBangInTime((5.0, 2.0), (1.0, 0.25))
        with pytest.raises(ValueError):
            BangBangInTime((), ())
        with pytest.raises(ValueError):
            BangBangInTime((1.0,), (1.0, 0.25))

    def test_piecewise_random_dwell(self):
        s = PiecewiseRandom(0.25)
        grid = uniform_grid(0.0, 1.0, 0.05)
        pb = sample_path(s, B, grid, seed=5)
        # constant within each dwell block
        for blk in range(4):
            vals = pb.v[blk * 5 : (blk + 1) * 5]
            assert np.all(vals == vals[0])
        assert np.all((pb.v >= B.v_lower) & (pb.v <= B.v_upper))

    def test_piecewise_random_needs_positive_dwell(self):
        with pytest.raises(ValueError):
            PiecewiseRandom(0.0)

    def test_feedback_kinds_rejected_standalone(self):
        grid = uniform_grid(0.0, 1.0, 0.1)
        with pytest.raises(ScenarioError, match="integrator"):
            sample_path(BangBangInX(0.0, 0.25, 1.0), B, grid, seed=0)
        with pytest.raises(ScenarioError, match="integrator"):
            sample_path(FeedbackSignVxx(parse("x^2")), B, grid, seed=0)

    def test_state_feedback_stream(self):
        s = BangBangInX(0.0, 0.25, 1.0)
        grid = uniform_grid(0.0, 1.0, 0.5)
        fn = variance_stream(s, B, grid, seed=0, paths=np.arange(3))
        x = np.array([-1.0, 0.0, 1.0])
        np.testing.assert_array_equal(fn(0, 0.0, x), [0.25, 1.0, 1.0])

    def test_curvature_feedback_stream(self):
        s = FeedbackSignVxx(parse("x^2"))
        grid = uniform_grid(0.0, 1.0, 0.5)
        fn = variance_stream(s, B, grid, seed=0, paths=np.arange(2))
        np.testing.assert_array_equal(
            fn(0, 0.0, np.array([-1.0, 1.0])), [1.0, 1.0]
        )


class TestFamily:
    def test_minimal_family(self):
        fam = enumerate_family(B, 1)
        assert fam == [Constant(0.25), Constant(1.0), Constant(0.625)]

    def test_rich_family_recipe(self):
        fam = enumerate_family(B, 3)
        consts = [s for s in fam if isinstance(s, Constant)]
        switches = [s for s in fam if isinstance(s, BangBangInTime)]
        assert [c.v for c in consts] == [0.25, 1.0, 0.4375, 0.625, 0.8125]
        assert len(switches) == 2
        assert switches[0].times == (5.0, 10.0)
        assert switches[0].levels == (1.0, 0.25)
        assert switches[1].times == (5.0, 10.0, 15.0)
        assert switches[1].levels == (1.0, 0.25, 1.0)

    def test_family_includes_feedback_when_energy_given(self):
        fam = enumerate_family(B, 1, lyapunov=parse("x^2"))
        assert isinstance(fam[-1], FeedbackSignVxx)

    def test_family_grows_with_richness(self):
        sizes = [len(enumerate_family(B, r)) for r in (1, 2, 3, 4)]
        assert sizes == sorted(sizes)
        assert all(a < b for a, b in zip(sizes, sizes[1:]))

    def test_richness_validation(self):
        with pytest.raises(ValueError):
            enumerate_family(B, 0)


class TestTextualForms:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("constant:0.25", Constant(0.25)),
            ("bangbang_t:1@2,0.25@5", BangBangInTime((2.0, 5.0), (1.0, 0.25))),
            ("bangbang_x:0,0.25,1", BangBangInX(0.0, 0.25, 1.0)),
            ("piecewise_random:dwell=0.5", PiecewiseRandom(0.5)),
        ],
    )
    def test_parse(self, text, expected):
        assert parse_scenario(text) == expected

    def test_label_round_trip(self):
        for s in (
            Constant(0.625),
            BangBangInTime((5.0, 10.0), (1.0, 0.25)),
            BangBangInX(0.5, 0.25, 1.0),
            PiecewiseRandom(0.75),
        ):
            assert parse_scenario(s.label()) == s

    def test_feedback_requires_energy(self):
        with pytest.raises(ScenarioError, match="energy"):
            parse_scenario("feedback_vxx")
        s = parse_scenario("feedback_vxx", lyapunov=parse("x^2"))
        assert isinstance(s, FeedbackSignVxx)

    def test_bad_forms(self):
        for text in (
            "constant:abc",
            "bangbang_t:1,2",
            "bangbang_x:1,2",
            "piecewise_random:0.5",
            "nonsense:1",
            "bangbang_t:",
        ):
            with pytest.raises(ScenarioError):
                parse_scenario(text)
