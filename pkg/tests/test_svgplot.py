import re

import numpy as np
import pytest

from latentgame.svgplot import line_chart_svg, ternary_scatter_svg, ternary_xy


def test_ternary_corners():
    xy = ternary_xy(np.eye(3))
    h = 400 * np.sqrt(3) / 2
    np.testing.assert_allclose(xy, [[20, 20 + h], [420, 20 + h], [220, 20]])
    with pytest.raises(ValueError):
        ternary_xy(np.ones((2, 4)) / 4)


def test_scatter_counts_points():
    svg = ternary_scatter_svg(np.random.default_rng(0).dirichlet(np.ones(3), 25), title="a & b")
    assert svg.count("<circle") == 25 and "a &amp; b" in svg


def test_line_chart_one_polyline_per_series():
    svg = line_chart_svg({"a": ([0, 1, 2], [1, 0.5, 0.1]), "b": ([0, 2], [2, 3]), "c": ([0], [np.nan])})
    assert re.findall(r'data-series="(\w)"', svg) == ["a", "b", "c"]


def test_log_axis_drops_nonpositive():
    svg = line_chart_svg({"a": ([0, 1, 2], [1, 0, 0.1])})
    pts = re.search(r'points="([^"]*)"', svg).group(1).split()
    assert len(pts) == 2
