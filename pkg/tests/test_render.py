import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from lm_attr.errors import ConfigError, RenderError
from lm_attr.orchestrate import AttributionResult
from lm_attr.render import (
    diverging_rgb,
    format_value,
    plot_heatmap,
    render_csv,
    render_heatmap,
    render_html,
    render_terminal,
)

from .conftest import INTERESTS, SENTIMENT

GOLDEN = Path(__file__).parent / "golden"
SVG = "{http://www.w3.org/2000/svg}"
META = {"method": "ablation", "seed": 0, "model": "m", "evaluations": 0, "wall_ms": None}


def cells(svg_text):
    root = ET.fromstring(svg_text.encode("utf-8"))
    return [r for r in root.iter(f"{SVG}rect") if "data-value" in r.attrib]


def saturation(fill):
    r, g, b = (int(fill[i : i + 2], 16) for i in (1, 3, 5))
    return max(r, g, b) - min(r, g, b)


class TestHeatmap:
    def test_zero_cell_is_white(self):
        result = AttributionResult(["x"], ["t"], [[0.0]], META)
        (cell,) = cells(render_heatmap(result))
        assert cell.get("fill") == "#ffffff"
        assert cell.get("data-value") == "0.0000"

    def test_interests_grid_and_extremes(self, interests):
        grid = cells(render_heatmap(interests))
        assert len(grid) == 15
        assert {int(c.get("data-col")) for c in grid} == set(range(5))
        assert {int(c.get("data-row")) for c in grid} == set(range(3))
        blue = [c for c in grid if float(c.get("data-value")) > 0]
        red = [c for c in grid if float(c.get("data-value")) < 0]
        assert max(blue, key=lambda c: saturation(c.get("fill"))).get("data-value") == "1.0810"
        assert max(red, key=lambda c: saturation(c.get("fill"))).get("data-value") == "-0.8762"
        top = max(blue, key=lambda c: saturation(c.get("fill")))
        assert top.get("fill") == "#0000ff"

    def test_labels_on_top_and_left(self, interests):
        root = ET.fromstring(render_heatmap(interests))
        texts = [t.text for t in root.iter(f"{SVG}text")]
        for name, _ in INTERESTS:
            assert name in texts
        for tok in ("Golfing", "Hiking", "Cooking"):
            assert tok in texts

    def test_symmetric_saturation(self):
        result = AttributionResult(["a", "b"], ["t"], [[2.5, -2.5]], META)
        pos, neg = cells(render_heatmap(result))
        assert pos.get("fill") == "#0000ff" and neg.get("fill") == "#ff0000"

    @pytest.mark.parametrize("x", [0.1, 0.5, 0.77, 1.0])
    def test_odd_mapping(self, x):
        r, g, b = diverging_rgb(x, 1.0)
        assert diverging_rgb(-x, 1.0) == (b, g, r)
        assert diverging_rgb(0.0, 1.0) == (255, 255, 255)

    def test_byte_stable(self, interests):
        assert render_heatmap(interests) == render_heatmap(interests)
        assert render_heatmap(interests).encode() == render_heatmap(AttributionResult.from_json(interests.to_json())).encode()

    def test_nan_cell(self):
        result = AttributionResult(["a", "b"], ["t"], [[0.1, float("nan")]], META)
        with pytest.raises(RenderError, match="'b'"):
            render_heatmap(result)

    def test_named_colormap(self, interests):
        grid = cells(render_heatmap(interests, cmap="coolwarm"))
        assert len(grid) == 15
        with pytest.raises(ConfigError):
            render_heatmap(interests, cmap="no-such-map")

    def test_number_format_option(self, interests):
        grid = cells(render_heatmap(interests, number_format="{:.2f}"))
        assert grid[1].get("data-value") == "1.08"

    def test_escapes_markup(self):
        result = AttributionResult(["<b>&"], ["t"], [[1.0]], META)
        ET.fromstring(render_heatmap(result))

    def test_html_wraps_svg(self, interests):
        page = render_html(interests)
        assert page.startswith("<!DOCTYPE html>") and "<svg" in page and "<script" not in page


class TestTerminal:
    def test_interests_golden(self, interests):
        assert render_terminal(interests) == (GOLDEN / "interests_terminal.txt").read_text()

    def test_sentiment_golden(self, sentiment):
        assert render_terminal(sentiment) == (GOLDEN / "sentiment_terminal.txt").read_text()

    def test_sentiment_four_rows(self, sentiment):
        text = render_terminal(sentiment, orientation="features-left")
        assert text == (GOLDEN / "sentiment_terminal_features_left.txt").read_text()
        body = text.splitlines()[2:]
        assert len(body) == 4
        for line, (_, value) in zip(body, SENTIMENT):
            assert f"{value:.4f}" in line

    def test_totals_line(self, interests):
        last = render_terminal(interests).splitlines()[-1].split()
        assert last[0] == "total"
        assert last[1:] == [format_value(v) for v in np.array([r for _, r in INTERESTS]).sum(axis=1)]

    def test_empty_label_placeholder(self):
        result = AttributionResult(["", "b"], ["t"], [[1.0, 2.0]], META)
        assert "(feature 0)" in render_terminal(result)

    def test_widths_follow_longest_label(self):
        result = AttributionResult(["a-very-long-feature-label", "b"], ["tok"], [[1.0, -2.0]], META)
        lines = render_terminal(result).splitlines()
        assert len({len(lines[0]), len(lines[2])}) == 1

    def test_no_negative_zero(self):
        assert format_value(-0.00001) == "0.0000"

    def test_bad_orientation(self, interests):
        with pytest.raises(ConfigError):
            render_terminal(interests, orientation="diagonal")


def test_csv(interests):
    lines = render_csv(interests).splitlines()
    assert lines[0].split(",")[0] == "target_token"
    assert len(lines) == 5
    assert float(lines[1].split(",")[2]) == 1.081


@pytest.mark.parametrize("suffix", [".png", ".pdf", ".svg"])
def test_matplotlib_figure(interests, tmp_path, suffix):
    path = tmp_path / f"fig{suffix}"
    plot_heatmap(interests, path)
    assert path.stat().st_size > 1000


def test_plot_token_attr_returns_axes(interests):
    fig, ax = interests.plot_token_attr()
    assert [t.get_text() for t in ax.get_yticklabels()] == ["Golfing", "Hiking", "Cooking"]
    fig.clf()
