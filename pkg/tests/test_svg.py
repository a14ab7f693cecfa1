import xml.etree.ElementTree as ET

from obukhov.svg import Plot

NS = "{http://www.w3.org/2000/svg}"


def parse(plot):
    return ET.fromstring(plot.render())


def test_polylines_and_legend():
    p = Plot(title="a & b", xlabel="k", ylabel="Y")
    p.add([0, 1, 2], [1, 2, 3], label="first")
    p.add([0, 1, 2], [3, 2, 1], dashed=True)
    root = parse(p)
    lines = root.findall(f"{NS}polyline")
    assert len(lines) == 2
    assert len(lines[0].get("points").split()) == 3
    assert lines[1].get("stroke-dasharray") == "5,3"
    texts = [t.text for t in root.iter(f"{NS}text")]
    assert "first" in texts and "a & b" in texts


def test_log_axes_drop_nonpositive_points_and_tick_decades():
    p = Plot(ylog=True)
    p.add([0, 1, 2, 3], [1e-3, 0.0, 1.0, 1e3])
    root = parse(p)
    assert len(root.find(f"{NS}polyline").get("points").split()) == 3
    labels = [t.text for t in root.iter(f"{NS}text")]
    assert "1e0" in labels and "1e-3" in labels


def test_narrow_log_range_gets_intermediate_ticks():
    p = Plot(xlog=True)
    p.add([1.5, 4.5], [0, 1])
    labels = [t.text for t in parse(p).iter(f"{NS}text")]
    assert "2" in labels


def test_empty_plot_renders(tmp_path):
    path = Plot().save(tmp_path / "e.svg")
    assert ET.parse(path).getroot().tag == f"{NS}svg"
