import numpy as np
import pytest

from morserec import (
    Grid,
    RasterImage,
    export_morse_graph,
    render_heatmap,
    render_morse,
    render_recurrence,
)
from morserec.errors import UsageError
from morserec.render import (
    GRAY,
    PALETTE,
    WHITE,
    colorbar_csv,
    colorbar_rows,
    morse_graph_dot,
    ramp_color,
    render_sets,
    render_values,
)


def test_ppm_bytes():
    px = np.zeros((2, 3, 3), dtype=np.uint8)
    px[0, 0] = (255, 0, 0)
    img = RasterImage(3, 2, px)
    data = img.to_ppm()
    assert data.startswith(b"P6\n3 2\n255\n")
    body = data[len(b"P6\n3 2\n255\n"):]
    assert len(body) == 2 * 3 * 3
    assert body[:3] == b"\xff\x00\x00"


def test_save_is_atomic_and_deterministic(tmp_path):
    px = np.full((2, 2, 3), 7, dtype=np.uint8)
    img = RasterImage(2, 2, px)
    p = tmp_path / "out.ppm"
    img.save(str(p))
    first = p.read_bytes()
    img.save(str(p))
    assert p.read_bytes() == first == img.to_ppm()
    assert not (tmp_path / "out.ppm.tmp").exists()


def test_pixel_placement_y_axis_up():
    # cell (j1, j2) on a (2, 3) grid: j1 -> pixel column, j2 counts upward
    res = (2, 3)
    grid = Grid(((0.0, 2.0), (0.0, 3.0)), res)
    cells = [grid.lin((0, 0)), grid.lin((1, 2))]
    img = render_sets([cells[:1], cells[1:]], res)
    assert img.width == 2 and img.height == 3
    # (0, 0) is bottom-left: pixel row d2-1 = 2, column 0
    assert tuple(img.pixels[2, 0]) == PALETTE[0]
    # (1, 2) is top-right: pixel row 0, column 1
    assert tuple(img.pixels[0, 1]) == PALETTE[1]
    assert tuple(img.pixels[0, 0]) == WHITE


def test_scale_expands_cells_to_blocks():
    res = (2, 2)
    img = render_sets([[0]], res, scale=3)  # cell (0, 0)
    assert img.width == 6 and img.height == 6
    block = img.pixels[3:6, 0:3]
    assert (block == np.array(PALETTE[0], dtype=np.uint8)).all()
    assert tuple(img.pixels[0, 0]) == WHITE


def test_palette_cycles_after_sixteen():
    res = (20, 1)
    sets = [[i] for i in range(17)]
    img = render_sets(sets, res)
    assert tuple(img.pixels[0, 0]) == PALETTE[0]
    assert tuple(img.pixels[0, 16]) == PALETTE[0]
    assert tuple(img.pixels[0, 15]) == PALETTE[15]


def test_render_morse_and_dot(chialvo_dec64):
    dec = chialvo_dec64
    img = render_morse(dec)
    assert img.width == 64 and img.height == 64
    colored = (img.pixels != 255).any(axis=2).sum()
    assert colored == sum(s.size for s in dec.sets)
    dot = export_morse_graph(dec)
    assert dot.startswith("digraph morse {\n")
    assert dot.endswith("}\n")
    for i, s in enumerate(dec.sets):
        assert f'n{i} [label="{i} : {s.size}"' in dot


def test_dot_text_exact():
    dot = morse_graph_dot([10, 3], [True, False], [(0, 1)])
    assert dot == (
        "digraph morse {\n"
        '  n0 [label="0 : 10", shape=box, style=filled, fillcolor="yellow"];\n'
        '  n1 [label="1 : 3", shape=ellipse];\n'
        "  n0 -> n1;\n"
        "}\n"
    )
    assert morse_graph_dot([], [], []) == "digraph morse {\n}\n"


def test_ramp_endpoints_and_monotone_brightness():
    assert ramp_color(0.0) == (0, 0, 4)
    assert ramp_color(1.0) == (252, 255, 164)
    assert ramp_color(-5.0) == ramp_color(0.0)
    assert ramp_color(7.0) == ramp_color(1.0)
    sums = [sum(ramp_color(t)) for t in np.linspace(0, 1, 21)]
    assert all(a < b for a, b in zip(sums, sums[1:]))


def test_render_values_low_dark_high_bright():
    res = (3, 1)
    img = render_values([0, 1, 2], [1.0, 2.0, 3.0], res)
    s = img.pixels[0].astype(int)
    assert tuple(s[0]) == (0, 0, 4)
    assert tuple(s[2]) == (252, 255, 164)
    assert s[0].sum() < s[1].sum() < s[2].sum()
    # vrange pins the normalization
    img2 = render_values([0, 1, 2], [1.0, 2.0, 3.0], res, vrange=(1.0, 5.0))
    assert int(img2.pixels[0, 2].astype(int).sum()) < 255 * 3 - 100
    # constant field sits mid-ramp
    img3 = render_values([0, 1], [4.0, 4.0], (2, 1))
    assert tuple(img3.pixels[0, 0]) == ramp_color(0.5)
    with pytest.raises(UsageError, match="matching length"):
        render_values([0, 1], [1.0], res)


def test_render_recurrence(chialvo_rep64, chialvo_dec64):
    from morserec import analyze_set

    field = analyze_set(chialvo_rep64, chialvo_dec64.sets[chialvo_dec64.largest_set_index()])
    img = render_recurrence(field, chialvo_rep64.grid)
    assert img.width == 64 and img.height == 64
    lit = (img.pixels != 255).any(axis=2).sum()
    assert lit == field.card


def test_colorbar():
    rows = colorbar_rows(2.0, 10.0, n=5)
    assert len(rows) == 5
    assert rows[0][0] == 2.0 and rows[-1][0] == 10.0
    assert rows[0][1:] == (0, 0, 4)
    assert rows[-1][1:] == (252, 255, 164)
    text = colorbar_csv(2.0, 10.0, n=3)
    lines = text.splitlines()
    assert lines[0] == "value,r,g,b"
    assert len(lines) == 4
    assert lines[1].startswith("2.0,")
    # degenerate range: all rows mid-ramp
    rows = colorbar_rows(5.0, 5.0, n=3)
    assert all(r[1:] == ramp_color(0.5) for r in rows)
    with pytest.raises(UsageError):
        colorbar_rows(0.0, 1.0, n=1)


def test_heatmap_mask_and_range():
    vals = np.array([[1.0, 2.0], [3.0, np.nan]])
    img = render_heatmap(vals)
    # box (i, j) -> pixel (row d2-1-j, col i)
    assert tuple(img.pixels[1, 0]) == (0, 0, 4)        # value 1 at (0,0)
    assert tuple(img.pixels[1, 1]) == (252, 255, 164)  # value 3 at (1,0)
    assert tuple(img.pixels[0, 1]) == GRAY             # nan is masked
    # explicit mask excludes values from the range
    img2 = render_heatmap(np.array([[1.0, 100.0], [2.0, 3.0]]),
                          mask=np.array([[False, True], [False, False]]))
    assert tuple(img2.pixels[0, 0]) == GRAY             # 100 at (0,1), masked
    assert tuple(img2.pixels[0, 1]) == (252, 255, 164)  # 3 at (1,1) is the max
    with pytest.raises(UsageError):
        render_heatmap(np.zeros(3))


def test_heatmap_class_borders():
    vals = np.ones((2, 2))
    classes = np.array([[0, 0], [1, 1]])  # split along axis 0
    img = render_heatmap(vals, classes=classes, scale=4)
    px = img.pixels
    # vertical border on the right edge of boxes i=0: pixel column 3
    assert (px[:, 3] == 0).all()
    assert not (px[:, 4] == 0).any()
    classes2 = np.array([[0, 1], [0, 1]])  # split along axis 1
    img2 = render_heatmap(vals, classes=classes2, scale=4)
    # horizontal border at the top edge of j=0 boxes: pixel row 4
    assert (img2.pixels[4, :] == 0).all()
    assert not (img2.pixels[3, :] == 0).any()
    with pytest.raises(UsageError, match="classes shape"):
        render_heatmap(vals, classes=np.zeros((3, 3)))


def test_scale_guard():
    with pytest.raises(UsageError, match="scale"):
        render_sets([[0]], (2, 2), scale=0)
    with pytest.raises(UsageError, match="2-D"):
        render_sets([[0]], (2, 2, 2))


def test_rendering_is_byte_deterministic(chialvo_dec64):
    a = render_morse(chialvo_dec64).to_ppm()
    b = render_morse(chialvo_dec64).to_ppm()
    assert a == b
