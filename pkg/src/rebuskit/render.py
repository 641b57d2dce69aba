"""Rasterizes rebus graphs into 400x400 puzzle images.

Four layout templates place one to three elements along the horizontal
midline or stack two rows for the above rule. Node attributes drive styling:
color fills, size scaling, vertical/reversed character layouts, highlight
arrows, strike-through, repetition copies, and inside/outside composites
where the outer word is split around the inner element.

Rendering is deterministic: the same (graph, config) pair produces identical
PNG bytes. Every drawn element reports its bounding box (and the ink
fragments inside it) so layouts can be validated for overlap and overflow.
"""
from __future__ import annotations

import functools
import glob
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from fontTools.ttLib import TTFont
from PIL import Image, ImageDraw, ImageFont

from .graph import RebusGraph, RebusNode

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CANVAS = 400

FONT_DIRS = (
    "/usr/share/fonts",
    "/usr/local/share/fonts",
    str(Path.home() / ".fonts"),
)


class RenderError(Exception):
    pass


class TemplateCapacityError(RenderError):
    """The graph does not fit any layout template."""


class GlyphMissingError(RenderError):
    """A character has no glyph in the configured font."""


@dataclass(frozen=True)
class Template:
    id: str  # single | double | triple | above
    anchor_points: tuple[tuple[int, int], ...]
    base_font_size: int
    size_multiplier_slots: tuple[float, ...]


@dataclass(frozen=True)
class RenderConfig:
    width: int = CANVAS
    height: int = CANVAS
    text_font: str = "DejaVuSansMono"
    icon_font: str = "DejaVuSans"
    big_scale: float = 2.0
    small_scale: float = 0.5
    arrow_glyph: str = "↑"
    seed: int = 42
    background: str = "white"
    foreground: str = "black"

    def __post_init__(self):
        if (self.width, self.height) != (CANVAS, CANVAS):
            raise RenderError(f"canvas is fixed at {CANVAS}x{CANVAS}")

    @classmethod
    def from_toml(cls, path: str | Path) -> "RenderConfig":
        with open(path, "rb") as f:
            data = tomllib.load(f)
        return cls(**data)


@dataclass
class ElementBox:
    """One drawn element copy: its overall box and the ink fragments in it."""

    node_ordinal: int
    copy_index: int
    box: tuple[int, int, int, int]
    fragments: list[tuple[int, int, int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "node": self.node_ordinal,
            "copy": self.copy_index,
            "box": list(self.box),
            "fragments": [list(f) for f in self.fragments],
        }


@dataclass
class RenderResult:
    image: Image.Image
    elements: list[ElementBox]

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.image.save(buf, format="PNG")
        return buf.getvalue()

    def layout_dict(self) -> dict:
        return {
            "elements": [e.to_dict() for e in self.elements],
            "valid": validate_layout(self.elements),
        }


# -- fonts -------------------------------------------------------------------


def _find_font_file(family: str) -> str:
    if family.endswith(".ttf") and Path(family).exists():
        return family
    for base in FONT_DIRS:
        hits = sorted(glob.glob(f"{base}/**/{family}.ttf", recursive=True))
        if hits:
            return hits[0]
    raise RenderError(f"font {family!r} not found under {FONT_DIRS}")


class _FontSet:
    """Fonts plus their character maps, shared read-only across renders."""

    def __init__(self, text_family: str, icon_family: str):
        self.text_path = _find_font_file(text_family)
        self.icon_path = _find_font_file(icon_family)
        self.text_cmap = TTFont(self.text_path).getBestCmap()
        self.icon_cmap = TTFont(self.icon_path).getBestCmap()
        self._cache: dict[tuple[str, int], ImageFont.FreeTypeFont] = {}

    def text_font(self, size: int) -> ImageFont.FreeTypeFont:
        return self._load(self.text_path, size)

    def icon_font(self, size: int) -> ImageFont.FreeTypeFont:
        return self._load(self.icon_path, size)

    def _load(self, path: str, size: int) -> ImageFont.FreeTypeFont:
        key = (path, size)
        if key not in self._cache:
            self._cache[key] = ImageFont.truetype(path, size)
        return self._cache[key]

    def check_coverage(self, text: str, icon: bool) -> None:
        cmap = self.icon_cmap if icon else self.text_cmap
        for ch in text:
            if ch == " ":
                continue
            if ord(ch) not in cmap:
                raise GlyphMissingError(f"glyph missing from font: {ch!r} (U+{ord(ch):04X})")


@functools.lru_cache(maxsize=4)
def _fontset(text_family: str, icon_family: str) -> _FontSet:
    return _FontSet(text_family, icon_family)


# -- layout units -------------------------------------------------------------


@dataclass
class _Unit:
    """One template slot: a plain node or an inside/outside composite."""

    node: RebusNode
    inner: RebusNode | None = None  # set for composites; `node` is the outer

    @property
    def ordinals(self) -> tuple[int, ...]:
        if self.inner is None:
            return (self.node.ordinal,)
        return (self.node.ordinal, self.inner.ordinal)


def _compute_units(graph: RebusGraph) -> tuple[list[_Unit], list[_Unit] | None]:
    """Group nodes into layout units; returns (units, bottom_units_or_None).

    When an above edge is present, the first list is the top row and the
    second the bottom row. Otherwise the second item is None.
    """
    by_ordinal = {n.ordinal: n for n in graph.nodes}
    special = [e for e in graph.edges if e.relation != "next-to"]

    if special and special[0].relation in ("inside", "outside"):
        edge = special[0]
        if edge.relation == "inside":
            outer, inner = by_ordinal[edge.to_ordinal], by_ordinal[edge.from_ordinal]
        else:
            outer, inner = by_ordinal[edge.from_ordinal], by_ordinal[edge.to_ordinal]
        composite = _Unit(outer, inner)
        merged = set(composite.ordinals)
        units: list[_Unit] = []
        placed = False
        for node in graph.nodes:
            if node.ordinal in merged:
                if not placed:
                    units.append(composite)
                    placed = True
                continue
            units.append(_Unit(node))
        return units, None

    if special and special[0].relation == "above":
        edge = special[0]
        # side assignment: reachability over next-to edges only
        adjacency: dict[int, set[int]] = {n.ordinal: set() for n in graph.nodes}
        for e in graph.edges:
            if e.relation == "next-to":
                adjacency[e.from_ordinal].add(e.to_ordinal)
                adjacency[e.to_ordinal].add(e.from_ordinal)

        def side(start: int) -> list[int]:
            seen = {start}
            stack = [start]
            while stack:
                for nxt in adjacency[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            return sorted(seen)

        top = [_Unit(by_ordinal[o]) for o in side(edge.from_ordinal)]
        bottom = [_Unit(by_ordinal[o]) for o in side(edge.to_ordinal)]
        return top, bottom

    return [_Unit(n) for n in graph.nodes], None


def _row_positions(count: int) -> list[int]:
    return [round(CANVAS * (i + 1) / (count + 1)) for i in range(count)]


def select_template(graph: RebusGraph) -> Template:
    """Pick the layout template for a graph, or raise on capacity overflow."""
    graph.validate()
    units, bottom = _compute_units(graph)

    if bottom is not None:
        if len(units) > 2 or len(bottom) > 2:
            raise TemplateCapacityError(
                f"above rule with {len(units)} top / {len(bottom)} bottom units"
            )
        anchors = [(x, 120) for x in _row_positions(len(units))]
        anchors += [(x, 280) for x in _row_positions(len(bottom))]
        return Template("above", tuple(anchors), 20, (1.0,) * len(anchors))

    names = {1: "single", 2: "double", 3: "triple"}
    sizes = {1: 32, 2: 22, 3: 17}
    if len(units) not in names:
        raise TemplateCapacityError(f"{len(units)} next-to chained units exceed capacity")
    anchors = tuple((x, 200) for x in _row_positions(len(units)))
    return Template(names[len(units)], anchors, sizes[len(units)], (1.0,) * len(anchors))


# -- drawing -------------------------------------------------------------------


def _line_height(font: ImageFont.FreeTypeFont) -> int:
    ascent, descent = font.getmetrics()
    return ascent + descent


def _advance(draw: ImageDraw.ImageDraw, text: str, font: ImageFont.FreeTypeFont) -> float:
    return draw.textlength(text, font=font)


def _styled_string(node: RebusNode) -> str:
    text = node.attrs.icon if node.attrs.icon is not None else node.attrs.text
    if node.attrs.direction == "reverse":
        text = text[::-1]
    return text


def _node_scale(node: RebusNode, config: RenderConfig) -> float:
    if node.attrs.size == "big":
        return config.big_scale
    if node.attrs.size == "small":
        return config.small_scale
    return 1.0


class _Painter:
    def __init__(self, draw: ImageDraw.ImageDraw, fonts: _FontSet, config: RenderConfig):
        self.draw = draw
        self.fonts = fonts
        self.config = config

    def font_for(self, node: RebusNode, base_size: float) -> ImageFont.FreeTypeFont:
        size = max(6, round(base_size * _node_scale(node, self.config)))
        if node.attrs.icon is not None:
            return self.fonts.icon_font(size)
        return self.fonts.text_font(size)

    def copy_size(self, node: RebusNode, base_size: float, stacked_chars: bool) -> tuple[float, float]:
        """Width and height of a single copy of the node's element."""
        font = self.font_for(node, base_size)
        text = _styled_string(node)
        lh = _line_height(font)
        if stacked_chars:
            width = max(_advance(self.draw, ch, font) for ch in text)
            return width, lh * len(text)
        return _advance(self.draw, text, font), lh

    def draw_copy(
        self, node: RebusNode, x: float, y: float, base_size: float, stacked_chars: bool
    ) -> list[tuple[int, int, int, int]]:
        """Draw one copy with its top-left at (x, y); returns ink fragments."""
        attrs = node.attrs
        font = self.font_for(node, base_size)
        text = _styled_string(node)
        self.fonts.check_coverage(text, icon=attrs.icon is not None)
        fill = attrs.color if attrs.color is not None else self.config.foreground
        fragments = []
        lh = _line_height(font)

        if stacked_chars:
            chars = text[::-1] if attrs.direction == "up" else text
            width = max(_advance(self.draw, ch, font) for ch in text)
            for i, ch in enumerate(chars):
                cw = _advance(self.draw, ch, font)
                cx = x + (width - cw) / 2
                cy = y + i * lh
                self.draw.text((cx, cy), ch, font=font, fill=fill)
                fragments.append(self._ink_box(cx, cy, ch, font))
            w, h = width, lh * len(text)
        else:
            self.draw.text((x, y), text, font=font, fill=fill)
            fragments.append(self._ink_box(x, y, text, font))
            w, h = _advance(self.draw, text, font), lh

        if attrs.cross:
            mid = y + h / 2
            thickness = max(2, round(base_size / 12))
            self.draw.line([(x, mid), (x + w, mid)], fill=fill, width=thickness)
            fragments.append((math.floor(x), math.floor(mid - thickness / 2),
                              math.ceil(x + w), math.ceil(mid + thickness / 2)))

        if attrs.highlight is not None:
            fragments.append(self._draw_arrow(attrs.highlight, x, y, w, h, base_size))
        return fragments

    def _draw_arrow(self, position: str, x: float, y: float, w: float, h: float,
                    base_size: float) -> tuple[int, int, int, int]:
        # arrow sits under the element pointing up at its start/middle/end
        font = self.fonts.icon_font(max(6, round(base_size * 0.75)))
        glyph = self.config.arrow_glyph
        self.fonts.check_coverage(glyph, icon=True)
        gw = _advance(self.draw, glyph, font)
        targets = {"before": x, "middle": x + w / 2, "after": x + w}
        ax = targets[position] - gw / 2
        ay = y + h + 2
        self.draw.text((ax, ay), glyph, font=font, fill=self.config.foreground)
        return self._ink_box(ax, ay, glyph, font)

    def _ink_box(self, x: float, y: float, text: str, font) -> tuple[int, int, int, int]:
        box = self.draw.textbbox((x, y), text, font=font)
        return (math.floor(box[0]), math.floor(box[1]), math.ceil(box[2]), math.ceil(box[3]))


def _gap(painter: _Painter, node: RebusNode, base_size: float) -> float:
    return _advance(painter.draw, " ", painter.font_for(node, base_size))


def _draw_plain_unit(
    painter: _Painter, node: RebusNode, anchor: tuple[int, int], base_size: float,
    stack_copies: bool,
) -> list[ElementBox]:
    attrs = node.attrs
    stacked_chars = attrs.direction in ("up", "down")
    w, h = painter.copy_size(node, base_size, stacked_chars)
    gap = _gap(painter, node, base_size)
    k = attrs.repeat

    if stack_copies:
        total_w, total_h = w, k * h + (k - 1) * gap
    else:
        total_w, total_h = k * w + (k - 1) * gap, h
    x0 = anchor[0] - total_w / 2
    y0 = anchor[1] - total_h / 2

    elements = []
    for i in range(k):
        cx = x0 if stack_copies else x0 + i * (w + gap)
        cy = y0 + i * (h + gap) if stack_copies else y0
        fragments = painter.draw_copy(node, cx, cy, base_size, stacked_chars)
        elements.append(ElementBox(node.ordinal, i, _union(fragments), fragments))
    return elements


def _draw_composite_unit(
    painter: _Painter, outer: RebusNode, inner: RebusNode, anchor: tuple[int, int],
    base_size: float,
) -> list[ElementBox]:
    if outer.attrs.icon is not None:
        raise RenderError("cannot split an icon element around an inner element")
    if outer.attrs.repeat != 1:
        raise RenderError("repeated outer element in a composite is unsupported")

    outer_font = painter.font_for(outer, base_size)
    text = _styled_string(outer)
    half = math.ceil(len(text) / 2)
    left_text, right_text = text[:half], text[half:]

    inner_stacked = inner.attrs.direction in ("up", "down")
    iw, ih = painter.copy_size(inner, base_size, inner_stacked)
    igap = _gap(painter, inner, base_size)
    k = inner.attrs.repeat
    inner_w = k * iw + (k - 1) * igap

    pad = _advance(painter.draw, " ", outer_font)
    lw = _advance(painter.draw, left_text, outer_font)
    rw = _advance(painter.draw, right_text, outer_font)
    oh = _line_height(outer_font)
    total_w = lw + pad + inner_w + pad + rw
    total_h = max(oh, ih)
    x0 = anchor[0] - total_w / 2
    y0 = anchor[1] - total_h / 2

    outer_fill = outer.attrs.color if outer.attrs.color is not None else painter.config.foreground
    painter.fonts.check_coverage(text, icon=False)
    outer_fragments = []
    oy = y0 + (total_h - oh) / 2
    painter.draw.text((x0, oy), left_text, font=outer_font, fill=outer_fill)
    outer_fragments.append(painter._ink_box(x0, oy, left_text, outer_font))
    rx = x0 + lw + pad + inner_w + pad
    painter.draw.text((rx, oy), right_text, font=outer_font, fill=outer_fill)
    outer_fragments.append(painter._ink_box(rx, oy, right_text, outer_font))
    elements = [ElementBox(outer.ordinal, 0, _union(outer_fragments), outer_fragments)]

    ix = x0 + lw + pad
    iy = y0 + (total_h - ih) / 2
    for i in range(k):
        fragments = painter.draw_copy(inner, ix + i * (iw + igap), iy, base_size, inner_stacked)
        elements.append(ElementBox(inner.ordinal, i, _union(fragments), fragments))
    return elements


def _union(boxes: list[tuple[int, int, int, int]]) -> tuple[int, int, int, int]:
    return (
        min(b[0] for b in boxes),
        min(b[1] for b in boxes),
        max(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


def render(graph: RebusGraph, config: RenderConfig | None = None) -> RenderResult:
    """Draw the graph onto a fresh canvas; see the module docstring."""
    config = config or RenderConfig()
    template = select_template(graph)
    units, bottom = _compute_units(graph)
    rows = [units] if bottom is None else [units, bottom]
    stack_copies = template.id == "above"

    fonts = _fontset(config.text_font, config.icon_font)
    image = Image.new("RGB", (config.width, config.height), config.background)
    painter = _Painter(ImageDraw.Draw(image), fonts, config)

    elements: list[ElementBox] = []
    slot = 0
    for row in rows:
        for unit in row:
            anchor = template.anchor_points[slot]
            size = template.base_font_size * template.size_multiplier_slots[slot]
            slot += 1
            if unit.inner is not None:
                elements += _draw_composite_unit(painter, unit.node, unit.inner, anchor, size)
            else:
                elements += _draw_plain_unit(painter, unit.node, anchor, size, stack_copies)
    return RenderResult(image, elements)


def _boxes_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    return not (a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1])


def validate_layout(elements: list[ElementBox]) -> bool:
    """True iff all ink stays on the canvas and distinct elements never overlap."""
    for element in elements:
        for frag in element.fragments:
            if frag[0] < 0 or frag[1] < 0 or frag[2] > CANVAS or frag[3] > CANVAS:
                return False
    for i, a in enumerate(elements):
        for b in elements[i + 1 :]:
            for fa in a.fragments:
                for fb in b.fragments:
                    if _boxes_overlap(fa, fb):
                        return False
    return True


def render_to_files(
    graph: RebusGraph, out_dir: str | Path, puzzle_id: str, config: RenderConfig | None = None
) -> bool:
    """Render one graph to {id}.png + {id}.layout.json; returns layout validity."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = render(graph, config)
    (out_dir / f"{puzzle_id}.png").write_bytes(result.png_bytes())
    layout = result.layout_dict()
    (out_dir / f"{puzzle_id}.layout.json").write_text(
        json.dumps(layout, indent=2), encoding="utf-8"
    )
    return layout["valid"]
