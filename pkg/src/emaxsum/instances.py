"""Benchmark instance families, the native file format, and CSV ingestion.

Four seeded families are generated here:

* cdp      - one knapsack row over random node weights;
* gdp_f    - fixed-cost sites: a covering row (capacity >= B) and a budget
             row (cost <= K);
* gdp_v    - variable-capacity sites: integer auxiliaries t_i <= c_i x_i,
             a covering row sum(t) >= B and a budget row over fixed plus
             unit costs;
* blmsdp   - a pinned cardinality plus one conflict row per point whose
             strict delta-neighbourhood holds at least two points.

Randomness comes from splitmix64 (documented below), so an instance is
reproducible from (family, parameters, seed) in any language. Distances
are computed from coordinates in double precision and never rounded; the
parser records whether a matrix was read verbatim or computed.

File format (UTF-8, line oriented). Header ``EMSP 1``, then ``n s``; when
s >= 1 the next n lines hold s coordinates each, when s = 0 a MATRIX block
must supply the distances. Any of the following blocks follow, in order:

    NAME <rest of line>
    META key=value [key=value ...]
    MATRIX                     followed by n rows of n entries
    KNAPSACK <b>               followed by n weight lines
    CARD_EQ <p> | CARD_LE <p>
    GDPF <B> <K>               followed by n lines "c a"
    GDPV <B> <K>               followed by n lines "c a b"
    CONFLICT <delta>
    AUX <k>                    followed by k lines "name kind lower upper"
    ROW <sense> <rhs> <idx>:<coef> ...   (1-based; selection then aux)

Numbers are written canonically (integers bare, otherwise shortest float
repr), so serialise(parse(text)) is byte-identical on canonical files.
Blank lines and lines starting with ``#`` are ignored when parsing.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .edm import DistanceMatrix, PointSet, build_edm
from .model import (EQ, GE, LE, EmspInstance, LinearConstraint, VariableDecl)

_MASK64 = (1 << 64) - 1

FAMILIES = ("cdp", "gdp_f", "gdp_v", "blmsdp")


class FormatError(ValueError):
    """A native-format file could not be parsed; messages carry line numbers."""


class SplitMix64:
    """The splitmix64 generator: 64-bit state advanced by the golden-gamma
    increment, output mixed by two xor-multiply rounds.

        state += 0x9E3779B97F4A7C15
        z = state
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)          (all mod 2**64)

    uniform(lo, hi) maps the top 53 bits to [0, 1) and scales;
    uniform_int(lo, hi) reduces modulo the range size (the modulo bias is
    below 2**-44 for the ranges used here). Each generator call sequence
    is documented per family so draws can be replayed externally.
    """

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + u * (hi - lo)

    def uniform_int(self, lo: int, hi: int) -> int:
        return lo + self.next_u64() % (hi - lo + 1)


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one generated instance; identical specs give identical
    instances, byte for byte."""

    family: str
    n: int
    coords: int = 2
    ratio: float = 0.2
    phi: float = 0.5
    p: int | None = None
    delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.coords < 1:
            raise ValueError("coords must be at least 1")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie strictly between 0 and 1")
        if self.family == "cdp" and self.ratio not in (0.2, 0.3):
            warnings.warn(f"cdp ratio {self.ratio} is outside the benchmark pair {{0.2, 0.3}}")
        if not 0.0 < self.phi < 1.0:
            raise ValueError("phi must lie strictly between 0 and 1")
        if self.family == "blmsdp":
            if self.p is None or not 1 <= self.p <= self.n:
                raise ValueError("blmsdp requires 1 <= p <= n")
            if self.delta < 0:
                raise ValueError("delta must be nonnegative")


@dataclass(frozen=True)
class Block:
    """One named block of the native format: a keyword, header parameters,
    and data rows (tuples of numbers, or strings for AUX declarations)."""

    kind: str
    params: tuple
    data: tuple = ()


def format_number(v: float) -> str:
    f = float(v)
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def _selection_decls(n: int) -> tuple:
    return tuple(VariableDecl.binary(f"x{i + 1}") for i in range(n))


def _derive(blocks, n: int, q: DistanceMatrix):
    """Expand blocks into auxiliary declarations and constraint rows."""
    xn = [f"x{i + 1}" for i in range(n)]
    aux: list[VariableDecl] = []
    rows: list[LinearConstraint] = []
    for blk in blocks:
        if blk.kind == "KNAPSACK":
            weights = [r[0] for r in blk.data]
            rows.append(LinearConstraint(dict(zip(xn, weights)), LE, blk.params[0]))
        elif blk.kind in ("CARD_EQ", "CARD_LE"):
            sense = EQ if blk.kind == "CARD_EQ" else LE
            rows.append(LinearConstraint({nm: 1.0 for nm in xn}, sense, blk.params[0]))
        elif blk.kind == "GDPF":
            b_min, k_max = blk.params
            cap = [r[0] for r in blk.data]
            cost = [r[1] for r in blk.data]
            rows.append(LinearConstraint(dict(zip(xn, cap)), GE, b_min))
            rows.append(LinearConstraint(dict(zip(xn, cost)), LE, k_max))
        elif blk.kind == "GDPV":
            b_min, k_max = blk.params
            tn = [f"t{i + 1}" for i in range(n)]
            for i in range(n):
                aux.append(VariableDecl.integer(tn[i], 0.0, blk.data[i][0]))
            rows.append(LinearConstraint({nm: 1.0 for nm in tn}, GE, b_min))
            budget = {xn[i]: blk.data[i][1] for i in range(n)}
            budget.update({tn[i]: blk.data[i][2] for i in range(n)})
            rows.append(LinearConstraint(budget, LE, k_max))
            for i in range(n):
                rows.append(LinearConstraint({tn[i]: 1.0, xn[i]: -blk.data[i][0]}, LE, 0.0))
        elif blk.kind == "CONFLICT":
            delta = blk.params[0]
            for i in range(n):
                nb = np.flatnonzero(q.entries[i] < delta)
                if nb.size >= 2:
                    rows.append(LinearConstraint({xn[j]: 1.0 for j in nb}, LE, 1.0))
        elif blk.kind == "AUX":
            for nm, kind, lo, hi in blk.data:
                aux.append(VariableDecl(nm, kind, float(lo), float(hi)))
        elif blk.kind == "ROW":
            sense, rhs = blk.params
            coeffs = {}
            for idx, coef in blk.data:
                idx = int(idx)
                if 1 <= idx <= n:
                    coeffs[xn[idx - 1]] = coef
                elif n < idx <= n + len(aux):
                    coeffs[aux[idx - n - 1].name] = coef
                else:
                    raise ValueError(f"ROW index {idx} out of range")
            rows.append(LinearConstraint(coeffs, sense, rhs))
        else:
            raise ValueError(f"unknown block kind {blk.kind!r}")
    return tuple(aux), tuple(rows)


def _assemble(points, q, blocks, name, meta, q_source) -> EmspInstance:
    aux, rows = _derive(blocks, q.n, q)
    return EmspInstance(q=q, selection_vars=_selection_decls(q.n), aux_vars=aux,
                        constraints=rows, points=points, name=name,
                        q_source=q_source, blocks=tuple(blocks), meta=dict(meta))


def _draw_points(rng: SplitMix64, n: int, s: int) -> PointSet:
    """n points of s coordinates, uniform on [0, 100], drawn row-major."""
    return PointSet(np.array([[rng.uniform(0.0, 100.0) for _ in range(s)]
                              for _ in range(n)]))


def draw_site_parameters(rng: SplitMix64, n: int):
    """Per-site capacity, fixed cost and unit cost.

    For each site in order: capacity c integer uniform on [1, 1000], fixed
    cost a uniform on [c/2, 2c], unit cost b uniform on the ascending-
    sorted pair (min(1, a)/100, max(1, a)/100).
    """
    cap = np.empty(n)
    fixed = np.empty(n)
    unit = np.empty(n)
    for i in range(n):
        c = float(rng.uniform_int(1, 1000))
        a = rng.uniform(c / 2.0, 2.0 * c)
        lo, hi = sorted((min(1.0, a) / 100.0, max(1.0, a) / 100.0))
        cap[i], fixed[i], unit[i] = c, a, rng.uniform(lo, hi)
    return cap, fixed, unit


def gen_cdp(spec: GeneratorSpec) -> EmspInstance:
    """Knapsack family: weights integer uniform on [1, 1000], capacity
    b = ratio * sum(weights). Weights are redrawn (same stream) until
    min(weight) <= b, so a nonzero selection always exists. Draw order:
    coordinates row-major, then the n weights.
    """
    rng = SplitMix64(spec.seed)
    pts = _draw_points(rng, spec.n, spec.coords)
    for _ in range(1000):
        weights = [float(rng.uniform_int(1, 1000)) for _ in range(spec.n)]
        b = spec.ratio * sum(weights)
        if min(weights) <= b:
            break
    else:
        raise RuntimeError("could not draw a feasible weight vector")
    name = f"cdp_n{spec.n}_c{spec.coords}_r{format_number(spec.ratio)}_seed{spec.seed}"
    meta = {"family": "cdp", "seed": str(spec.seed), "ratio": format_number(spec.ratio)}
    blocks = [Block("KNAPSACK", (b,), tuple((w,) for w in weights))]
    return _assemble(pts, build_edm(pts), blocks, name, meta, "computed")


def gen_gdp_f(spec: GeneratorSpec) -> EmspInstance:
    """Fixed-cost family: covering row sum(c x) >= B with B = ratio * sum(c)
    and budget row sum(a x) <= K with K = phi * sum(a + b c). Draw order:
    coordinates row-major, then per site (c, a, b) interleaved; the unit
    costs b enter only the budget ceiling K.
    """
    rng = SplitMix64(spec.seed)
    pts = _draw_points(rng, spec.n, spec.coords)
    cap, fixed, unit = draw_site_parameters(rng, spec.n)
    b_min = spec.ratio * float(cap.sum())
    k_max = spec.phi * float((fixed + unit * cap).sum())
    name = (f"gdpf_n{spec.n}_c{spec.coords}_r{format_number(spec.ratio)}"
            f"_phi{format_number(spec.phi)}_seed{spec.seed}")
    meta = {"family": "gdp_f", "seed": str(spec.seed),
            "ratio": format_number(spec.ratio), "phi": format_number(spec.phi)}
    blocks = [Block("GDPF", (b_min, k_max),
                    tuple((float(c), float(a)) for c, a in zip(cap, fixed)))]
    return _assemble(pts, build_edm(pts), blocks, name, meta, "computed")


def gen_gdp_v(spec: GeneratorSpec) -> EmspInstance:
    """Variable-capacity family: integer auxiliaries t_i in [0, c_i] linked
    by t_i <= c_i x_i, covering row sum(t) >= B, budget row
    sum(a x + b t) <= K. Same draws and order as gen_gdp_f.
    """
    rng = SplitMix64(spec.seed)
    pts = _draw_points(rng, spec.n, spec.coords)
    cap, fixed, unit = draw_site_parameters(rng, spec.n)
    b_min = spec.ratio * float(cap.sum())
    k_max = spec.phi * float((fixed + unit * cap).sum())
    name = (f"gdpv_n{spec.n}_c{spec.coords}_r{format_number(spec.ratio)}"
            f"_phi{format_number(spec.phi)}_seed{spec.seed}")
    meta = {"family": "gdp_v", "seed": str(spec.seed),
            "ratio": format_number(spec.ratio), "phi": format_number(spec.phi)}
    blocks = [Block("GDPV", (b_min, k_max),
                    tuple((float(c), float(a), float(b))
                          for c, a, b in zip(cap, fixed, unit)))]
    return _assemble(pts, build_edm(pts), blocks, name, meta, "computed")


def gen_blmsdp(points: PointSet, p: int, delta: float, name: str = "",
               meta=None) -> EmspInstance:
    """Minimum-separation family over given points: exactly p selections,
    and for every point whose strict delta-ball holds at least two points
    a row capping the selections in that ball at one. With delta = 0 the
    balls are empty and only the cardinality row remains.
    """
    if not 1 <= p <= points.n:
        raise ValueError(f"p must lie in [1, {points.n}], got {p}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    q = build_edm(points)
    blocks = [Block("CARD_EQ", (float(p),)), Block("CONFLICT", (float(delta),))]
    return _assemble(points, q, blocks, name, dict(meta or {}), "computed")


def generate(spec: GeneratorSpec) -> EmspInstance:
    """Generate any family from its spec."""
    if spec.family == "cdp":
        return gen_cdp(spec)
    if spec.family == "gdp_f":
        return gen_gdp_f(spec)
    if spec.family == "gdp_v":
        return gen_gdp_v(spec)
    rng = SplitMix64(spec.seed)
    pts = _draw_points(rng, spec.n, spec.coords)
    name = (f"blmsdp_n{spec.n}_c{spec.coords}_p{spec.p}"
            f"_d{format_number(spec.delta)}_seed{spec.seed}")
    meta = {"family": "blmsdp", "seed": str(spec.seed), "p": str(spec.p),
            "delta": format_number(spec.delta)}
    return gen_blmsdp(pts, spec.p, spec.delta, name=name, meta=meta)


def serialize_instance(inst: EmspInstance) -> str:
    """Canonical text form; parse(serialize(inst)) reproduces the instance."""
    n = inst.n
    out = ["EMSP 1"]
    if inst.points is not None:
        out.append(f"{n} {inst.points.dim}")
        for row in inst.points.coords:
            out.append(" ".join(format_number(v) for v in row))
    else:
        out.append(f"{n} 0")
    if inst.name:
        out.append(f"NAME {inst.name}")
    if inst.meta:
        out.append("META " + " ".join(f"{k}={v}" for k, v in inst.meta.items()))
    if inst.points is None:
        out.append("MATRIX")
        for row in inst.q.entries:
            out.append(" ".join(format_number(v) for v in row))
    blocks = inst.blocks
    if blocks is None:
        blocks = _fallback_blocks(inst)
    for blk in blocks:
        out.extend(_emit_block(blk))
    return "\n".join(out) + "\n"


def _fallback_blocks(inst: EmspInstance):
    """Generic encoding for instances built without blocks: AUX + ROW rows."""
    blocks = []
    if inst.aux_vars:
        blocks.append(Block("AUX", (float(len(inst.aux_vars)),),
                            tuple((v.name, v.kind, v.lower, v.upper) for v in inst.aux_vars)))
    index = {nm: i + 1 for i, nm in enumerate(inst.selection_names)}
    index.update({v.name: inst.n + 1 + i for i, v in enumerate(inst.aux_vars)})
    for con in inst.constraints:
        pairs = tuple((float(index[nm]), float(c)) for nm, c in con.coefficients.items())
        blocks.append(Block("ROW", (con.sense, con.rhs), pairs))
    return blocks


def _emit_block(blk: Block):
    if blk.kind == "ROW":
        sense, rhs = blk.params
        terms = " ".join(f"{int(i)}:{format_number(c)}" for i, c in blk.data)
        return [f"ROW {sense} {format_number(rhs)} {terms}"]
    if blk.kind == "AUX":
        lines = [f"AUX {int(blk.params[0])}"]
        lines.extend(f"{nm} {kind} {format_number(lo)} {format_number(hi)}"
                     for nm, kind, lo, hi in blk.data)
        return lines
    lines = [" ".join([blk.kind] + [format_number(p) for p in blk.params])]
    lines.extend(" ".join(format_number(v) for v in row) for row in blk.data)
    return lines


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next_line(self, what: str) -> tuple[int, str]:
        while self.pos < len(self.lines):
            self.pos += 1
            line = self.lines[self.pos - 1].strip()
            if line and not line.startswith("#"):
                return self.pos, line
        raise FormatError(f"line {self.pos + 1}: expected {what}, found end of file")

    def peek(self):
        save = self.pos
        try:
            lineno, line = self.next_line("")
        except FormatError:
            return None
        self.pos = save
        return lineno, line


def _floats(lineno: int, line: str, count: int | None, what: str) -> list[float]:
    toks = line.split()
    if count is not None and len(toks) != count:
        raise FormatError(f"line {lineno}: expected {count} values for {what}, got {len(toks)}")
    try:
        return [float(t) for t in toks]
    except ValueError as exc:
        raise FormatError(f"line {lineno}: bad number in {what}: {exc}") from exc


_BLOCK_KEYWORDS = ("KNAPSACK", "CARD_EQ", "CARD_LE", "GDPF", "GDPV",
                   "CONFLICT", "AUX", "ROW", "MATRIX", "NAME", "META")


def parse_instance(text: str) -> EmspInstance:
    """Parse the native format; errors carry the offending line number."""
    rd = _Reader(text)
    lineno, line = rd.next_line("header")
    if line.split() != ["EMSP", "1"]:
        raise FormatError(f"line {lineno}: expected header 'EMSP 1'")
    lineno, line = rd.next_line("size line 'n s'")
    toks = line.split()
    if len(toks) != 2:
        raise FormatError(f"line {lineno}: expected 'n s'")
    try:
        n, s = int(toks[0]), int(toks[1])
    except ValueError as exc:
        raise FormatError(f"line {lineno}: sizes must be integers") from exc
    if n < 1 or s < 0:
        raise FormatError(f"line {lineno}: need n >= 1 and s >= 0")

    points = None
    if s >= 1:
        coords = np.empty((n, s))
        for i in range(n):
            lineno, line = rd.next_line(f"coordinates of point {i + 1}")
            coords[i] = _floats(lineno, line, s, f"point {i + 1}")
        points = PointSet(coords)

    name = ""
    meta: dict = {}
    matrix = None
    matrix_line = 0
    blocks: list[Block] = []
    n_aux = 0
    while True:
        nxt = rd.peek()
        if nxt is None:
            break
        lineno, line = rd.next_line("block")
        toks = line.split()
        kw = toks[0]
        if kw not in _BLOCK_KEYWORDS:
            raise FormatError(f"line {lineno}: unknown block keyword {kw!r}")
        if kw == "NAME":
            name = line[len("NAME"):].strip()
        elif kw == "META":
            for tok in toks[1:]:
                if "=" not in tok:
                    raise FormatError(f"line {lineno}: META entries must be key=value")
                key, _, val = tok.partition("=")
                meta[key] = val
        elif kw == "MATRIX":
            if s != 0:
                raise FormatError(f"line {lineno}: MATRIX not allowed when coordinates are given")
            matrix_line = lineno
            matrix = np.empty((n, n))
            for i in range(n):
                lineno, line = rd.next_line(f"matrix row {i + 1}")
                matrix[i] = _floats(lineno, line, n, f"matrix row {i + 1}")
        elif kw == "KNAPSACK":
            b = _floats(lineno, " ".join(toks[1:]), 1, "KNAPSACK capacity")[0]
            data = []
            for i in range(n):
                wl, wline = rd.next_line(f"weight {i + 1}")
                data.append(tuple(_floats(wl, wline, 1, f"weight {i + 1}")))
            blocks.append(Block("KNAPSACK", (b,), tuple(data)))
        elif kw in ("CARD_EQ", "CARD_LE"):
            p = _floats(lineno, " ".join(toks[1:]), 1, kw)[0]
            blocks.append(Block(kw, (p,)))
        elif kw in ("GDPF", "GDPV"):
            hdr = _floats(lineno, " ".join(toks[1:]), 2, f"{kw} header")
            width = 2 if kw == "GDPF" else 3
            data = []
            for i in range(n):
                dl, dline = rd.next_line(f"{kw} site {i + 1}")
                data.append(tuple(_floats(dl, dline, width, f"{kw} site {i + 1}")))
            blocks.append(Block(kw, tuple(hdr), tuple(data)))
            if kw == "GDPV":
                n_aux += n
        elif kw == "CONFLICT":
            d = _floats(lineno, " ".join(toks[1:]), 1, "CONFLICT threshold")[0]
            blocks.append(Block("CONFLICT", (d,)))
        elif kw == "AUX":
            try:
                k = int(toks[1])
            except (IndexError, ValueError) as exc:
                raise FormatError(f"line {lineno}: AUX needs a count") from exc
            data = []
            for i in range(k):
                al, aline = rd.next_line(f"aux declaration {i + 1}")
                parts = aline.split()
                if len(parts) != 4:
                    raise FormatError(f"line {al}: expected 'name kind lower upper'")
                lo, hi = _floats(al, " ".join(parts[2:]), 2, "aux bounds")
                data.append((parts[0], parts[1], lo, hi))
            blocks.append(Block("AUX", (float(k),), tuple(data)))
            n_aux += k
        elif kw == "ROW":
            if len(toks) < 3:
                raise FormatError(f"line {lineno}: ROW needs a sense and right-hand side")
            sense = toks[1]
            if sense not in (LE, GE, EQ):
                raise FormatError(f"line {lineno}: unknown sense {sense!r}")
            rhs = _floats(lineno, toks[2], 1, "ROW rhs")[0]
            pairs = []
            for tok in toks[3:]:
                idx_s, _, coef_s = tok.partition(":")
                try:
                    idx, coef = int(idx_s), float(coef_s)
                except ValueError as exc:
                    raise FormatError(f"line {lineno}: bad term {tok!r}") from exc
                if not 1 <= idx <= n + n_aux:
                    raise FormatError(f"line {lineno}: index {idx} out of range")
                pairs.append((float(idx), coef))
            if not pairs:
                raise FormatError(f"line {lineno}: ROW has no terms")
            blocks.append(Block("ROW", (sense, rhs), tuple(pairs)))

    if points is None:
        if matrix is None:
            raise FormatError("file gives neither coordinates nor a MATRIX block")
        q = DistanceMatrix(matrix)
        problems = q.diagnostics()
        if problems:
            raise FormatError(f"line {matrix_line}: {problems[0]}")
        q_source = "read"
    else:
        q = build_edm(points)
        q_source = "computed"

    try:
        inst = _assemble(points, q, blocks, name, meta, q_source)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    return inst


def load_coordinates_csv(text: str, lat_col: str, lon_col: str):
    """PointSet from a headed CSV, plus the count of skipped rows.

    Rows whose latitude or longitude is missing or unparseable are
    skipped. Points keep file order and hold (lat, lon) pairs.
    """
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or lat_col not in reader.fieldnames \
            or lon_col not in reader.fieldnames:
        raise ValueError(f"CSV must provide columns {lat_col!r} and {lon_col!r}")
    pts = []
    skipped = 0
    for row in reader:
        try:
            lat = float(row[lat_col])
            lon = float(row[lon_col])
        except (TypeError, ValueError):
            skipped += 1
            continue
        pts.append((lat, lon))
    if not pts:
        raise ValueError("no usable coordinate rows in the CSV")
    return PointSet(np.array(pts)), skipped
