"""Per-depth mode orders and best-mode guards, the DSE search point.

A guard entry is ``None`` (always test the mode at this position) or a mode id
``m`` (test it only if ``m`` is the best mode so far). Guards are aligned
position by position with the order, so slots 0 and 1 are always ``None``.

Text form, one pair of lines per depth::

    O(0)={10,2,0,6,3,4,7,5,1,8}
    G(0)={-,-,10,10,0,6,4,7,2,0}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .codec import MAX_DEPTH, MODE_NAMES, is_valid_mode, valid_modes

ALWAYS = None
DEPTHS = tuple(range(MAX_DEPTH + 1))


class InvalidGenotype(ValueError):
    pass


class GenotypeParseError(ValueError):
    pass


@dataclass(frozen=True)
class DepthGenes:
    depth: int
    order: tuple[int, ...]
    guards: tuple[int | None, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(m) for m in self.order))
        object.__setattr__(self, "guards", tuple(None if g is None else int(g) for g in self.guards))

    def violations(self) -> list[str]:
        d = self.depth
        out = []
        if d not in DEPTHS:
            return [f"depth {d}: depth outside 0..{MAX_DEPTH}"]
        allowed = valid_modes(d)
        for m in self.order:
            if not is_valid_mode(m, d):
                out.append(f"depth {d}: order entry {m} is a mode invalid at depth")
        if len(set(self.order)) != len(self.order) or sorted(self.order) != sorted(allowed):
            out.append(f"depth {d}: order is not a permutation of the valid modes {list(allowed)}")
        if len(self.guards) != len(self.order):
            out.append(f"depth {d}: guard vector has {len(self.guards)} entries, order has {len(self.order)}")
        for i, g in enumerate(self.guards):
            if i < 2 and g is not None:
                out.append(f"depth {d}: guard slot {i} must be AlwaysTest")
            if g is not None and not is_valid_mode(g, d):
                out.append(f"depth {d}: guard slot {i} targets mode {g}, a mode invalid at depth")
        return out

    def unreachable_positions(self) -> list[int]:
        """Positions whose guard can never be satisfied.

        A guarded mode can only run if its target was evaluated at an earlier
        reachable position, since the best mode is always an evaluated one.
        """
        reachable: list[bool] = []
        seen: set[int] = set()
        for mode, g in zip(self.order, self.guards):
            ok = g is None or g in seen
            reachable.append(ok)
            if ok:
                seen.add(mode)
        return [i for i, ok in enumerate(reachable) if not ok]


@dataclass(frozen=True)
class Genotype:
    depths: tuple[DepthGenes, ...]

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(self.depths))

    def __getitem__(self, depth: int) -> DepthGenes:
        return self.depths[depth]

    @classmethod
    def from_lists(cls, orders, guards) -> "Genotype":
        return cls(tuple(DepthGenes(d, o, g) for d, (o, g) in enumerate(zip(orders, guards))))

    def to_text(self) -> str:
        lines = []
        for genes in self.depths:
            lines.append(f"O({genes.depth})={{{','.join(str(m) for m in genes.order)}}}")
            lines.append(f"G({genes.depth})={{{','.join('-' if g is None else str(g) for g in genes.guards)}}}")
        return "\n".join(lines) + "\n"

    def to_compact(self) -> str:
        """Single-line form used in CSV exports."""
        return self.to_text().strip().replace("\n", ";")

    def to_dict(self) -> dict:
        return {
            "format": "modedse-genotype/1",
            "depths": [
                {"depth": g.depth, "order": list(g.order), "guards": list(g.guards)} for g in self.depths
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Genotype":
        try:
            depths = sorted(data["depths"], key=lambda e: e["depth"])
            return cls(tuple(DepthGenes(e["depth"], e["order"], e["guards"]) for e in depths))
        except (KeyError, TypeError, ValueError) as exc:
            raise GenotypeParseError(f"malformed genotype structure: {exc}") from exc


_VEC = re.compile(r"^\s*([OG])\s*\(\s*(\d+)\s*\)\s*=\s*\{([^}]*)\}\s*$")


def parse_genotype(text: str) -> Genotype:
    """Parse the text form (newline or ``;`` separated) or the JSON export."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            return Genotype.from_dict(json.loads(stripped))
        except json.JSONDecodeError as exc:
            raise GenotypeParseError(f"invalid JSON genotype: {exc}") from exc
    orders: dict[int, tuple] = {}
    guards: dict[int, tuple] = {}
    for raw in re.split(r"[\n;]", text):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _VEC.match(line)
        if not m:
            raise GenotypeParseError(f"cannot parse line {raw.strip()!r}")
        kind, depth, body = m.group(1), int(m.group(2)), m.group(3)
        items = [t.strip() for t in body.split(",")] if body.strip() else []
        target = orders if kind == "O" else guards
        if depth in target:
            raise GenotypeParseError(f"duplicate {kind}({depth})")
        try:
            if kind == "O":
                target[depth] = tuple(int(t) for t in items)
            else:
                target[depth] = tuple(None if t == "-" else int(t) for t in items)
        except ValueError as exc:
            raise GenotypeParseError(f"bad entry in {kind}({depth}): {exc}") from exc
    if set(orders) != set(guards):
        raise GenotypeParseError(f"order depths {sorted(orders)} and guard depths {sorted(guards)} differ")
    return Genotype(tuple(DepthGenes(d, orders[d], guards[d]) for d in sorted(orders)))


def validate_genotype(genotype: Genotype) -> list[str]:
    """All invariant violations; empty iff the genotype is usable."""
    out = []
    present = [g.depth for g in genotype.depths]
    if sorted(present) != list(DEPTHS) or len(present) != len(DEPTHS):
        out.append(f"genotype must hold each depth 0..{MAX_DEPTH} exactly once, got {present}")
    for i, genes in enumerate(genotype.depths):
        if genes.depth != i and genes.depth in DEPTHS:
            out.append(f"depth entries out of order at index {i}")
        out.extend(genes.violations())
    return out


def require_valid(genotype: Genotype) -> None:
    problems = validate_genotype(genotype)
    if problems:
        raise InvalidGenotype("; ".join(problems))


def exhaustive_genotype() -> Genotype:
    """Every valid mode in mode-id order, all guards AlwaysTest."""
    return Genotype(tuple(DepthGenes(d, valid_modes(d), (None,) * len(valid_modes(d))) for d in DEPTHS))


def hm_like_genotype() -> Genotype:
    """Merge/skip and Inter2Nx2N first, PU splits only after an inter win,
    intra and split always."""
    shallow = DepthGenes(0, (2, 1, 3, 4, 5, 6, 7, 8, 0, 10), (None, None, 1, 1, 4, 4, 3, 3, None, None))
    deep = DepthGenes(3, (2, 1, 3, 4, 0, 9), (None, None, 1, 1, None, 0))
    return Genotype((shallow, DepthGenes(1, shallow.order, shallow.guards),
                     DepthGenes(2, shallow.order, shallow.guards), deep))


# Point PB of the published QP-40 solutions
PB_GENOTYPE_TEXT = """\
O(0)={10,2,0,6,3,4,7,5,1,8}
G(0)={-,-,10,10,0,6,4,7,2,0}
O(1)={2,3,10,0,5,4,8,7,1,6}
G(1)={-,-,3,2,3,3,4,2,0,0}
O(2)={4,2,7,5,10,8,6,1,0,3}
G(2)={-,-,4,2,2,5,5,4,8,10}
O(3)={1,3,2,4,0,9}
G(3)={-,-,1,3,2,4}
"""

# Point PE of the published QP-40 solutions
PE_GENOTYPE_TEXT = """\
O(0)={10,1,0,5,7,6,8,3,4,2}
G(0)={-,-,1,0,5,0,6,0,6,4}
O(1)={10,1,2,8,6,4,0,3,5,7}
G(1)={-,-,10,1,8,2,1,1,8,10}
O(2)={1,10,0,4,3,6,2,5,7,8}
G(2)={-,-,1,10,10,0,3,6,2,6}
O(3)={3,9,1,4,2,0}
G(3)={-,-,3,1,4,1}
"""


def describe(genotype: Genotype) -> str:
    """Human-readable decision summary with reachability analysis."""
    lines = []
    total_unreachable = 0
    for genes in genotype.depths:
        lines.append(f"depth {genes.depth} ({64 >> genes.depth}x{64 >> genes.depth}):")
        unreachable = set(genes.unreachable_positions())
        total_unreachable += len(unreachable)
        for i, (m, g) in enumerate(zip(genes.order, genes.guards)):
            if g is None:
                cond = "always tested"
            else:
                cond = f"only if best so far is {g} ({MODE_NAMES[g]})"
            flag = "  [UNREACHABLE]" if i in unreachable else ""
            lines.append(f"  {i:2d}: mode {m:2d} {MODE_NAMES[m]:<11s} {cond}{flag}")
        always = [genes.order[i] for i, g in enumerate(genes.guards) if g is None]
        lines.append(f"  unconditionally tested: {', '.join(str(m) for m in always)}")
    lines.append("no unreachable modes" if total_unreachable == 0 else f"{total_unreachable} unreachable mode position(s)")
    return "\n".join(lines) + "\n"


def render_unwrapped(genotype: Genotype) -> str:
    """C-like listing of the mode decision with guards as if-clauses."""
    out = []
    for genes in genotype.depths:
        out.append(f"void decide_depth{genes.depth}(Cu *cu) {{")
        for m, g in zip(genes.order, genes.guards):
            call = f"try_mode(cu, {m} /* {MODE_NAMES[m]} */);"
            out.append(f"    {call}" if g is None else f"    if (cu->best_mode == {g}) {call}")
        out.append("}")
    return "\n".join(out) + "\n"
