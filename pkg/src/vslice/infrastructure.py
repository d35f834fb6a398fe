"""Substrate inventory and capacity bookkeeping.

Capacity lives on (element, dimension) pairs:

* core node  -> ``compute``, ``storage``
* gNB        -> ``radio``
* CU/DU/RU   -> ``instance`` (capacity 1: a component serves one dedicated
  slice, or any number of slices sharing it)
* TN link    -> ``bandwidth``

Usage of a pair is the sum of its Dedicated grants plus the largest Shared
grant on it: sharers overlap on one pool instead of stacking. Each sharer is
attributed an equal ``1/k`` part of that pool.

All functions here are pure over an ``allocations`` mapping
(slice id -> :class:`Allocation`); :func:`allocate` and :func:`release`
return new mappings.
"""
from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .documents import read_yaml
from .errors import DocumentError, StalePlacement, UnknownSlice
from .model import NssitTriple, ResourceRequirement, Sharing, SliceTemplate, derive_nssits

Key = tuple[str, str]  # (element id, dimension)


@dataclass(frozen=True)
class CoreNode:
    id: str
    functions: tuple[str, ...]
    compute: int
    storage: int


@dataclass(frozen=True)
class Du:
    id: str
    cu: str


@dataclass(frozen=True)
class Ru:
    id: str
    du: str


@dataclass(frozen=True)
class Gnb:
    id: str
    cu: str
    dus: tuple[Du, ...]
    rus: tuple[Ru, ...]
    radio: int


@dataclass(frozen=True)
class Link:
    id: str
    endpoints: tuple[str, str]
    bandwidth: int


@dataclass(frozen=True)
class Substrate:
    core_nodes: tuple[CoreNode, ...] = ()
    gnbs: tuple[Gnb, ...] = ()
    tn_links: tuple[Link, ...] = ()

    def problems(self) -> list[str]:
        out = []
        ids: list[str] = []
        for c in self.core_nodes:
            ids.append(c.id)
            if c.compute < 0 or c.storage < 0:
                out.append(f"{c.id}: negative capacity")
        for g in self.gnbs:
            ids += [g.id, g.cu, *(d.id for d in g.dus), *(r.id for r in g.rus)]
            if g.radio < 0:
                out.append(f"{g.id}: negative radio capacity")
            du_ids = {d.id for d in g.dus}
            for d in g.dus:
                if d.cu != g.cu:
                    out.append(f"{d.id}: attached to {d.cu}, not to {g.cu}")
            for r in g.rus:
                if r.du not in du_ids:
                    out.append(f"{r.id}: attached to unknown DU {r.du}")
        nodes = {c.id for c in self.core_nodes} | {g.id for g in self.gnbs}
        for link in self.tn_links:
            ids.append(link.id)
            if link.bandwidth < 0:
                out.append(f"{link.id}: negative bandwidth")
            for e in link.endpoints:
                if e not in nodes:
                    out.append(f"{link.id}: endpoint {e} does not exist")
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            out.append(f"duplicate element ids: {', '.join(dup)}")
        return out

    def capacities(self) -> dict[Key, int]:
        caps: dict[Key, int] = {}
        for c in self.core_nodes:
            caps[(c.id, "compute")] = c.compute
            caps[(c.id, "storage")] = c.storage
        for g in self.gnbs:
            caps[(g.id, "radio")] = g.radio
            caps[(g.cu, "instance")] = 1
            for d in g.dus:
                caps[(d.id, "instance")] = 1
            for r in g.rus:
                caps[(r.id, "instance")] = 1
        for link in self.tn_links:
            caps[(link.id, "bandwidth")] = link.bandwidth
        return caps

    def components(self) -> dict[str, str]:
        """Every addressable element id -> its component class."""
        out = {c.id: "core" for c in self.core_nodes}
        for g in self.gnbs:
            out[g.id] = "gnb"
            out[g.cu] = "cu"
            out.update({d.id: "du" for d in g.dus})
            out.update({r.id: "ru" for r in g.rus})
        out.update({link.id: "tn" for link in self.tn_links})
        return out

    def amf_host(self) -> str | None:
        for c in sorted(self.core_nodes, key=lambda c: c.id):
            if "AMF" in c.functions:
                return c.id
        return None

    # -- documents

    def to_dict(self) -> dict:
        return {
            "core_nodes": [
                {"id": c.id, "functions": list(c.functions), "compute": c.compute, "storage": c.storage}
                for c in self.core_nodes
            ],
            "gnbs": [
                {
                    "id": g.id, "cu": g.cu,
                    "dus": [{"id": d.id, "cu": d.cu} for d in g.dus],
                    "rus": [{"id": r.id, "du": r.du} for r in g.rus],
                    "radio": g.radio,
                }
                for g in self.gnbs
            ],
            "tn_links": [
                {"id": link.id, "endpoints": list(link.endpoints), "bandwidth": link.bandwidth}
                for link in self.tn_links
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, where: str = "substrate") -> "Substrate":
        try:
            sub = cls(
                core_nodes=tuple(
                    CoreNode(str(c["id"]), tuple(c.get("functions") or ()), int(c["compute"]), int(c["storage"]))
                    for c in d.get("core_nodes") or ()
                ),
                gnbs=tuple(
                    Gnb(
                        str(g["id"]), str(g["cu"]),
                        tuple(Du(str(x["id"]), str(x["cu"])) for x in g.get("dus") or ()),
                        tuple(Ru(str(x["id"]), str(x["du"])) for x in g.get("rus") or ()),
                        int(g["radio"]),
                    )
                    for g in d.get("gnbs") or ()
                ),
                tn_links=tuple(
                    Link(str(x["id"]), tuple(x["endpoints"]), int(x["bandwidth"]))
                    for x in d.get("tn_links") or ()
                ),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DocumentError(f"{where}: malformed substrate ({exc!r})") from None
        problems = sub.problems()
        if problems:
            raise DocumentError(f"{where}: {problems[0]}")
        return sub

    @classmethod
    def load(cls, path: str | Path) -> "Substrate":
        return cls.from_dict(read_yaml(path), str(path))


# -- demands, grants, allocations ------------------------------------------------


@dataclass(frozen=True)
class Demand:
    """What one end-to-end slice needs, gathered from its three subnet templates."""

    compute: int = 0
    storage: int = 0
    radio: int = 0
    bandwidth: int = 0
    sharing: tuple[tuple[str, Sharing], ...] = ()

    def mode(self, component_class: str) -> Sharing:
        return dict(self.sharing).get(component_class, Sharing.DEDICATED)

    @classmethod
    def of(cls, nssits: NssitTriple) -> "Demand":
        core, ran, tn = nssits
        return cls(
            compute=core.resources.computation,
            storage=core.resources.storage,
            radio=ran.resources.radio,
            bandwidth=tn.resources.communication,
            sharing=tuple(sorted(core.resources.sharing.items())),
        )

    @classmethod
    def of_template(cls, tpl: SliceTemplate) -> "Demand":
        return cls.of(derive_nssits(tpl))

    @classmethod
    def of_resources(cls, r: ResourceRequirement) -> "Demand":
        return cls(r.computation, r.storage, r.radio, r.communication, tuple(sorted(r.sharing.items())))


@dataclass(frozen=True)
class Grant:
    element: str
    dimension: str
    quantity: int
    sharing: Sharing = Sharing.DEDICATED

    @property
    def key(self) -> Key:
        return (self.element, self.dimension)


@dataclass(frozen=True)
class Allocation:
    slice_id: str
    grants: tuple[Grant, ...]

    def elements(self) -> set[str]:
        return {g.element for g in self.grants}


@dataclass(frozen=True)
class Placement:
    core: str
    gnb: str
    cu: str
    du: str
    ru: str
    link: str
    grants: tuple[Grant, ...] = field(default=(), compare=False)
    basis: str = field(default="", compare=False)

    def as_tuple(self) -> tuple[str, ...]:
        return (self.core, self.gnb, self.cu, self.du, self.ru, self.link)


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    placement: Placement | None = None
    bottleneck: str | None = None
    reason: str = ""


Allocations = Mapping[str, Allocation]


def state_hash(allocations: Allocations) -> str:
    """Canonical digest of the allocation state (and hence of every residual)."""
    canon = [
        [sid, sorted([g.element, g.dimension, g.quantity, g.sharing.value] for g in a.grants)]
        for sid, a in sorted(allocations.items())
    ]
    return hashlib.sha256(json.dumps(canon, separators=(",", ":")).encode()).hexdigest()


class Usage:
    """Incremental usage counters over a set of grants."""

    def __init__(self, grants: Iterable[Grant] = ()):
        self.dedicated: dict[Key, int] = defaultdict(int)
        self.shared: dict[Key, dict[int, int]] = defaultdict(lambda: defaultdict(int))
        for g in grants:
            self.add(g)

    def add(self, g: Grant) -> None:
        if g.sharing is Sharing.SHARED:
            self.shared[g.key][g.quantity] += 1
        else:
            self.dedicated[g.key] += g.quantity

    def remove(self, g: Grant) -> None:
        if g.sharing is Sharing.SHARED:
            bucket = self.shared[g.key]
            bucket[g.quantity] -= 1
            if not bucket[g.quantity]:
                del bucket[g.quantity]
        else:
            self.dedicated[g.key] -= g.quantity

    def used(self, key: Key) -> int:
        pool = self.shared.get(key)
        return self.dedicated.get(key, 0) + (max(pool) if pool else 0)

    def used_with(self, grants: Sequence[Grant]) -> dict[Key, int]:
        """Usage of every key touched by ``grants`` if they were added."""
        extra_ded: dict[Key, int] = defaultdict(int)
        extra_sh: dict[Key, int] = defaultdict(int)
        for g in grants:
            if g.sharing is Sharing.SHARED:
                extra_sh[g.key] = max(extra_sh[g.key], g.quantity)
            else:
                extra_ded[g.key] += g.quantity
        out = {}
        for key in set(extra_ded) | set(extra_sh):
            pool = self.shared.get(key)
            sh = max(max(pool) if pool else 0, extra_sh.get(key, 0))
            out[key] = self.dedicated.get(key, 0) + extra_ded.get(key, 0) + sh
        return out


def all_grants(allocations: Allocations) -> Iterator[Grant]:
    for sid in sorted(allocations):
        yield from allocations[sid].grants


def usage(allocations: Allocations) -> Usage:
    return Usage(all_grants(allocations))


def residuals(sub: Substrate, allocations: Allocations) -> dict[Key, int]:
    u = usage(allocations)
    return {k: cap - u.used(k) for k, cap in sub.capacities().items()}


def attributed(allocations: Allocations, slice_id: str) -> dict[Key, Fraction]:
    """Capacity charged to ``slice_id``: dedicated grants in full, shared pools split evenly."""
    if slice_id not in allocations:
        raise UnknownSlice(slice_id)
    sharers: dict[Key, list[int]] = defaultdict(list)
    for g in all_grants(allocations):
        if g.sharing is Sharing.SHARED:
            sharers[g.key].append(g.quantity)
    out: dict[Key, Fraction] = defaultdict(Fraction)
    for g in allocations[slice_id].grants:
        if g.sharing is Sharing.SHARED:
            pool = sharers[g.key]
            out[g.key] += Fraction(max(pool), len(pool))
        else:
            out[g.key] += g.quantity
    return dict(out)


# -- placement ------------------------------------------------------------------


def grants_for(p: Placement, demand: Demand) -> tuple[Grant, ...]:
    m = demand.mode
    return (
        Grant(p.core, "compute", demand.compute, m("core")),
        Grant(p.core, "storage", demand.storage, m("core")),
        Grant(p.gnb, "radio", demand.radio, m("ru")),
        Grant(p.cu, "instance", 1, m("cu")),
        Grant(p.du, "instance", 1, m("du")),
        Grant(p.ru, "instance", 1, m("ru")),
        Grant(p.link, "bandwidth", demand.bandwidth, m("tn")),
    )


def structural_placements(sub: Substrate) -> list[Placement]:
    """Every (core, gNB subtree, connecting link) combination, in first-fit order."""
    out = []
    for core in sorted(sub.core_nodes, key=lambda c: c.id):
        for gnb in sorted(sub.gnbs, key=lambda g: g.id):
            links = sorted(
                (link for link in sub.tn_links if set(link.endpoints) == {core.id, gnb.id}),
                key=lambda link: link.id,
            )
            for du in sorted(gnb.dus, key=lambda d: d.id):
                for ru in sorted((r for r in gnb.rus if r.du == du.id), key=lambda r: r.id):
                    for link in links:
                        out.append(Placement(core.id, gnb.id, gnb.cu, du.id, ru.id, link.id))
    return out


def _fits(u: Usage, caps: Mapping[Key, int], grants: Sequence[Grant]) -> bool:
    return all(v <= caps.get(k, 0) for k, v in u.used_with(grants).items())


def _bottleneck(sub: Substrate, u: Usage, caps: Mapping[Key, int], demand: Demand) -> tuple[str | None, str]:
    m = demand.mode

    def ok(g: Grant) -> bool:
        return _fits(u, caps, [g])

    classes = [
        ("core node", sorted(sub.core_nodes, key=lambda c: c.id),
         lambda c: ok(Grant(c.id, "compute", demand.compute, m("core")))
         and ok(Grant(c.id, "storage", demand.storage, m("core")))),
        ("gNB radio", sorted(sub.gnbs, key=lambda g: g.id),
         lambda g: ok(Grant(g.id, "radio", demand.radio, m("ru")))),
        ("CU", sorted({g.cu for g in sub.gnbs}), lambda cu: ok(Grant(cu, "instance", 1, m("cu")))),
        ("DU", sorted(d.id for g in sub.gnbs for d in g.dus), lambda du: ok(Grant(du, "instance", 1, m("du")))),
        ("RU", sorted(r.id for g in sub.gnbs for r in g.rus), lambda ru: ok(Grant(ru, "instance", 1, m("ru")))),
        ("TN link", sorted(sub.tn_links, key=lambda x: x.id),
         lambda x: ok(Grant(x.id, "bandwidth", demand.bandwidth, m("tn")))),
    ]
    for label, elements, fits in classes:
        if not elements:
            return None, f"no {label} in substrate"
        if not any(fits(e) for e in elements):
            first = elements[0]
            eid = first if isinstance(first, str) else first.id
            return eid, f"insufficient {label} capacity at {eid}"
    return None, "no connected placement with enough residual capacity"


def feasibility_check(sub: Substrate, current: Allocations, demand: Demand) -> FeasibilityResult:
    """First feasible placement of ``demand`` on top of ``current``, or the bottleneck."""
    caps = sub.capacities()
    u = usage(current)
    basis = state_hash(current)
    for p in structural_placements(sub):
        grants = grants_for(p, demand)
        if _fits(u, caps, grants):
            return FeasibilityResult(True, _bind(p, grants, basis))
    element, reason = _bottleneck(sub, u, caps, demand)
    return FeasibilityResult(False, None, element, reason)


def _bind(p: Placement, grants, basis) -> Placement:
    return Placement(p.core, p.gnb, p.cu, p.du, p.ru, p.link, tuple(grants), basis)


_DIMENSION_CLASS = {"compute": "core", "storage": "core", "radio": "ru", "bandwidth": "tn"}


def _aggregate_fits(sub: Substrate, u: Usage, caps: Mapping[Key, int], demands: Sequence[Demand]) -> bool:
    """Necessary condition: dedicated demand in total stays within total residual per dimension."""
    free: dict[str, int] = defaultdict(int)
    slots: dict[str, int] = defaultdict(int)
    classes = sub.components()
    for key, cap in caps.items():
        left = cap - u.used(key)
        if key[1] == "instance":
            slots[classes[key[0]]] += 1 if left >= 1 else 0
        else:
            free[key[1]] += left
    for dim, cls in _DIMENSION_CLASS.items():
        need = sum(getattr(d, dim) for d in demands if d.mode(cls) is Sharing.DEDICATED)
        if need > free[dim]:
            return False
    for cls in ("cu", "du", "ru"):
        if sum(1 for d in demands if d.mode(cls) is Sharing.DEDICATED) > slots[cls]:
            return False
    return True


def joint_placement(sub: Substrate, current: Allocations, demands: Sequence[Demand]) -> list[Placement] | None:
    """Place every demand simultaneously, or return None.

    Depth-first over the demands in order, each trying placements in
    first-fit order, so the answer is the first feasible combination in
    lexicographic order of the per-demand placement lists.
    """
    caps = sub.capacities()
    u = usage(current)
    basis = state_hash(current)
    structural = structural_placements(sub)
    if not _aggregate_fits(sub, u, caps, demands):
        return None
    # placements that fail alone can never succeed together
    options = []
    for d in demands:
        opts = [(p, grants_for(p, d)) for p in structural]
        opts = [(p, g) for p, g in opts if _fits(u, caps, g)]
        if not opts:
            return None
        options.append(opts)

    chosen: list[Placement] = []

    def search(i: int) -> bool:
        if i == len(options):
            return True
        for p, grants in options[i]:
            if _fits(u, caps, grants):
                for g in grants:
                    u.add(g)
                chosen.append(_bind(p, grants, basis))
                if search(i + 1):
                    return True
                chosen.pop()
                for g in grants:
                    u.remove(g)
        return False

    return chosen if search(0) else None


def allocate(sub: Substrate, current: Allocations, placement: Placement, slice_id: str) -> dict[str, Allocation]:
    """Commit one placement returned by :func:`feasibility_check` against ``current``."""
    return allocate_many(sub, current, [(placement, slice_id)])


def allocate_many(sub: Substrate, current: Allocations, items: Sequence[tuple[Placement, str]]) -> dict[str, Allocation]:
    """Commit several placements computed together against ``current`` (all or nothing)."""
    if any(p.basis != state_hash(current) for p, _ in items):
        raise StalePlacement("allocation state changed since the placement was computed")
    ids = [sid for _, sid in items]
    for sid in ids:
        if sid in current or ids.count(sid) > 1:
            raise StalePlacement(f"{sid} already holds an allocation")
    u = usage(current)
    caps = sub.capacities()
    new = [g for p, _ in items for g in p.grants]
    if not _fits(u, caps, new):
        raise StalePlacement("placement no longer fits")
    out = dict(current)
    for p, sid in items:
        out[sid] = Allocation(sid, p.grants)
    return out


def release(sub: Substrate, allocations: Allocations, slice_id: str) -> dict[str, Allocation]:
    if slice_id not in allocations:
        raise UnknownSlice(slice_id)
    return {k: v for k, v in allocations.items() if k != slice_id}


def holders(allocations: Allocations, element: str) -> list[tuple[str, Sharing]]:
    """Slices holding any grant on ``element`` with the sharing mode of that grant."""
    out = []
    for sid in sorted(allocations):
        for g in allocations[sid].grants:
            if g.element == element:
                out.append((sid, g.sharing))
                break
    return out


def capacity_problems(sub: Substrate, allocations: Allocations) -> list[str]:
    caps = sub.capacities()
    u = usage(allocations)
    out = []
    for key in sorted(set(u.dedicated) | set(u.shared)):
        if key not in caps:
            out.append(f"grant on unknown element {key}")
        elif u.dedicated.get(key, 0) > caps[key] or u.used(key) > caps[key]:
            out.append(f"{key[0]}/{key[1]}: used {u.used(key)} > capacity {caps[key]}")
    for sid, a in allocations.items():
        if a.slice_id != sid:
            out.append(f"allocation for {a.slice_id} stored under {sid}")
        if any(g.quantity < 0 for g in a.grants):
            out.append(f"{sid}: negative grant")
    return out
