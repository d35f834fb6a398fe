"""Seeded discrete-event simulation of one vertical-provisioning scenario under either mode.

Events are processed in ``(time, priority rank, sequence number)`` order;
identical scenario, seed and mode give an identical event log and report.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import infrastructure as infra
from .broker import (
    LIFECYCLE_OPS,
    ChannelRole,
    Command,
    Exposure,
    NetworkSliceBroker,
    Query,
    SliceRequest,
)
from .catalogue import Catalogue
from .documents import read_yaml, vertical_from_dict
from .errors import (
    DocumentError,
    IllegalTransition,
    InvariantViolation,
    ScenarioInvalid,
    SliceNotActive,
    SlicingError,
    TooManySlices,
)
from .model import (
    MAX_SUB_SLICES,
    Flavor,
    Level,
    Ordinal,
    ProvisioningMode,
    Vertical,
    required_slice_count,
    validate_template,
)
from .orchestration import (
    ACTIVE_PHASES,
    Event,
    FcapsEvent,
    FcapsKind,
    Kind,
    Nsmf,
    Phase,
    SliceInstance,
    csmf_translate,
)

MAX_SLICES_PER_UE = 8
DIMENSIONS = ("compute", "storage", "radio", "bandwidth", "instance")
EVENT_KINDS = ("arrive", "attach", "detach", "fault", "command", "terminate", "query")


# -- UEs ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Attachment:
    instance_id: str
    smf: str
    frequency: str = "intra"  # intra/inter-frequency tag, no behavioural effect


@dataclass(frozen=True)
class UeState:
    ue_id: str
    vertical_id: str = ""
    subscribed: tuple[str, ...] = ()
    mobility: str = "static"
    d2d_capable: bool = False
    attached: tuple[Attachment, ...] = ()
    serving_gnb: str | None = None
    amf: str | None = None

    def attached_ids(self) -> list[str]:
        return [a.instance_id for a in self.attached]


def attach_ue(ue: UeState, instance: SliceInstance, gnb: str, amf_host: str = "core",
              smf_host: str = "core", frequency: str = "intra") -> UeState:
    """Attach ``ue`` to one more slice: one AMF for all its slices, a fresh SMF per slice."""
    if instance.phase not in ACTIVE_PHASES:
        raise SliceNotActive(f"{instance.instance_id} is {instance.phase.value}")
    if instance.instance_id in ue.attached_ids():
        raise ValueError(f"{ue.ue_id} already attached to {instance.instance_id}")
    if len(ue.attached) >= MAX_SLICES_PER_UE:
        raise TooManySlices(f"{ue.ue_id} already served by {MAX_SLICES_PER_UE} slices")
    amf = ue.amf or f"amf@{amf_host}/{ue.ue_id}"
    smf = f"smf@{smf_host}/{instance.instance_id}/{ue.ue_id}"
    return replace(
        ue,
        attached=ue.attached + (Attachment(instance.instance_id, smf, frequency),),
        serving_gnb=ue.serving_gnb or gnb,
        amf=amf,
    )


def detach_ue(ue: UeState, instance_id: str) -> UeState:
    rest = tuple(a for a in ue.attached if a.instance_id != instance_id)
    if len(rest) == len(ue.attached):
        raise ValueError(f"{ue.ue_id} is not attached to {instance_id}")
    if not rest:
        return replace(ue, attached=(), serving_gnb=None, amf=None)
    return replace(ue, attached=rest)


def ue_problems(ue: UeState) -> list[str]:
    out = []
    if len(ue.attached) > MAX_SLICES_PER_UE:
        out.append(f"{ue.ue_id}: {len(ue.attached)} slices attached")
    smfs = [a.smf for a in ue.attached]
    if len(set(smfs)) != len(smfs):
        out.append(f"{ue.ue_id}: SMF binding reused across slices")
    if ue.attached and ue.amf is None:
        out.append(f"{ue.ue_id}: attached without AMF binding")
    ids = ue.attached_ids()
    if len(set(ids)) != len(ids):
        out.append(f"{ue.ue_id}: attached twice to one slice")
    return out


# -- scenario ----------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduledEvent:
    time: int
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __hash__(self):
        return hash((self.time, self.kind, json.dumps(dict(self.params), sort_keys=True, default=str)))


@dataclass
class Scenario:
    seed: int
    horizon: int
    substrate: infra.Substrate
    catalogue: Catalogue
    verticals: dict[str, Vertical]
    ues: tuple[UeState, ...] = ()
    events: tuple[ScheduledEvent, ...] = ()
    us_submission: str = "independent"
    traffic: Mapping[str, Any] | None = None
    descriptions: Mapping[str, Mapping[str, Mapping[str, str]]] = field(default_factory=dict)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def problems(self) -> list[str]:
        out = []
        if self.horizon < 0:
            out.append("negative horizon")
        if self.us_submission not in ("independent", "batch"):
            out.append(f"us_submission must be independent or batch, not {self.us_submission!r}")
        for v in self.verticals.values():
            out += [f"{v.vertical_id}: {p}" for p in v.problems()]
        ue_ids = [u.ue_id for u in self.ues]
        if len(set(ue_ids)) != len(ue_ids):
            out.append("duplicate UE ids")
        ues = {u.ue_id: u for u in self.ues}
        for u in self.ues:
            v = self.verticals.get(u.vertical_id)
            if v is None:
                out.append(f"UE {u.ue_id}: unknown vertical {u.vertical_id}")
                continue
            for uc in u.subscribed:
                if uc not in {x.use_case_id for x in v.use_cases}:
                    out.append(f"UE {u.ue_id}: unknown use case {uc}")
        components = self.substrate.components()
        for i, ev in enumerate(self.events):
            where = f"event {i} ({ev.kind}@{ev.time})"
            p = ev.params
            if ev.kind not in EVENT_KINDS:
                out.append(f"{where}: unknown kind")
                continue
            if not 0 <= ev.time <= self.horizon:
                out.append(f"{where}: time outside [0, {self.horizon}]")
            if ev.kind in ("arrive", "command", "terminate", "query"):
                v = self.verticals.get(p.get("vertical"))
                if v is None:
                    out.append(f"{where}: unknown vertical {p.get('vertical')}")
                elif p.get("use_case") is not None and p["use_case"] not in {x.use_case_id for x in v.use_cases}:
                    out.append(f"{where}: unknown use case {p['use_case']}")
            if ev.kind in ("attach", "detach"):
                if p.get("ue") not in ues:
                    out.append(f"{where}: unknown UE {p.get('ue')}")
                elif p.get("use_case") not in ues[p["ue"]].subscribed:
                    out.append(f"{where}: UE {p['ue']} not subscribed to {p.get('use_case')}")
            if ev.kind == "fault":
                if p.get("target") not in components:
                    out.append(f"{where}: unknown component {p.get('target')}")
                try:
                    FcapsKind(p.get("fcaps", "Fault"))
                except ValueError:
                    out.append(f"{where}: bad FCAPS kind {p.get('fcaps')}")
            if ev.kind == "command" and p.get("op") not in LIFECYCLE_OPS:
                out.append(f"{where}: unknown op {p.get('op')}")
            if ev.kind == "query":
                try:
                    Query(p.get("query"))
                except ValueError:
                    out.append(f"{where}: unknown query {p.get('query')}")
        return out


def data_dir() -> Path:
    return Path(str(resources.files("vslice") / "data"))


def _resolve(ref: str, base: Path) -> Path:
    if ref.startswith("builtin:"):
        return data_dir() / ref[len("builtin:"):]
    p = Path(ref)
    return p if p.is_absolute() else base / p


def scenario_from_dict(d: Mapping[str, Any], base: Path, where: str = "scenario") -> Scenario:
    if not isinstance(d, Mapping):
        raise DocumentError(f"{where}: expected a mapping")
    try:
        substrate_ref = d["substrate"]
        catalogue_ref = d["catalogue"]
    except KeyError as exc:
        raise DocumentError(f"{where}: missing field {exc.args[0]!r}") from None
    substrate = (infra.Substrate.from_dict(substrate_ref, f"{where}.substrate") if isinstance(substrate_ref, Mapping)
                 else infra.Substrate.load(_resolve(substrate_ref, base)))
    catalogue = (Catalogue.from_dict(catalogue_ref, f"{where}.catalogue") if isinstance(catalogue_ref, Mapping)
                 else Catalogue.load(_resolve(catalogue_ref, base)))
    verticals = {}
    for i, v in enumerate(d.get("verticals") or ()):
        raw = v if isinstance(v, Mapping) else read_yaml(_resolve(v, base))
        vert = vertical_from_dict(raw, where=f"{where}.verticals[{i}]")
        verticals[vert.vertical_id] = vert
    ues = []
    for i, u in enumerate(d.get("ues") or ()):
        try:
            ues.append(UeState(
                ue_id=str(u["ue_id"]), vertical_id=str(u["vertical"]),
                subscribed=tuple(u.get("subscribed") or ()), mobility=str(u.get("mobility", "static")),
                d2d_capable=bool(u.get("d2d_capable", False)),
            ))
        except (KeyError, TypeError) as exc:
            raise DocumentError(f"{where}.ues[{i}]: {exc!r}") from None
    events = []
    for i, e in enumerate(d.get("events") or ()):
        if not isinstance(e, Mapping) or "at" not in e or "type" not in e:
            raise DocumentError(f"{where}.events[{i}]: needs 'at' and 'type'")
        params = {k: v for k, v in e.items() if k not in ("at", "type")}
        events.append(ScheduledEvent(int(e["at"]), str(e["type"]), params))
    try:
        seed = int(d.get("seed", 0))
        horizon = int(d.get("horizon", max((e.time for e in events), default=0)))
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"{where}: {exc}") from None
    return Scenario(
        seed=seed, horizon=horizon, substrate=substrate, catalogue=catalogue, verticals=verticals,
        ues=tuple(ues), events=tuple(events), us_submission=str(d.get("us_submission", "independent")),
        traffic=d.get("traffic"), descriptions=d.get("descriptions") or {},
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path) if not str(path).startswith("builtin:") else _resolve(str(path), Path("."))
    return scenario_from_dict(read_yaml(path), path.parent, str(path))


def generated_events(scenario: Scenario) -> list[ScheduledEvent]:
    """Seeded UE attach/detach traffic from the scenario's ``traffic`` block."""
    t = scenario.traffic or {}
    ues = [u for u in scenario.ues if u.subscribed]
    if not t or not ues:
        return []
    rng = random.Random(scenario.seed)
    lo, hi = t.get("window", (0, scenario.horizon))
    hi = min(int(hi), scenario.horizon)
    out = []
    for kind in ("attach", "detach"):
        for _ in range(int(t.get(kind, 0))):
            ue = rng.choice(ues)
            out.append(ScheduledEvent(rng.randint(int(lo), hi), kind,
                                      {"ue": ue.ue_id, "use_case": rng.choice(ue.subscribed)}))
    return out


# -- world -------------------------------------------------------------------------


@dataclass
class ArrivalRecord:
    vertical_id: str
    time: int
    requested: int
    admitted: int
    requests: int
    granted_requests: int

    @property
    def partial(self) -> bool:
        return 0 < self.admitted < self.requested


_RANK = {Level.VERY_HIGH: 0, Level.HIGH: 1, Level.MEDIUM: 2, Level.NOT_A_CONCERN: 3}
NO_PRIORITY = 4


class World:
    """All live state of one run: management stack, broker, exposure layer and UEs."""

    def __init__(self, scenario: Scenario, mode: ProvisioningMode):
        self.scenario = scenario
        self.mode = mode
        self.log: list[dict] = []
        self.nsmf = Nsmf(scenario.substrate, scenario.catalogue, log=self.log)
        self.exposure = Exposure(self.nsmf, ue_view=self.ue_view)
        self.broker = NetworkSliceBroker(self.nsmf, self.exposure)
        self.ues: dict[str, UeState] = {u.ue_id: u for u in scenario.ues}
        self.serving: dict[tuple[str, str], str] = {}
        self.arrivals: list[ArrivalRecord] = []
        self.committed: dict[str, int] = {d: 0 for d in DIMENSIONS}
        self.attach_ok = 0
        self.attach_rejected = 0
        self.caps = scenario.substrate.capacities()

    # -- views

    def ue_view(self, instance_id: str) -> list[tuple[str, str]]:
        return sorted((u.ue_id, u.serving_gnb or "") for u in self.ues.values() if instance_id in u.attached_ids())

    def priority_rank(self, vertical_id: str | None, use_case_id: str | None) -> int:
        v = self.scenario.verticals.get(vertical_id or "")
        if v is None:
            return NO_PRIORITY
        ranks = []
        for uc in v.use_cases:
            if use_case_id is not None and uc.use_case_id != use_case_id:
                continue
            level = uc.overrides.get("Priority")
            if not isinstance(level, Ordinal):
                tpl = self.scenario.catalogue.lookup_use_case(v.vertical_id, uc.use_case_id, Flavor.US_NSIT)
                a = tpl.attribute("Priority") if tpl else None
                level = a.value if a is not None else None
            ranks.append(_RANK[level.level] if isinstance(level, Ordinal) else NO_PRIORITY)
        return min(ranks, default=NO_PRIORITY)

    def emit(self, event: str, outcome: str, instance: str | None = None, **extra) -> None:
        self.nsmf.record(instance, event, outcome, **extra)

    # -- provisioning

    def apply_mode_semantics(self, vertical: Vertical) -> ArrivalRecord:
        """csmf_translate -> broker admission -> commissioning for one vertical arrival."""
        cat = self.scenario.catalogue
        descriptions = self.scenario.descriptions.get(vertical.vertical_id, {})
        reqs = csmf_translate(vertical, descriptions, self.mode, cat)
        card = required_slice_count(vertical, self.mode)
        if self.mode is ProvisioningMode.USE_CASE_SPECIFIC:
            if len(reqs) != card.top_level:
                raise InvariantViolation(f"{len(reqs)} requirements for {card.top_level} US-NSIs")
            usable = [r for r in reqs if not r.create_new]
            for r in reqs:
                if r.create_new:
                    self.emit("Csmf", "CreateNew", use_case=r.use_case_id)
            usable.sort(key=lambda r: self.priority_rank(vertical.vertical_id, r.use_case_id))
            refs = [r.template_id for r in usable]
            if self.scenario.us_submission == "batch":
                groups = [tuple(refs)] if refs else []
            else:
                groups = [(r,) for r in refs]
        else:
            (gn_req,) = reqs
            if len(gn_req.subs) != card.sub:
                raise InvariantViolation(f"GN requirement with {len(gn_req.subs)} subs for n={card.sub}")
            if card.sub > MAX_SUB_SLICES:
                self.emit("Csmf", "TooManyUseCases", vertical=vertical.vertical_id, use_cases=card.sub)
                groups = []
            elif gn_req.create_new:
                self.emit("Csmf", "CreateNew", vertical=vertical.vertical_id)
                groups = []
            else:
                groups = [(gn_req.template_id,)]

        admitted = granted = 0
        for refs in groups:
            req = SliceRequest(self.nsmf.new_id("req"), vertical.tenant_id, vertical.vertical_id, self.mode,
                               refs, {}, self.nsmf.now)
            before = dict(self.nsmf.allocations)
            decision = self.broker.admit(req)
            if not decision.granted:
                continue
            granted += 1
            for sid in decision.lease:
                for g in self.nsmf.allocations[sid].grants:
                    self.committed[g.dimension] += g.quantity
            if set(before) - set(self.nsmf.allocations):
                raise InvariantViolation("admission released existing allocations")
            for top in decision.instances:
                for e in (Event.INSTANTIATE, Event.ACTIVATE, Event.RUN):
                    self.nsmf.transition(top, e)
                inst = self.nsmf.instances[top]
                members = [self.nsmf.instances[c] for c in inst.children] if inst.kind is Kind.GN_NSI else [inst]
                for m in members:
                    self.serving[(vertical.vertical_id, m.use_case_id)] = m.instance_id
                    admitted += 1
        record = ArrivalRecord(vertical.vertical_id, self.nsmf.now, vertical.n, admitted, len(groups), granted)
        self.arrivals.append(record)
        return record

    def _detach_all(self, instance_ids: set[str]) -> None:
        for ue_id in sorted(self.ues):
            ue = self.ues[ue_id]
            for iid in ue.attached_ids():
                if iid in instance_ids:
                    ue = detach_ue(ue, iid)
                    self.emit("Detach", "Released", iid, ue=ue_id)
            self.ues[ue_id] = ue

    def _inactive_cleanup(self) -> None:
        inactive = {i.instance_id for i in self.nsmf.instances.values() if i.phase not in ACTIVE_PHASES}
        self._detach_all(inactive)

    # -- event handlers

    def handle(self, ev: ScheduledEvent) -> None:
        getattr(self, f"_on_{ev.kind}")(ev.params)
        self._inactive_cleanup()

    def _on_arrive(self, p) -> None:
        rec = self.apply_mode_semantics(self.scenario.verticals[p["vertical"]])
        self.emit("Arrival", f"{rec.admitted}/{rec.requested} use cases admitted", vertical=rec.vertical_id)

    def _on_attach(self, p) -> None:
        ue = self.ues[p["ue"]]
        iid = self.serving.get((ue.vertical_id, p["use_case"]))
        if iid is None:
            self.attach_rejected += 1
            self.emit("Attach", "NotProvisioned", None, ue=ue.ue_id, use_case=p["use_case"])
            return
        if iid in ue.attached_ids():
            self.emit("Attach", "AlreadyAttached", iid, ue=ue.ue_id)
            return
        inst = self.nsmf.instances[iid]
        placement = self.nsmf.placements.get(iid)
        try:
            self.ues[ue.ue_id] = attach_ue(
                ue, inst, placement.gnb if placement else "",
                self.scenario.substrate.amf_host() or "core",
                placement.core if placement else "core", p.get("frequency", "intra"),
            )
        except (TooManySlices, SliceNotActive) as exc:
            self.attach_rejected += 1
            self.emit("Attach", type(exc).__name__, iid, ue=ue.ue_id)
            return
        self.attach_ok += 1
        self.emit("Attach", "Attached", iid, ue=ue.ue_id)

    def _on_detach(self, p) -> None:
        ue = self.ues[p["ue"]]
        iid = self.serving.get((ue.vertical_id, p["use_case"]))
        if iid is None or iid not in ue.attached_ids():
            self.emit("Detach", "NotAttached", iid, ue=ue.ue_id)
            return
        self.ues[ue.ue_id] = detach_ue(ue, iid)
        self.emit("Detach", "Detached", iid, ue=ue.ue_id)

    def _on_fault(self, p) -> None:
        ev = FcapsEvent(FcapsKind(p.get("fcaps", "Fault")), p["target"], dict(p.get("payload") or {}), self.nsmf.now)
        self.nsmf.handle_fcaps(ev)

    def _on_command(self, p) -> None:
        key = (p["vertical"], p["use_case"])
        iid = self.serving.get(key)
        if iid is None:
            self.emit("Command", "NotProvisioned", None, use_case=p["use_case"])
            return
        op = p["op"]
        try:
            if self.mode is ProvisioningMode.SUB_NETWORK_SLICING:
                parent = self.nsmf.instances[iid].parent
                if p.get("issuer_use_case"):
                    issuer_iid = self.serving.get((p["vertical"], p["issuer_use_case"]))
                    issuer = self.exposure.channel_for(issuer_iid, ChannelRole.SLAVE)
                else:
                    issuer = self.exposure.channel_for(parent, ChannelRole.MASTER)
                outcome = self.exposure.route(Command(issuer.channel_id if issuer else "", iid, op))
                self.emit("Command", type(outcome).__name__, iid, op=op)
            else:
                self.nsmf.transition(iid, LIFECYCLE_OPS[op])
                self.emit("Command", "Applied", iid, op=op)
        except IllegalTransition as exc:
            self.emit("Command", "IllegalTransition", iid, op=op, detail=str(exc))

    def _on_terminate(self, p) -> None:
        vid = p["vertical"]
        tops = [i for i in self.nsmf.live() if i.vertical_id == vid and i.kind is not Kind.S_NSI]
        for inst in tops:
            members = {inst.instance_id, *inst.children}
            self._detach_all(members)
            self.nsmf.drive(inst.instance_id, Phase.TERMINATED)
        self.serving = {k: v for k, v in self.serving.items() if k[0] != vid}

    def _on_query(self, p) -> None:
        iid = self.serving.get((p["vertical"], p.get("use_case"))) if p.get("use_case") else None
        query = Query(p["query"])
        if self.mode is ProvisioningMode.SUB_NETWORK_SLICING:
            gn = next((i for i in self.nsmf.live(Kind.GN_NSI) if i.vertical_id == p["vertical"]), None)
            channel = self.exposure.channel_for(gn.instance_id, ChannelRole.MASTER) if gn else None
        else:
            channel = self.exposure.channel_for(iid, ChannelRole.SCS_AS) if iid else None
        if channel is None:
            self.emit("Query", "NoChannel", iid, query=query.value)
            return
        try:
            report = self.exposure.expose(channel.channel_id, query, channel.tenant_id, iid)
        except SlicingError as exc:
            self.emit("Query", type(exc).__name__, iid, query=query.value)
            return
        value = list(report.value) if isinstance(report.value, tuple) else report.value
        self.emit("Query", "Reported", report.instance_id, query=query.value, value=value)

    # -- invariants and measurements

    def check_invariants(self) -> None:
        nsmf = self.nsmf
        problems = infra.capacity_problems(nsmf.substrate, nsmf.allocations)
        for sid in nsmf.allocations:
            inst = nsmf.instances.get(sid)
            if inst is None or inst.phase is Phase.TERMINATED or inst.allocation != sid:
                problems.append(f"phantom grant for {sid}")
        slas = 0
        for inst in nsmf.instances.values():
            if inst.phase is Phase.TERMINATED and inst.allocation is not None:
                problems.append(f"{inst.instance_id}: terminated but holds {inst.allocation}")
            if inst.allocation is not None and inst.allocation not in nsmf.allocations:
                problems.append(f"{inst.instance_id}: allocation {inst.allocation} missing")
            for sn in inst.subnets:
                if nsmf.subnets[sn].phase.rank > inst.phase.rank:
                    problems.append(f"{sn}: subnet phase ahead of slice")
            if inst.kind is Kind.S_NSI:
                if inst.sla_id is not None:
                    problems.append(f"{inst.instance_id}: sub slice owns an SLA")
            else:
                slas += 1
                if inst.sla_id not in nsmf.slas:
                    problems.append(f"{inst.instance_id}: missing SLA")
            if inst.kind is Kind.GN_NSI and not 1 <= len(inst.children) <= MAX_SUB_SLICES:
                problems.append(f"{inst.instance_id}: {len(inst.children)} children")
        if slas != len(nsmf.slas):
            problems.append(f"{len(nsmf.slas)} SLAs for {slas} SLA-bearing slices")
        roles = defaultdict(list)
        for ch in self.exposure.live_channels():
            roles[ch.instance_id].append(ch.role)
        expected = {Kind.US_NSI: ChannelRole.SCS_AS, Kind.GN_NSI: ChannelRole.MASTER, Kind.S_NSI: ChannelRole.SLAVE}
        for inst in nsmf.live():
            if roles.get(inst.instance_id) != [expected[inst.kind]]:
                problems.append(f"{inst.instance_id}: channels {roles.get(inst.instance_id)}")
        for ue in self.ues.values():
            problems += ue_problems(ue)
            for iid in ue.attached_ids():
                if nsmf.instances[iid].phase not in ACTIVE_PHASES:
                    problems.append(f"{ue.ue_id}: attached to inactive {iid}")
        if problems:
            raise InvariantViolation(f"t={nsmf.now}: " + "; ".join(problems))

    def utilization(self) -> dict[str, Fraction]:
        u = infra.usage(self.nsmf.allocations)
        used: dict[str, int] = defaultdict(int)
        cap: dict[str, int] = defaultdict(int)
        for key, c in self.caps.items():
            used[key[1]] += u.used(key)
            cap[key[1]] += c
        return {d: Fraction(used[d], cap[d]) if cap[d] else Fraction(0) for d in DIMENSIONS}

    def qos_flags(self) -> dict[str, bool]:
        """Static satisfaction check per slice: valid template, full grants, no degradation."""
        nsmf = self.nsmf
        flags = {}
        for iid in sorted(nsmf.instances):
            inst = nsmf.instances[iid]
            if inst.kind is Kind.GN_NSI:
                continue
            tpl = nsmf.catalogue.get(inst.template_id)
            ok = validate_template(tpl).ok and not inst.degraded
            if inst.allocation is not None:
                demand = infra.Demand.of_template(tpl)
                have = {g.key: g.quantity for g in nsmf.allocations[inst.allocation].grants}
                p = nsmf.placements[iid]
                ok = ok and have == {k: g.quantity for k, g in
                                     ((g.key, g) for g in infra.grants_for(p, demand))}
            flags[iid] = ok
        for iid in sorted(nsmf.instances):
            inst = nsmf.instances[iid]
            if inst.kind is Kind.GN_NSI:
                flags[iid] = all(flags[c] for c in inst.children)
        return dict(sorted(flags.items()))


# -- reports -----------------------------------------------------------------------


def _num(x: Fraction | float) -> float:
    return round(float(x), 6)


@dataclass
class RunResult:
    report: dict
    log: list[dict]
    trace: list[dict]

    def log_lines(self) -> list[str]:
        return [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in self.log]

    def trace_lines(self) -> list[str]:
        return [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in self.trace]


def run(scenario: Scenario, mode: ProvisioningMode, check: bool = True) -> RunResult:
    """Execute ``scenario`` under ``mode``; returns the metrics report and the event log."""
    problems = scenario.problems()
    if problems:
        raise ScenarioInvalid("; ".join(problems))
    world = World(scenario, mode)
    events = list(scenario.events) + generated_events(scenario)
    queue = []
    for seq, ev in enumerate(events):
        v = ev.params.get("vertical")
        uc = ev.params.get("use_case")
        if ev.kind in ("attach", "detach"):
            ue = world.ues[ev.params["ue"]]
            v = ue.vertical_id
        heapq.heappush(queue, (ev.time, world.priority_rank(v, uc), seq, ev))

    horizon = scenario.horizon
    world.emit("Run", "Start", None, mode=mode.value, seed=scenario.seed, horizon=horizon)
    util_prev = world.utilization()
    t_prev = 0
    area = {d: Fraction(0) for d in DIMENSIONS}
    peak = {d: Fraction(0) for d in DIMENSIONS}
    processed = 0
    while queue:
        t, _, seq, ev = heapq.heappop(queue)
        for d in DIMENSIONS:
            area[d] += util_prev[d] * (t - t_prev)
        t_prev = t
        world.nsmf.now = t
        world.emit("Event", ev.kind, None, seq=seq)
        world.handle(ev)
        processed += 1
        if check:
            world.check_invariants()
        util_prev = world.utilization()
        for d in DIMENSIONS:
            peak[d] = max(peak[d], util_prev[d])
    for d in DIMENSIONS:
        area[d] += util_prev[d] * (horizon - t_prev)

    nsmf = world.nsmf
    requested = sum(a.requested for a in world.arrivals)
    admitted = sum(a.admitted for a in world.arrivals)
    kinds = defaultdict(int)
    for inst in nsmf.instances.values():
        kinds[inst.kind] += 1
    roles = defaultdict(int)
    for ch in world.exposure.channels.values():
        roles[ch.role.value] += 1
    qos = world.qos_flags()
    digest = hashlib.sha256("\n".join(RunResult(None, world.log, []).log_lines()).encode()).hexdigest()
    report = {
        "mode": mode.value,
        "seed": scenario.seed,
        "horizon": horizon,
        "events_processed": processed,
        "admission_ratio": _num(Fraction(admitted, requested)) if requested else 0.0,
        "use_cases": {"requested": requested, "admitted": admitted},
        "requests": {
            "submitted": sum(a.requests for a in world.arrivals),
            "granted": sum(a.granted_requests for a in world.arrivals),
        },
        "partial_admissions": sum(1 for a in world.arrivals if a.partial),
        "slices": {
            "top_level": kinds[Kind.US_NSI] + kinds[Kind.GN_NSI],
            "us_nsi": kinds[Kind.US_NSI],
            "gn_nsi": kinds[Kind.GN_NSI],
            "s_nsi": kinds[Kind.S_NSI],
            "slas": len(nsmf.slas),
        },
        "channels": {"total": len(world.exposure.channels), **{r.value: roles[r.value] for r in ChannelRole}},
        "committed": dict(world.committed),
        "utilization": {
            d: {"mean": _num(area[d] / horizon) if horizon else 0.0, "peak": _num(peak[d])} for d in DIMENSIONS
        },
        # counted over use-case-serving slices; the GN-NSI flag is a roll-up of its children
        "qos_satisfied": {
            "count": sum(v for k, v in qos.items() if nsmf.instances[k].kind is not Kind.GN_NSI),
            "of": sum(1 for k in qos if nsmf.instances[k].kind is not Kind.GN_NSI),
            "flags": qos,
        },
        "isolation_violations": nsmf.isolation_violations,
        "ues": {
            "attached_ok": world.attach_ok,
            "attach_rejected": world.attach_rejected,
            "d2d_adjacency": d2d_adjacency(world),
        },
        "digest": digest,
    }
    return RunResult(report, world.log, world.exposure.trace)


def d2d_adjacency(world: World) -> dict[str, list[str]]:
    """D2D-capable UEs grouped with peers subscribed to a use case of the same service category."""
    cats: dict[str, set] = {}
    for ue in world.ues.values():
        v = world.scenario.verticals.get(ue.vertical_id)
        if not ue.d2d_capable or v is None:
            continue
        cats[ue.ue_id] = {v.use_case(uc).service_category.value for uc in ue.subscribed}
    return {
        u: sorted(o for o in cats if o != u and cats[o] & cats[u])
        for u in sorted(cats)
    }


# -- comparison --------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaRow:
    metric: str
    us: float | int
    gn: float | int

    @property
    def delta(self):
        return round(self.gn - self.us, 6) if isinstance(self.gn, float) or isinstance(self.us, float) \
            else self.gn - self.us

    @property
    def divergent(self) -> bool:
        return self.us != self.gn


@dataclass
class Comparison:
    us: RunResult
    gn: RunResult
    rows: list[DeltaRow]

    def row(self, metric: str) -> DeltaRow:
        return next(r for r in self.rows if r.metric == metric)

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"metric": r.metric, "us": r.us, "gn": r.gn, "delta": r.delta, "divergent": r.divergent}
                for r in self.rows
            ],
            "digests": {"us": self.us.report["digest"], "gn": self.gn.report["digest"]},
        }


def delta_rows(us: dict, gn: dict) -> list[DeltaRow]:
    def pick(path):
        def get(rep):
            x = rep
            for k in path.split("."):
                x = x[k]
            return x
        return get

    metrics = [
        ("admission_ratio", "admission_ratio"),
        ("use_cases_admitted", "use_cases.admitted"),
        ("partial_admissions", "partial_admissions"),
        ("requests_submitted", "requests.submitted"),
        ("sla_count", "slices.slas"),
        ("top_level_slices", "slices.top_level"),
        ("sub_slices", "slices.s_nsi"),
        ("channel_count", "channels.total"),
        *((f"committed_{d}", f"committed.{d}") for d in DIMENSIONS),
        *((f"utilization_mean_{d}", f"utilization.{d}.mean") for d in DIMENSIONS),
        *((f"utilization_peak_{d}", f"utilization.{d}.peak") for d in DIMENSIONS),
        ("qos_satisfied", "qos_satisfied.count"),
        ("isolation_violations", "isolation_violations"),
    ]
    return [DeltaRow(name, pick(path)(us), pick(path)(gn)) for name, path in metrics]


def compare_modes(scenario: Scenario) -> Comparison:
    us = run(scenario, ProvisioningMode.USE_CASE_SPECIFIC)
    gn = run(scenario, ProvisioningMode.SUB_NETWORK_SLICING)
    return Comparison(us, gn, delta_rows(us.report, gn.report))


# structural rows differ by construction (1+n channels vs n, n sub slices vs 0)
STRUCTURAL_ROWS = frozenset({"requests_submitted", "top_level_slices", "sub_slices", "channel_count", "sla_count"})


def format_comparison(cmp: Comparison) -> str:
    lines = [f"{'metric':<28} {'us':>10} {'gn':>10} {'delta':>10}  note"]
    for r in cmp.rows:
        note = ""
        if r.metric == "partial_admissions" and r.divergent:
            note = "DIVERGENT partial-vs-atomic admission"
        elif r.divergent and r.metric not in STRUCTURAL_ROWS:
            note = "differs"
        lines.append(f"{r.metric:<28} {_fmt(r.us):>10} {_fmt(r.gn):>10} {_fmt(r.delta):>10}  {note}".rstrip())
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".") if isinstance(x, float) else str(x)


def format_report(report: Mapping[str, Any]) -> str:
    u = report["utilization"]
    lines = [
        f"mode                 {report['mode']}",
        f"seed                 {report['seed']}",
        f"events processed     {report['events_processed']}",
        f"admission ratio      {_fmt(report['admission_ratio'])} "
        f"({report['use_cases']['admitted']}/{report['use_cases']['requested']} use cases)",
        f"partial admissions   {report['partial_admissions']}",
        f"slices               top-level {report['slices']['top_level']}, sub {report['slices']['s_nsi']}, "
        f"SLAs {report['slices']['slas']}",
        f"API channels         {report['channels']['total']} (ScsAs {report['channels']['ScsAs']}, "
        f"Master {report['channels']['MasterScsAs']}, Slave {report['channels']['SlaveScsAs']})",
        f"isolation violations {report['isolation_violations']}",
        f"QoS satisfied        {report['qos_satisfied']['count']}/{report['qos_satisfied']['of']}",
        "utilization          " + ", ".join(f"{d} {_fmt(u[d]['mean'])}/{_fmt(u[d]['peak'])}" for d in DIMENSIONS),
        f"digest               {report['digest']}",
    ]
    return "\n".join(lines) + "\n"
