"""Management hierarchy: CSMF translation, NSMF/NSSMF lifecycle, NFMF FCAPS, t-MANO delegation."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

from . import infrastructure as infra
from .catalogue import Catalogue
from .errors import AllocationFailed, IllegalTransition, UnknownComponent
from .model import Flavor, ProvisioningMode, ServiceCategory, Sharing, Vertical, derive_nssits


class Phase(str, enum.Enum):
    PREPARED = "Prepared"
    INSTANTIATED = "Instantiated"
    ACTIVATED = "Activated"
    RUNNING = "Running"
    DEACTIVATED = "Deactivated"
    TERMINATED = "Terminated"

    @property
    def rank(self) -> int:
        return list(Phase).index(self)


class Event(str, enum.Enum):
    INSTANTIATE = "Instantiate"
    ACTIVATE = "Activate"
    RUN = "Run"
    DEACTIVATE = "Deactivate"
    TERMINATE = "Terminate"


LEGAL: dict[tuple[Phase, Event], Phase] = {
    (Phase.PREPARED, Event.INSTANTIATE): Phase.INSTANTIATED,
    (Phase.INSTANTIATED, Event.ACTIVATE): Phase.ACTIVATED,
    (Phase.ACTIVATED, Event.RUN): Phase.RUNNING,
    (Phase.RUNNING, Event.DEACTIVATE): Phase.DEACTIVATED,
    (Phase.DEACTIVATED, Event.ACTIVATE): Phase.ACTIVATED,
    (Phase.DEACTIVATED, Event.TERMINATE): Phase.TERMINATED,
}

# events a sub slice accepts on its own; the rest only arrive by cascade from its GN-NSI
CHILD_EVENTS = frozenset({Event.ACTIVATE, Event.RUN, Event.DEACTIVATE})
ACTIVE_PHASES = frozenset({Phase.ACTIVATED, Phase.RUNNING})


def next_phase(phase: Phase, event: Event) -> Phase | None:
    return LEGAL.get((phase, event))


def event_path(start: Phase, goal: Phase) -> list[Event] | None:
    """Shortest sequence of legal events leading from ``start`` to ``goal``."""
    prev: dict[Phase, tuple[Phase, Event] | None] = {start: None}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        if p is goal:
            path = []
            while prev[p] is not None:
                p, e = prev[p]
                path.append(e)
            return path[::-1]
        for (src, e), dst in LEGAL.items():
            if src is p and dst not in prev:
                prev[dst] = (p, e)
                queue.append(dst)
    return None


class Kind(str, enum.Enum):
    US_NSI = "UsNsi"
    GN_NSI = "GnNsi"
    S_NSI = "SNsi"


class SubnetKind(str, enum.Enum):
    FIVE_GC = "FiveGC"
    NG_RAN = "NgRan"
    TN = "Tn"


@dataclass(frozen=True)
class SubnetInstance:
    id: str
    kind: SubnetKind
    nssit_id: str
    phase: Phase
    slice_id: str
    components: tuple[tuple[str, str], ...]  # (component id, NFMF id)


@dataclass(frozen=True)
class SliceInstance:
    instance_id: str
    template_id: str
    kind: Kind
    phase: Phase
    tenant_id: str
    vertical_id: str
    use_case_id: str | None = None
    service_category: ServiceCategory | None = None
    sla_id: str | None = None
    subnets: tuple[str, ...] = ()
    children: tuple[str, ...] = ()
    parent: str | None = None
    allocation: str | None = None
    degraded: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Sla:
    sla_id: str
    instance_id: str
    tenant_id: str
    terms: tuple[tuple[str, str], ...] = ()


class FcapsKind(str, enum.Enum):
    FAULT = "Fault"
    CONFIGURATION = "Configuration"
    ACCOUNTING = "Accounting"
    PERFORMANCE = "Performance"
    SECURITY = "Security"


@dataclass(frozen=True)
class FcapsEvent:
    kind: FcapsKind
    target: str
    payload: Mapping[str, object] = field(default_factory=dict)
    timestamp: int = 0

    def __hash__(self):
        return hash((self.kind, self.target, self.timestamp))


@dataclass(frozen=True)
class Action:
    kind: str  # degrade | sample | configure | record
    component: str
    slice_id: str | None = None
    subnet_id: str | None = None
    shared: bool = False
    detail: str = ""


# -- NSMF --------------------------------------------------------------------------


class Nsmf:
    """Slice lifecycle manager over one substrate.

    Holds every slice and subnet instance, the SLAs, and the allocation state.
    All mutation happens through :meth:`transition`, :meth:`commit` and
    :meth:`handle_fcaps`; each call either completes or leaves state unchanged.
    """

    def __init__(self, substrate: infra.Substrate, catalogue: Catalogue, log: list | None = None,
                 son_hook: Callable[["Nsmf", FcapsEvent], None] | None = None):
        self.substrate = substrate
        self.catalogue = catalogue
        self.allocations: dict[str, infra.Allocation] = {}
        self.placements: dict[str, infra.Placement] = {}
        self.instances: dict[str, SliceInstance] = {}
        self.subnets: dict[str, SubnetInstance] = {}
        self.slas: dict[str, Sla] = {}
        self.samples: list[dict] = []
        self.fcaps_log: list[FcapsEvent] = []
        self.isolation_violations = 0
        self.log = log if log is not None else []
        self.son_hook = son_hook
        self.now = 0
        self._counters: dict[str, int] = {}

    # -- helpers

    def new_id(self, prefix: str) -> str:
        n = self._counters.get(prefix, 0) + 1
        self._counters[prefix] = n
        return f"{prefix}-{n:04d}"

    def record(self, instance: str | None, event: str, outcome: str, **extra) -> None:
        self.log.append({"time": self.now, "instance": instance, "event": event, "outcome": outcome, **extra})

    def _snapshot(self):
        return (dict(self.allocations), dict(self.placements), dict(self.instances), dict(self.subnets),
                dict(self.slas), dict(self._counters))

    def _restore(self, snap):
        (self.allocations, self.placements, self.instances, self.subnets,
         self.slas, self._counters) = (dict(x) for x in snap)

    def state_hash(self) -> str:
        return infra.state_hash(self.allocations)

    def live(self, kind: Kind | None = None) -> list[SliceInstance]:
        return [i for i in self.instances.values()
                if i.phase is not Phase.TERMINATED and (kind is None or i.kind is kind)]

    # -- creation

    def create(self, template_id: str, kind: Kind, tenant_id: str, vertical_id: str,
               use_case_id: str | None = None, service_category: ServiceCategory | None = None,
               parent: str | None = None, instance_id: str | None = None,
               sla_terms: Mapping[str, str] | None = None) -> SliceInstance:
        iid = instance_id or self.new_id(kind.value.lower())
        sla_id = None
        if kind in (Kind.US_NSI, Kind.GN_NSI):
            sla_id = self.new_id("sla")
            self.slas[sla_id] = Sla(sla_id, iid, tenant_id, tuple(sorted((sla_terms or {}).items())))
        inst = SliceInstance(iid, template_id, kind, Phase.PREPARED, tenant_id, vertical_id,
                             use_case_id, service_category, sla_id, parent=parent)
        self.instances[iid] = inst
        if parent:
            p = self.instances[parent]
            self.instances[parent] = replace(p, children=p.children + (iid,))
        self.record(iid, "Create", Phase.PREPARED.value, kind=kind.value, template=template_id)
        return inst

    def commit(self, items: Sequence[tuple[infra.Placement, str]]) -> None:
        """Commit leases computed by the broker for not-yet-created instance ids."""
        self.allocations = infra.allocate_many(self.substrate, self.allocations, items)
        for p, sid in items:
            self.placements[sid] = p

    def bind_lease(self, instance_id: str) -> None:
        inst = self.instances[instance_id]
        self.instances[instance_id] = replace(inst, allocation=instance_id)

    # -- lifecycle

    def transition(self, instance_id: str, event: Event) -> SliceInstance:
        """Apply one lifecycle event; cascades to subnets and (for a GN-NSI) its children.

        Raises IllegalTransition for edges outside the lifecycle, and
        AllocationFailed when instantiation cannot obtain resources; both
        leave every piece of state as it was.
        """
        inst = self.instances[instance_id]
        if inst.kind is Kind.S_NSI:
            parent = self.instances[inst.parent]
            if event not in CHILD_EVENTS:
                self.record(instance_id, event.value, "IllegalTransition")
                raise IllegalTransition(f"{instance_id}: {event.value} only via its GN-NSI {parent.instance_id}")
            if parent.phase is not Phase.RUNNING:
                self.record(instance_id, event.value, "IllegalTransition")
                raise IllegalTransition(f"{instance_id}: parent {parent.instance_id} is {parent.phase.value}")
        snap = self._snapshot()
        log_mark = len(self.log)
        try:
            return self._apply(instance_id, event)
        except (IllegalTransition, AllocationFailed) as exc:
            self._restore(snap)
            del self.log[log_mark:]
            self.record(instance_id, event.value, type(exc).__name__, detail=str(exc))
            raise

    def drive(self, instance_id: str, goal: Phase) -> SliceInstance:
        """Walk the legal edges from the current phase to ``goal``."""
        inst = self.instances[instance_id]
        path = event_path(inst.phase, goal)
        if path is None:
            raise IllegalTransition(f"{instance_id}: no path from {inst.phase.value} to {goal.value}")
        for e in path:
            inst = self.transition(instance_id, e)
        return inst

    def _apply(self, iid: str, event: Event) -> SliceInstance:
        inst = self.instances[iid]
        target = next_phase(inst.phase, event)
        if target is None:
            raise IllegalTransition(f"{iid}: {event.value} not allowed from {inst.phase.value}")

        if inst.kind is Kind.GN_NSI:
            for child in inst.children:
                c = self.instances[child]
                if c.phase is target:
                    continue
                path = event_path(c.phase, target)
                if path is None:
                    raise IllegalTransition(f"{child}: cannot follow parent to {target.value}")
                for e in path:
                    self._apply(child, e)
        elif event is Event.INSTANTIATE:
            self._instantiate(iid)
        elif event is Event.TERMINATE:
            self._terminate(iid)

        inst = replace(self.instances[iid], phase=target)
        self.instances[iid] = inst
        for sn in inst.subnets:
            self.subnets[sn] = replace(self.subnets[sn], phase=target)
        self.record(iid, event.value, target.value)
        return inst

    def _instantiate(self, iid: str) -> None:
        inst = self.instances[iid]
        tpl = self.catalogue.get(inst.template_id)
        nssits = derive_nssits(tpl)
        if inst.allocation is None:
            result = infra.feasibility_check(self.substrate, self.allocations, infra.Demand.of(nssits))
            if not result.feasible:
                raise AllocationFailed(f"{iid}: {result.reason}")
            self.commit([(result.placement, iid)])
            inst = replace(inst, allocation=iid)
        p = self.placements[iid]
        parts = (
            (SubnetKind.FIVE_GC, "5gc", nssits.core, (p.core,)),
            (SubnetKind.NG_RAN, "ngran", nssits.ran, (p.gnb, p.cu, p.du, p.ru)),
            (SubnetKind.TN, "tn", nssits.tn, (p.link,)),
        )
        ids = []
        for kind, suffix, nssit, comps in parts:
            sid = f"{iid}/{suffix}"
            self.subnets[sid] = SubnetInstance(
                sid, kind, nssit.template_id, Phase.INSTANTIATED, iid,
                tuple((c, f"nfmf/{sid}/{c}") for c in comps),
            )
            ids.append(sid)
        self.instances[iid] = replace(inst, subnets=tuple(ids))

    def _terminate(self, iid: str) -> None:
        inst = self.instances[iid]
        if inst.allocation is not None:
            self.allocations = infra.release(self.substrate, self.allocations, inst.allocation)
            self.placements.pop(inst.allocation, None)
        self.instances[iid] = replace(inst, allocation=None)

    # -- FCAPS

    def handle_fcaps(self, event: FcapsEvent) -> list[Action]:
        actions = nfmf_handle(event, self)
        self.fcaps_log.append(event)
        degraded = [a for a in actions if a.kind == "degrade"]
        if len(degraded) > 1:
            self.isolation_violations += sum(1 for a in degraded if a.shared)
        for a in actions:
            if a.kind == "degrade":
                inst = self.instances[a.slice_id]
                self.instances[a.slice_id] = replace(inst, degraded=inst.degraded | {a.component})
            elif a.kind == "sample":
                self.samples.append({"time": self.now, "component": a.component, "slice": a.slice_id,
                                     "payload": dict(event.payload)})
        if event.kind is FcapsKind.PERFORMANCE and self.son_hook is not None:
            self.son_hook(self, event)
        self.record(None, f"Fcaps.{event.kind.value}", f"{len(actions)} actions", target=event.target,
                    affected=sorted({a.slice_id for a in actions if a.slice_id}))
        return actions

    def owning_subnet(self, slice_id: str, component: str) -> str | None:
        for sn in self.instances[slice_id].subnets:
            if any(c == component for c, _ in self.subnets[sn].components):
                return sn
        return None

    # -- t-MANO

    def grant_mla(self, tenant_id: str, delegated: Iterable["OpKind"], scope: Iterable[str]) -> "ManagementDelegation":
        scope = frozenset(scope)
        foreign = [s for s in scope if s not in self.instances or self.instances[s].tenant_id != tenant_id]
        if foreign:
            raise ValueError(f"MLA scope includes slices not owned by {tenant_id}: {sorted(foreign)}")
        return ManagementDelegation(tenant_id, frozenset(delegated), scope)


def nfmf_handle(event: FcapsEvent, nsmf: Nsmf) -> list[Action]:
    """Management actions an NFMF takes for one FCAPS event. Pure."""
    components = nsmf.substrate.components()
    if event.target not in components:
        raise UnknownComponent(event.target)
    holders = infra.holders(nsmf.allocations, event.target)
    out = []
    for sid, sharing in holders:
        subnet = nsmf.owning_subnet(sid, event.target) if sid in nsmf.instances else None
        if event.kind is FcapsKind.FAULT:
            cause = str(event.payload.get("cause", "fault"))
            out.append(Action("degrade", event.target, sid, subnet, sharing is Sharing.SHARED, cause))
        elif event.kind is FcapsKind.PERFORMANCE:
            out.append(Action("sample", event.target, sid, subnet, sharing is Sharing.SHARED))
        elif event.kind is FcapsKind.CONFIGURATION:
            out.append(Action("configure", event.target, sid, subnet, sharing is Sharing.SHARED))
    if not out:
        out.append(Action("record", event.target, detail=event.kind.value))
    return out


# -- t-MANO ------------------------------------------------------------------------


class OpKind(str, enum.Enum):
    MONITOR = "monitor"
    SCALE = "scale"
    RECONFIGURE = "reconfigure"
    HEAL = "heal"


@dataclass(frozen=True)
class ManagementDelegation:
    tenant_id: str
    delegated: frozenset[OpKind]
    scope: frozenset[str]


@dataclass(frozen=True)
class VetoRule:
    ops: frozenset[OpKind]
    phases: frozenset[Phase] = frozenset()  # empty: any phase
    label: str = ""

    def matches(self, op: OpKind, phase: Phase | None) -> bool:
        return op in self.ops and (not self.phases or phase in self.phases)


@dataclass(frozen=True)
class TmanoRequest:
    tenant_id: str
    op: OpKind
    target: str


@dataclass(frozen=True)
class Applied:
    op: OpKind
    target: str


@dataclass(frozen=True)
class RefusedByMla:
    clause: str


@dataclass(frozen=True)
class VetoedByCMano:
    rule: str


def tmano_execute(mla: ManagementDelegation, request: TmanoRequest, veto_policy: Sequence[VetoRule],
                  phase_of: Mapping[str, Phase] | Callable[[str], Phase | None] = None):
    """Applied only if the op is delegated, the target is in scope and no c-MANO rule vetoes it."""
    if request.tenant_id != mla.tenant_id:
        return RefusedByMla("tenant")
    if request.op not in mla.delegated:
        return RefusedByMla("delegation")
    if request.target not in mla.scope:
        return RefusedByMla("scope")
    if callable(phase_of):
        phase = phase_of(request.target)
    else:
        phase = (phase_of or {}).get(request.target)
    for rule in veto_policy:
        if rule.matches(request.op, phase):
            return VetoedByCMano(rule.label or f"deny {request.op.value}")
    return Applied(request.op, request.target)


# -- CSMF --------------------------------------------------------------------------


@dataclass(frozen=True)
class SliceRequirement:
    flavor: Flavor
    use_case_id: str | None
    service_category: ServiceCategory | None
    template_id: str | None
    create_new: bool = False
    defaulted: bool = False
    description: tuple[tuple[str, str], ...] = ()
    subs: tuple["SliceRequirement", ...] = ()


def csmf_translate(vertical: Vertical, descriptions: Mapping[str, Mapping[str, str]] | None,
                   mode: ProvisioningMode, catalogue: Catalogue) -> list[SliceRequirement]:
    """Turn a vertical's service request into slice requirements for the NSMF.

    A use case without a service description takes the template defaults and
    is flagged ``defaulted``; a requirement without a catalogue template is
    flagged ``create_new`` (the non-standard path).
    """
    if not vertical.use_cases:
        raise ValueError("vertical has no use cases")
    descriptions = descriptions or {}

    def one(uc, flavor, tpl) -> SliceRequirement:
        desc = descriptions.get(uc.use_case_id) or {}
        return SliceRequirement(
            flavor, uc.use_case_id, uc.service_category,
            tpl.template_id if tpl else None, tpl is None, not desc, tuple(sorted(desc.items())),
        )

    if mode is ProvisioningMode.USE_CASE_SPECIFIC:
        return [one(uc, Flavor.US_NSIT, catalogue.lookup_use_case(vertical.vertical_id, uc.use_case_id,
                                                                   Flavor.US_NSIT))
                for uc in vertical.use_cases]

    found = catalogue.lookup(vertical.vertical_id, mode)
    gn = next((t for t in found.templates if t.flavor is Flavor.GN_NSIT), None)
    by_uc = {}
    if gn is not None:
        for sid in gn.sub_templates:
            if sid in catalogue:
                by_uc[catalogue.get(sid).id_info.use_case_id] = catalogue.get(sid)
    subs = tuple(one(uc, Flavor.S_NSIT, by_uc.get(uc.use_case_id)) for uc in vertical.use_cases)
    return [SliceRequirement(
        Flavor.GN_NSIT, None, None, gn.template_id if gn else None,
        create_new=gn is None or any(s.create_new for s in subs),
        defaulted=all(s.defaulted for s in subs), subs=subs,
    )]
