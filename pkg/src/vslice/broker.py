"""Slice broker admission and the northbound exposure layer (NEF channels, Master/Slave routing)."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from . import infrastructure as infra
from .errors import IllegalTransition, InvalidParent, SlicingError, Unauthorized, UnboundChannel
from .model import MAX_SUB_SLICES, Flavor, ProvisioningMode, SliceTemplate
from .orchestration import Event, Kind, Nsmf, Phase, SliceInstance


class ChannelRole(str, enum.Enum):
    SCS_AS = "ScsAs"
    MASTER = "MasterScsAs"
    SLAVE = "SlaveScsAs"


@dataclass(frozen=True)
class ApiChannel:
    channel_id: str
    tenant_id: str
    instance_id: str
    use_case_id: str | None
    role: ChannelRole
    counterpart: str = "nef-1"
    cluster: str | None = None  # GN-NSI id for Master/Slave channels


@dataclass(frozen=True)
class SliceRequest:
    request_id: str
    tenant_id: str
    vertical_id: str
    mode: ProvisioningMode
    template_ids: tuple[str, ...]
    sla_terms: Mapping[str, str] = field(default_factory=dict)
    arrival: int = 0

    def __hash__(self):
        return hash((self.request_id, self.template_ids))


class Outcome(str, enum.Enum):
    GRANTED = "Granted"
    DENIED = "Denied"


@dataclass(frozen=True)
class AdmissionDecision:
    request_id: str
    outcome: Outcome
    reason: str = ""
    lease: tuple[str, ...] = ()  # slice ids holding the committed allocations
    instances: tuple[str, ...] = ()  # top-level instances created
    time: int = 0
    denied_template: str | None = None
    bottleneck: str | None = None

    @property
    def granted(self) -> bool:
        return self.outcome is Outcome.GRANTED


@dataclass(frozen=True)
class AdmissionPolicy:
    """Feasibility-only first-come-first-served, with an optional per-tenant cap."""

    max_live_slices_per_tenant: int | None = None


class _Deny(Exception):
    def __init__(self, reason, template=None, bottleneck=None):
        super().__init__(reason)
        self.reason, self.template, self.bottleneck = reason, template, bottleneck


class NetworkSliceBroker:
    def __init__(self, nsmf: Nsmf, exposure: "Exposure | None" = None, policy: AdmissionPolicy = AdmissionPolicy()):
        self.nsmf = nsmf
        self.exposure = exposure if exposure is not None else Exposure(nsmf)
        self.policy = policy
        self.decisions: list[AdmissionDecision] = []

    def constituents(self, req: SliceRequest) -> tuple[SliceTemplate | None, list[SliceTemplate]]:
        """(generic template or None, the end-to-end templates that each need a placement)."""
        cat = self.nsmf.catalogue
        if not req.template_ids:
            raise _Deny("request carries no templates")
        missing = [t for t in req.template_ids if t not in cat]
        if missing:
            raise _Deny(f"unknown template {missing[0]}", missing[0])
        tpls = [cat.get(t) for t in req.template_ids]
        if req.mode is ProvisioningMode.USE_CASE_SPECIFIC:
            bad = [t for t in tpls if t.flavor is not Flavor.US_NSIT]
            if bad:
                raise _Deny(f"{bad[0].template_id} is not a US-NSIT", bad[0].template_id)
            return None, tpls
        if len(tpls) != 1 or tpls[0].flavor is not Flavor.GN_NSIT:
            raise _Deny("generic mode takes exactly one GN-NSIT")
        gn = tpls[0]
        if len(gn.sub_templates) > MAX_SUB_SLICES:
            raise _Deny(f"TooManyUseCases: {len(gn.sub_templates)} sub slices", gn.template_id)
        dangling = [s for s in gn.sub_templates if s not in cat]
        if dangling:
            raise _Deny(f"dangling sub template {dangling[0]}", dangling[0])
        return gn, [cat.get(s) for s in gn.sub_templates]

    def admit(self, req: SliceRequest) -> AdmissionDecision:
        """Grant iff every constituent slice can be placed at once; commits nothing otherwise."""
        nsmf = self.nsmf
        try:
            gn, parts = self.constituents(req)
            self._check_policy(req, len(parts) + (1 if gn else 0))
            demands = []
            for t in parts:
                try:
                    demands.append(infra.Demand.of_template(t))
                except InvalidParent as exc:
                    raise _Deny(str(exc), t.template_id) from None
            for t, d in zip(parts, demands):
                alone = infra.feasibility_check(nsmf.substrate, nsmf.allocations, d)
                if not alone.feasible:
                    raise _Deny(f"{t.template_id}: {alone.reason}", t.template_id, alone.bottleneck)
            placements = infra.joint_placement(nsmf.substrate, nsmf.allocations, demands)
            if placements is None:
                raise _Deny("constituent slices do not fit simultaneously", parts[-1].template_id)
        except _Deny as d:
            decision = AdmissionDecision(req.request_id, Outcome.DENIED, d.reason, time=nsmf.now,
                                         denied_template=d.template, bottleneck=d.bottleneck)
            nsmf.record(None, "Admit", "Denied", request=req.request_id, reason=d.reason)
            self.decisions.append(decision)
            return decision

        terms = dict(req.sla_terms)
        if gn is None:
            ids = [nsmf.new_id(Kind.US_NSI.value.lower()) for _ in parts]
            nsmf.commit(list(zip(placements, ids)))
            created = []
            for t, iid in zip(parts, ids):
                created.append(nsmf.create(t.template_id, Kind.US_NSI, req.tenant_id, req.vertical_id,
                                           t.id_info.use_case_id, t.service_category, instance_id=iid,
                                           sla_terms=terms))
                nsmf.bind_lease(iid)
            top = tuple(ids)
            self.exposure.open_use_case_channels([nsmf.instances[i] for i in ids])
        else:
            gid = nsmf.new_id(Kind.GN_NSI.value.lower())
            ids = [nsmf.new_id(Kind.S_NSI.value.lower()) for _ in parts]
            nsmf.commit(list(zip(placements, ids)))
            nsmf.create(gn.template_id, Kind.GN_NSI, req.tenant_id, req.vertical_id, instance_id=gid,
                        sla_terms=terms)
            for t, iid in zip(parts, ids):
                nsmf.create(t.template_id, Kind.S_NSI, req.tenant_id, req.vertical_id, t.id_info.use_case_id,
                            t.service_category, parent=gid, instance_id=iid)
                nsmf.bind_lease(iid)
            top = (gid,)
            self.exposure.open_cluster_channels(nsmf.instances[gid], [nsmf.instances[i] for i in ids])
        decision = AdmissionDecision(req.request_id, Outcome.GRANTED, "", tuple(ids), top, nsmf.now)
        nsmf.record(None, "Admit", "Granted", request=req.request_id, lease=list(ids))
        self.decisions.append(decision)
        return decision

    def _check_policy(self, req: SliceRequest, new: int) -> None:
        cap = self.policy.max_live_slices_per_tenant
        if cap is None:
            return
        live = sum(1 for i in self.nsmf.live() if i.tenant_id == req.tenant_id)
        if live + new > cap:
            raise _Deny(f"policy: tenant {req.tenant_id} would hold {live + new} slices (cap {cap})")


# -- exposure ----------------------------------------------------------------------


class Query(str, enum.Enum):
    UE_COUNT = "UeCount"
    UE_STATUS = "UeStatus"
    CONNECTIVITY = "Connectivity"
    REACHABILITY = "Reachability"
    LINK_FAILURE = "LinkFailure"


@dataclass(frozen=True)
class MonitoringReport:
    channel_id: str
    instance_id: str
    query: Query
    value: object


@dataclass(frozen=True)
class Command:
    issuer: str  # channel id
    target: str  # S-NSI instance id
    op: str


@dataclass(frozen=True)
class Forwarded:
    issuer: str
    target: str
    op: str


@dataclass(frozen=True)
class RejectedDirection:
    reason: str


LIFECYCLE_OPS = {"activate": Event.ACTIVATE, "run": Event.RUN, "deactivate": Event.DEACTIVATE}

UeView = Callable[[str], Sequence[tuple[str, str]]]


def master_slave_route(channels: Iterable[ApiChannel], command: Command) -> Forwarded | RejectedDirection:
    """Control flows Master -> own Slave only."""
    by_id = {c.channel_id: c for c in channels}
    issuer = by_id.get(command.issuer)
    if issuer is None:
        return RejectedDirection(f"unknown issuer channel {command.issuer}")
    if issuer.role is not ChannelRole.MASTER:
        return RejectedDirection(f"{issuer.role.value} may not issue control commands")
    slaves = [c for c in by_id.values()
              if c.role is ChannelRole.SLAVE and c.cluster == issuer.cluster and c.instance_id == command.target]
    if not slaves:
        return RejectedDirection(f"{command.target} is not a slave of cluster {issuer.cluster}")
    return Forwarded(command.issuer, command.target, command.op)


def nef_expose(channel: ApiChannel, query: Query, nsmf: Nsmf, requester: str | None = None,
               target: str | None = None, ue_view: UeView | None = None) -> MonitoringReport:
    """Monitoring data for the slice bound to ``channel``, and nothing outside it."""
    bound = nsmf.instances.get(channel.instance_id)
    if bound is None or bound.phase is Phase.TERMINATED:
        raise UnboundChannel(channel.channel_id)
    if requester is not None and requester != channel.tenant_id:
        raise Unauthorized(f"{requester} does not own channel {channel.channel_id}")
    scope = {bound.instance_id}
    if channel.role is ChannelRole.MASTER:
        scope |= set(bound.children)
    target = target or bound.instance_id
    if target not in scope:
        raise Unauthorized(f"channel {channel.channel_id} is not bound to {target}")
    inst = nsmf.instances[target]
    members = [nsmf.instances[c] for c in inst.children] if inst.kind is Kind.GN_NSI else [inst]
    ue_view = ue_view or (lambda _iid: ())
    ues = sorted({u for m in members for u in ue_view(m.instance_id)})
    degraded = sorted({c for m in members for c in m.degraded})
    components = nsmf.substrate.components()

    if query is Query.UE_COUNT:
        value: object = len({u for u, _ in ues})
    elif query is Query.UE_STATUS:
        value = tuple(ues)
    elif query is Query.CONNECTIVITY:
        value = "degraded" if degraded else "ok"
    elif query is Query.REACHABILITY:
        value = tuple(sorted({u for u, _ in ues})) if not degraded else ()
    else:
        value = tuple(c for c in degraded if components.get(c) == "tn")
    return MonitoringReport(channel.channel_id, target, query, value)


class Exposure:
    """The operator's NEF: owns the API channels and the northbound trace."""

    def __init__(self, nsmf: Nsmf, nef_id: str = "nef-1", ue_view: UeView | None = None):
        self.nsmf = nsmf
        self.nef_id = nef_id
        self.ue_view = ue_view
        self.channels: dict[str, ApiChannel] = {}
        self.trace: list[dict] = []

    def _open(self, inst: SliceInstance, role: ChannelRole, cluster: str | None) -> ApiChannel:
        ch = ApiChannel(self.nsmf.new_id("ch"), inst.tenant_id, inst.instance_id, inst.use_case_id, role,
                        self.nef_id, cluster)
        self.channels[ch.channel_id] = ch
        self._trace(ch.channel_id, "Open", role.value)
        return ch

    def open_use_case_channels(self, instances: Sequence[SliceInstance]) -> list[ApiChannel]:
        return [self._open(i, ChannelRole.SCS_AS, None) for i in instances]

    def open_cluster_channels(self, gn: SliceInstance, children: Sequence[SliceInstance]) -> list[ApiChannel]:
        master = self._open(gn, ChannelRole.MASTER, gn.instance_id)
        return [master, *(self._open(c, ChannelRole.SLAVE, gn.instance_id) for c in children)]

    def live_channels(self) -> list[ApiChannel]:
        out = []
        for c in self.channels.values():
            inst = self.nsmf.instances.get(c.instance_id)
            if inst is not None and inst.phase is not Phase.TERMINATED:
                out.append(c)
        return out

    def channel_for(self, instance_id: str, role: ChannelRole | None = None) -> ApiChannel | None:
        for c in self.channels.values():
            if c.instance_id == instance_id and (role is None or c.role is role):
                return c
        return None

    def _trace(self, channel: str, kind: str, outcome: str) -> None:
        self.trace.append({"time": self.nsmf.now, "channel": channel, "kind": kind, "outcome": outcome})

    def expose(self, channel_id: str, query: Query, requester: str | None = None,
               target: str | None = None) -> MonitoringReport:
        ch = self.channels.get(channel_id)
        if ch is None:
            self._trace(channel_id, query.value, "UnboundChannel")
            raise UnboundChannel(channel_id)
        try:
            report = nef_expose(ch, query, self.nsmf, requester, target, self.ue_view)
        except SlicingError as exc:
            self._trace(channel_id, query.value, type(exc).__name__)
            raise
        self._trace(channel_id, query.value, json.dumps(report.value))
        return report

    def route(self, command: Command) -> Forwarded | RejectedDirection:
        """Route a tenant-side control command; forwarded lifecycle ops are applied to the target."""
        outcome = master_slave_route(self.channels.values(), command)
        if isinstance(outcome, Forwarded) and command.op in LIFECYCLE_OPS:
            try:
                self.nsmf.transition(command.target, LIFECYCLE_OPS[command.op])
            except IllegalTransition:
                self._trace(command.issuer, f"Command.{command.op}", "IllegalTransition")
                raise
        label = "Forwarded" if isinstance(outcome, Forwarded) else "RejectedDirection"
        self._trace(command.issuer, f"Command.{command.op}", label)
        return outcome
