from __future__ import annotations

import itertools
import random
from dataclasses import replace

import pytest

from vslice import v2x
from vslice.broker import (
    ChannelRole,
    Command,
    Forwarded,
    Query,
    RejectedDirection,
    SliceRequest,
    master_slave_route,
)
from vslice.catalogue import Catalogue
from vslice.errors import InvalidTemplate, TooManyUseCases, UnboundChannel, Unauthorized
from vslice.infrastructure import Substrate, residuals
from vslice.model import ProvisioningMode, build_cluster
from vslice.orchestration import Event, FcapsEvent, FcapsKind, Phase

from conftest import Stack
import generators
import oracles

US = ProvisioningMode.USE_CASE_SPECIFIC
GN = ProvisioningMode.SUB_NETWORK_SLICING
US_IDS = ("v2x-us-urllc", "v2x-us-embb", "v2x-us-mmtc")


def run_up(nsmf, iid):
    for e in (Event.INSTANTIATE, Event.ACTIVATE, Event.RUN):
        nsmf.transition(iid, e)


def test_gn_request_granted_with_three_child_leases(stack):
    d = stack.broker.admit(SliceRequest("r1", "tenant-1", "v2x", GN, ("v2x-gn",)))
    assert d.granted and len(d.lease) == 3 and len(d.instances) == 1
    gn = stack.nsmf.instances[d.instances[0]]
    assert gn.children == d.lease
    assert all(stack.nsmf.instances[k].phase is Phase.PREPARED for k in d.lease)
    assert set(stack.nsmf.allocations) == set(d.lease)


def test_heavy_mmtc_child_denies_the_whole_cluster(substrate):
    gn, subs = v2x.build_gn_cluster()
    subs[2] = replace(subs[2], resources=replace(subs[2].resources, radio=41))
    cat = Catalogue()
    cat.insert_batch([*subs, gn])
    stack = Stack(substrate, cat)
    before = stack.nsmf.state_hash()
    d = stack.request(GN, "v2x-gn")
    assert not d.granted
    assert d.denied_template == subs[2].template_id
    assert d.bottleneck == "gnb-1" and "gnb-1" in d.reason
    assert stack.nsmf.state_hash() == before
    assert stack.nsmf.instances == {} and stack.exposure.channels == {}


def test_zero_resource_request_is_granted(substrate):
    tpl = generators.us_template({"compute": 0, "storage": 0, "radio": 0, "bandwidth": 0, "shared": set()}, "zero")
    cat = Catalogue()
    cat.insert(tpl)
    stack = Stack(substrate, cat)
    d = stack.request(US, "zero")
    assert d.granted and d.lease
    assert stack.nsmf.placements[d.lease[0]].as_tuple() == ("core-1", "gnb-1", "cu-1", "du-1-1", "ru-1-1", "tn-1")


def test_denial_reason_and_grant_lease(stack):
    ok = stack.request(US, *US_IDS)
    assert ok.granted and len(ok.lease) == 3
    bad = stack.request(US, "nope")
    assert not bad.granted and "nope" in bad.reason
    wrong = stack.request(GN, *US_IDS)
    assert not wrong.granted and wrong.reason


def test_nine_sub_slices_rejected():
    cat = Catalogue()
    gn, subs = v2x.build_gn_cluster()
    extra = [s.with_id(f"{s.template_id}-{i}") for i in range(3) for s in subs]
    cat.insert_batch(extra)
    with pytest.raises(InvalidTemplate):
        cat.insert(replace(gn, sub_templates=tuple(t.template_id for t in extra)))
    v = v2x.build_vertical()
    wide = replace(v, use_cases=tuple(replace(u, use_case_id=f"{u.use_case_id}-{i}")
                                       for i in range(3) for u in v.use_cases))
    with pytest.raises(TooManyUseCases):
        build_cluster(gn, wide)


# -- exposure ----------------------------------------------------------------------

def test_ue_count_reports_bound_slice(stack):
    (iid,) = stack.request(US, "v2x-us-embb").instances
    stack.exposure.ue_view = lambda i: [(f"ue-{k}", "gnb-1") for k in range(5)] if i == iid else []
    ch = stack.exposure.channel_for(iid)
    assert stack.exposure.expose(ch.channel_id, Query.UE_COUNT, "tenant-1").value == 5


def test_cross_use_case_query_is_unauthorized(stack):
    ids = stack.request(US, *US_IDS).instances
    ch = stack.exposure.channel_for(ids[0])
    with pytest.raises(Unauthorized):
        stack.exposure.expose(ch.channel_id, Query.UE_COUNT, "tenant-1", target=ids[1])
    with pytest.raises(Unauthorized):
        stack.exposure.expose(ch.channel_id, Query.UE_COUNT, "tenant-2")
    assert stack.exposure.trace[-1]["outcome"] == "Unauthorized"


def test_unbound_channels(stack):
    (iid,) = stack.request(US, "v2x-us-mmtc").instances
    with pytest.raises(UnboundChannel):
        stack.exposure.expose("ch-9999", Query.UE_COUNT)
    stack.nsmf.drive(iid, Phase.TERMINATED)
    with pytest.raises(UnboundChannel):
        stack.exposure.expose(stack.exposure.channel_for(iid).channel_id, Query.CONNECTIVITY)


def test_link_failure_shows_degraded_connectivity(stack):
    (iid,) = stack.request(US, "v2x-us-urllc").instances
    run_up(stack.nsmf, iid)
    ch = stack.exposure.channel_for(iid).channel_id
    assert stack.exposure.expose(ch, Query.CONNECTIVITY).value == "ok"
    link = stack.nsmf.placements[iid].link
    stack.nsmf.handle_fcaps(FcapsEvent(FcapsKind.FAULT, link))
    assert stack.nsmf.fcaps_log[-1].target == link
    assert stack.nsmf.instances[iid].degraded == {link}
    assert stack.exposure.expose(ch, Query.CONNECTIVITY).value == "degraded"
    assert stack.exposure.expose(ch, Query.LINK_FAILURE).value == (link,)


def test_master_sees_cluster_slave_sees_itself(stack):
    (gid,) = stack.request(GN, "v2x-gn").instances
    kids = stack.nsmf.instances[gid].children
    master = stack.exposure.channel_for(gid, ChannelRole.MASTER).channel_id
    for k in kids:
        stack.exposure.expose(master, Query.UE_COUNT, target=k)
    slave = stack.exposure.channel_for(kids[0], ChannelRole.SLAVE).channel_id
    with pytest.raises(Unauthorized):
        stack.exposure.expose(slave, Query.UE_COUNT, target=kids[1])


# -- Master/Slave ------------------------------------------------------------------

def roomy(factor=4):
    doc = v2x.substrate_doc()
    for c in doc["core_nodes"]:
        c["compute"] *= factor
        c["storage"] *= factor
    for g in doc["gnbs"]:
        g["radio"] *= factor
    for link in doc["tn_links"]:
        link["bandwidth"] *= factor
    return Substrate.from_dict(doc)


def two_clusters(stack):
    a = stack.request(GN, "v2x-gn").instances[0]
    b = stack.request(GN, "v2x-gn").instances[0]
    u = stack.request(US, "v2x-us-mmtc").instances[0]
    assert a and b and u
    return a, b, u


def test_master_slave_matrix(catalogue):
    stack = Stack(roomy(), catalogue)
    two_clusters(stack)
    nsmf = stack.nsmf
    channels = list(stack.exposure.channels.values())
    targets = sorted(nsmf.instances)
    for issuer, target in itertools.product(channels, targets):
        got = master_slave_route(channels, Command(issuer.channel_id, target, "status"))
        own_slave = issuer.role is ChannelRole.MASTER and target in nsmf.instances[issuer.instance_id].children
        assert isinstance(got, Forwarded) == own_slave, (issuer.role, target)
        if not own_slave:
            assert isinstance(got, RejectedDirection) and got.reason


def test_master_deactivates_one_slave(stack):
    (gid,) = stack.request(GN, "v2x-gn").instances
    run_up(stack.nsmf, gid)
    kids = stack.nsmf.instances[gid].children
    master = stack.exposure.channel_for(gid, ChannelRole.MASTER).channel_id
    assert isinstance(stack.exposure.route(Command(master, kids[1], "deactivate")), Forwarded)
    assert [stack.nsmf.instances[k].phase for k in kids] == [Phase.RUNNING, Phase.DEACTIVATED, Phase.RUNNING]
    slave = stack.exposure.channel_for(kids[0], ChannelRole.SLAVE).channel_id
    assert isinstance(stack.exposure.route(Command(slave, kids[2], "deactivate")), RejectedDirection)
    assert stack.nsmf.instances[kids[2]].phase is Phase.RUNNING
    assert stack.exposure.trace[-1]["outcome"] == "RejectedDirection"


def test_channel_cardinality(stack):
    stack.request(US, *US_IDS)
    assert len(stack.exposure.channels) == 3
    stack.request(GN, "v2x-gn")
    roles = [c.role for c in stack.exposure.channels.values()]
    assert roles.count(ChannelRole.SCS_AS) == 3
    assert roles.count(ChannelRole.MASTER) == 1 and roles.count(ChannelRole.SLAVE) == 3
    bound = [c.instance_id for c in stack.exposure.channels.values()]
    assert len(bound) == len(set(bound))


# -- randomized --------------------------------------------------------------------

def admit_on(raw, dicts):
    cat = Catalogue()
    ids = []
    for i, d in enumerate(dicts):
        ids.append(cat.insert(generators.us_template(d, f"t{i}")).template_id)
    stack = Stack(Substrate.from_dict(raw), cat)
    return stack, stack.request(US, *ids)


@pytest.mark.parametrize("seed", range(40))
def test_admission_matches_oracle(seed):
    rng = random.Random(5000 + seed)
    raw = generators.substrate(rng)
    ds = [generators.demand_dict(rng, 8) for _ in range(rng.randint(1, 3))]
    stack, d = admit_on(raw, ds)
    want = oracles.brute_force_admit(raw, [], ds)
    assert d.granted == (want is not None)
    if want:
        assert [stack.nsmf.placements[s].as_tuple() for s in d.lease] == want
    else:
        assert stack.nsmf.allocations == {}


@pytest.mark.parametrize("seed", range(40))
def test_admission_monotonicity(seed):
    rng = random.Random(7000 + seed)
    raw = generators.substrate(rng)
    ds = [generators.demand_dict(rng, 10) for _ in range(rng.randint(1, 3))]
    _, d = admit_on(raw, ds)
    smaller = {
        "core_nodes": [{**c, "compute": rng.randint(0, c["compute"]), "storage": rng.randint(0, c["storage"])}
                       for c in raw["core_nodes"]],
        "gnbs": [{**g, "radio": rng.randint(0, g["radio"])} for g in raw["gnbs"]],
        "tn_links": [{**l, "bandwidth": rng.randint(0, l["bandwidth"])} for l in raw["tn_links"]],
    }
    stack2, d2 = admit_on(smaller, ds)
    if not d.granted:
        assert not d2.granted
        assert residuals(stack2.nsmf.substrate, stack2.nsmf.allocations) == \
            residuals(stack2.nsmf.substrate, {})
