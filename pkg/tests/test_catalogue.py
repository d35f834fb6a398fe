from __future__ import annotations

from dataclasses import replace
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vslice import v2x
from vslice.catalogue import Catalogue, Provenance, RejectionReport, negotiate_non_standard
from vslice.errors import DanglingSubTemplate, DuplicateId, IntegrityViolation, InvalidTemplate
from vslice.model import (
    Flavor,
    Level,
    Numeric,
    NumericRange,
    Ordinal,
    ProvisioningMode,
    ServiceCategory,
    interval_within,
    parse_value,
)

import oracles


def fresh():
    gn, subs = v2x.build_gn_cluster()
    return Catalogue(), gn, subs


def test_generic_after_its_subs():
    cat, gn, subs = fresh()
    for s in subs:
        cat.insert(s)
    cat.insert(gn)
    found = cat.lookup("v2x", ProvisioningMode.SUB_NETWORK_SLICING)
    assert len(found) == 4
    assert found.ids()[0] == gn.template_id
    assert sorted(found.ids()[1:]) == sorted(s.template_id for s in subs)


def test_duplicate_id():
    cat, gn, subs = fresh()
    cat.insert(subs[0])
    with pytest.raises(DuplicateId):
        cat.insert(subs[0])


def test_dangling_sub_template():
    cat, gn, subs = fresh()
    with pytest.raises(DanglingSubTemplate):
        cat.insert(gn)
    assert len(cat) == 0


def test_batch_is_atomic():
    cat, gn, subs = fresh()
    with pytest.raises(DanglingSubTemplate):
        cat.insert_batch([*subs[:2], gn])
    assert len(cat) == 0


def test_invalid_template_rejected():
    cat, gn, subs = fresh()
    with pytest.raises(InvalidTemplate) as err:
        cat.insert(subs[0].without("Latency"))
    assert err.value.report.names() == {"Latency"}


def test_sub_with_attribute_outside_parent_rejected():
    cat, gn, subs = fresh()
    slim = gn.without("Monitoring")
    with pytest.raises(InvalidTemplate):
        cat.insert_batch([*subs, slim])


def test_ids_assigned_when_empty():
    cat = Catalogue()
    t = v2x.build_us_nsits()[0].with_id("")
    stored = cat.insert(t)
    assert stored.template_id == "nst-0001"
    assert cat.insert(t).template_id == "nst-0002"


def test_lookup_fixture(catalogue):
    gn_mode = catalogue.lookup("v2x", ProvisioningMode.SUB_NETWORK_SLICING)
    flavors = [t.flavor for t in gn_mode.templates]
    assert flavors == [Flavor.GN_NSIT, Flavor.S_NSIT, Flavor.S_NSIT, Flavor.S_NSIT]
    us_mode = catalogue.lookup("v2x", ProvisioningMode.USE_CASE_SPECIFIC)
    assert {t.service_category for t in us_mode.templates} == set(ServiceCategory)
    assert len(catalogue.lookup("nope", ProvisioningMode.SUB_NETWORK_SLICING)) == 0
    assert len(catalogue.lookup("nope", ProvisioningMode.USE_CASE_SPECIFIC)) == 0


def test_removed_sub_surfaces_in_check_not_lookup(catalogue):
    sub = "v2x-gn.infotainment"
    with pytest.raises(IntegrityViolation):
        catalogue.remove(sub)
    catalogue.remove(sub, force=True)
    found = catalogue.lookup("v2x", ProvisioningMode.SUB_NETWORK_SLICING)
    assert len(found) == 3
    with pytest.raises(IntegrityViolation) as err:
        catalogue.check()
    assert any(sub in p for p in err.value.problems)


def test_fixture_catalogue_checks_clean(catalogue):
    catalogue.check()


def test_persistence_round_trip(tmp_path, catalogue):
    p = tmp_path / "cat.yaml"
    catalogue.save(p)
    again = Catalogue.load(p)
    assert again.content() == catalogue.content()
    again.save(tmp_path / "cat2.yaml")
    assert (tmp_path / "cat2.yaml").read_bytes() == p.read_bytes()
    assert not list(tmp_path.glob(".cat.yaml.*"))


# -- non-standard onboarding --------------------------------------------------------

def draft(**cells):
    base = v2x.build_us_nsits()[0].with_id("")
    attrs = tuple(replace(a, value=parse_value(cells[a.name], a.unit)) if a.name in cells else a
                  for a in base.attributes)
    return replace(base, attributes=attrs)


def test_subset_range_accepted(catalogue):
    got = negotiate_non_standard(catalogue, draft(Latency="1-5 ms"), {"Latency": parse_value("1-10 ms", "ms")})
    assert not isinstance(got, RejectionReport)
    assert got.attribute("Latency").cell() == "1-5 ms"
    assert catalogue.provenance[got.template_id] is Provenance.NON_STANDARD


def test_reliability_above_operator_max_rejected(catalogue):
    before = catalogue.content()
    got = negotiate_non_standard(catalogue, draft(Reliability="99.9999%"),
                                 {"Reliability": parse_value("0-99.999%", "%")})
    assert isinstance(got, RejectionReport)
    assert got.names() == {"Reliability"}
    assert catalogue.content() == before


def test_identical_to_standard_is_stored_separately(catalogue):
    std = catalogue.get("v2x-us-urllc")
    got = negotiate_non_standard(catalogue, std, {})
    assert got.template_id != std.template_id
    assert got.attributes == std.attributes
    assert catalogue.provenance[got.template_id] is Provenance.NON_STANDARD
    assert catalogue.provenance[std.template_id] is Provenance.STANDARD


def test_ordinal_bound(catalogue):
    got = negotiate_non_standard(catalogue, draft(), {"Security": Ordinal(Level.HIGH)})
    assert isinstance(got, RejectionReport) and got.names() == {"Security"}


def test_generic_draft_with_subs(catalogue):
    gn, subs = v2x.build_gn_cluster()
    got = negotiate_non_standard(catalogue, gn, {"Latency": parse_value("<50 ms", "ms")}, subs)
    assert got.flavor is Flavor.GN_NSIT
    assert len(got.sub_templates) == 3
    for sid in got.sub_templates:
        assert catalogue.provenance[sid] is Provenance.NON_STANDARD
        assert catalogue.get(sid).attribute("Latency").value.upper <= 50
    catalogue.check()


@settings(max_examples=100)
@given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200), st.integers(0, 200))
def test_negotiation_soundness(a, b, c, d):
    cat = Catalogue()
    lo, hi = sorted((a, b))
    blo, bhi = sorted((c, d))
    proposal = draft(Latency=f"{lo}-{hi} ms")
    bound = NumericRange(Decimal(blo), Decimal(bhi))
    got = negotiate_non_standard(cat, proposal, {"Latency": bound})
    expected = oracles.intersect((lo, hi), (blo, bhi))
    if expected is None:
        assert isinstance(got, RejectionReport) and got.names() == {"Latency"}
    else:
        value = got.attribute("Latency").value
        assert interval_within(value, bound)
        assert (float(value.lower), float(value.upper)) == expected
