from __future__ import annotations

from dataclasses import replace
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vslice import v2x
from vslice.errors import InvalidOverride, InvalidParent, TooManyUseCases
from vslice.model import (
    TABLE_ROW_NAMES,
    Category,
    Flag,
    Flavor,
    IdLevel,
    Level,
    Numeric,
    NumericRange,
    Ordinal,
    Presence,
    ProvisioningMode,
    ResourceRequirement,
    ServiceCategory,
    Sharing,
    Text,
    UseCase,
    Vertical,
    derive_nssits,
    derive_snsits,
    interval_intersection,
    parse_value,
    render_value,
    required_slice_count,
    schema_for,
    validate_template,
)

import oracles

US = {t.service_category: t for t in v2x.build_us_nsits()}
GN, SUBS = v2x.build_gn_cluster()


def vertical_of(n: int, vertical_id: str = "v2x") -> Vertical:
    cats = list(ServiceCategory)
    return Vertical(vertical_id, "tenant-1",
                    tuple(UseCase(f"uc-{i}", cats[i % 3], {}, None) for i in range(n)))


resources = st.builds(
    ResourceRequirement,
    st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500),
    st.fixed_dictionaries({c: st.sampled_from(Sharing) for c in ("core", "cu", "du", "ru", "tn")}),
)


# -- values ------------------------------------------------------------------------

@pytest.mark.parametrize("cell,unit,value", [
    ("1-10 ms", "ms", NumericRange(Decimal(1), Decimal(10))),
    ("<20 ms", "ms", NumericRange(None, Decimal(20))),
    ("99.999%", "%", Numeric(Decimal("99.999"))),
    ("0.55 Mbps", "Mbps", Numeric(Decimal("0.55"))),
    ("Very high", None, Ordinal(Level.VERY_HIGH)),
    ("Not a concern", None, Ordinal(Level.NOT_A_CONCERN)),
    ("Yes", None, Flag(True)),
    ("Edge/remote-cloud", None, Text("Edge/remote-cloud")),
])
def test_parse_and_render_cells(cell, unit, value):
    assert parse_value(cell, unit) == value
    assert render_value(value, unit) == cell


def test_levels_are_totally_ordered_with_not_a_concern_lowest():
    assert Level.NOT_A_CONCERN < Level.MEDIUM < Level.HIGH < Level.VERY_HIGH


@given(st.decimals(0, 10_000, places=3), st.decimals(0, 10_000, places=3), st.sampled_from(["ms", "%", "Mbps"]))
def test_range_render_round_trips(a, b, unit):
    lo, hi = sorted((a, b))
    for v in (NumericRange(lo, hi), NumericRange(None, hi), Numeric(lo)):
        assert parse_value(render_value(v, unit), unit) == v


@given(st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000), st.booleans())
def test_interval_intersection_matches_oracle(a, b, c, d, open_low):
    x = NumericRange(None if open_low else Decimal(min(a, b)), Decimal(max(a, b)))
    y = NumericRange(Decimal(min(c, d)), Decimal(max(c, d)))
    got = interval_intersection(x, y)
    want = oracles.intersect((None if open_low else min(a, b), max(a, b)), (min(c, d), max(c, d)))
    if want is None:
        assert got is None
    else:
        assert (got.lower, got.upper) == (Decimal(want[0]) if want[0] is not None else None, Decimal(want[1]))


# -- validation --------------------------------------------------------------------

def test_urllc_template_is_valid():
    tpl = US[ServiceCategory.URLLC]
    assert validate_template(tpl).ok
    assert tpl.attribute("Latency").cell() == "1-10 ms"
    assert tpl.attribute("Availability").cell() == "99.9999%"


def test_empty_template_reports_missing_mandatory():
    tpl = replace(US[ServiceCategory.URLLC], attributes=())
    report = validate_template(tpl)
    assert not report.ok
    assert {v.code for v in report.violations} == {"missing-mandatory"}
    assert report.names() == set(TABLE_ROW_NAMES)


def test_mmtc_without_availability_has_exactly_one_violation():
    tpl = US[ServiceCategory.MMTC].without("Availability")
    report = validate_template(tpl)
    assert [v.subject for v in report.violations] == ["Availability"]


@pytest.mark.parametrize("flavor_tpl", [*US.values(), *SUBS], ids=lambda t: t.template_id)
@pytest.mark.parametrize("name", schema_for(Flavor.US_NSIT).mandatory)
def test_field_deletion_names_the_field(flavor_tpl, name):
    report = validate_template(flavor_tpl.without(name))
    assert report.names() == {name}


def test_schema_row_set():
    rules = schema_for(Flavor.US_NSIT).rules
    counts = {c: sum(1 for r in rules if r.category is c) for c in Category}
    assert counts == {Category.PERFORMANCE: 6, Category.FUNCTIONAL: 6, Category.OPERATIONAL: 7}
    assert [r.name for r in rules] == [row for _, row, _ in oracles.TABLE]
    assert all(r.presence is Presence.MANDATORY for r in rules)


@pytest.mark.parametrize("mutate,code", [
    (lambda t: replace(t, attributes=tuple(
        replace(a, value=NumericRange(Decimal(10), Decimal(1))) if a.name == "Latency" else a
        for a in t.attributes)), "range-inverted"),
    (lambda t: replace(t, attributes=tuple(
        replace(a, value=Numeric(Decimal(101))) if a.name == "Reliability" else a
        for a in t.attributes)), "percent-out-of-range"),
    (lambda t: replace(t, attributes=tuple(
        replace(a, unit=None) if a.name == "Latency" else a for a in t.attributes)), "unit-missing"),
    (lambda t: replace(t, attributes=tuple(
        replace(a, unit="ms") if a.name == "Priority" else a for a in t.attributes)), "unit-unexpected"),
    (lambda t: replace(t, attributes=tuple(
        replace(a, presence=None) if a.name == "Priority" else a for a in t.attributes)), "presence-missing"),
    (lambda t: replace(t, id_info=replace(t.id_info, use_case_id=None)), "id-use-case"),
    (lambda t: replace(t, sub_templates=("x",)), "sub-templates"),
    (lambda t: replace(t, attributes=t.attributes + t.attributes[:1]), "duplicate-attribute"),
    (lambda t: replace(t, resources=replace(t.resources, radio=-1)), "resource-negative"),
])
def test_structural_violations(mutate, code):
    report = validate_template(mutate(US[ServiceCategory.URLLC]))
    assert code in {v.code for v in report.violations}


def test_generic_template_rules():
    assert validate_template(GN).ok
    assert GN.id_info.level is IdLevel.VERTICAL_GENERIC and GN.id_info.use_case_id is None
    report = validate_template(replace(GN, sub_templates=()))
    assert "sub-templates" in {v.code for v in report.violations}
    report = validate_template(replace(GN, sub_templates=tuple(f"s{i}" for i in range(9))))
    assert "sub-templates" in {v.code for v in report.violations}
    report = validate_template(replace(GN, id_info=replace(GN.id_info, use_case_id="x")))
    assert "id-use-case" in {v.code for v in report.violations}


def test_validate_rejects_schema_of_other_flavor():
    with pytest.raises(ValueError):
        validate_template(GN, schema_for(Flavor.US_NSIT))


# -- derivation --------------------------------------------------------------------

def test_v2x_cluster_has_three_subs_in_use_case_order():
    subs = derive_snsits(GN, v2x.build_vertical())
    assert [s.service_category for s in subs] == [ServiceCategory.URLLC, ServiceCategory.EMBB, ServiceCategory.MMTC]
    assert [s.id_info.use_case_id for s in subs] == [uc for uc, _ in v2x.USE_CASES]
    assert all(s.flavor is Flavor.S_NSIT and validate_template(s).ok for s in subs)


def test_sub_cells_reproduce_columns():
    subs = derive_snsits(GN, v2x.build_vertical())
    for col, sub in enumerate(subs):
        for _, row, cells in oracles.TABLE:
            assert sub.attribute(row).cell() == cells[col]


def test_singleton_cluster_inherits_parent_values():
    vertical = Vertical("v2x", "tenant-1", (UseCase("only", ServiceCategory.EMBB, {}, None),))
    (sub,) = derive_snsits(GN, vertical)
    for a in GN.attributes:
        assert sub.attribute(a.name).value == a.value
    assert sub.resources == GN.resources


def test_nine_use_cases_rejected():
    with pytest.raises(TooManyUseCases):
        derive_snsits(GN, vertical_of(9))


@given(st.integers(1, 8))
def test_derivation_is_order_preserving_and_subset(n):
    vertical = vertical_of(n)
    subs = derive_snsits(GN, vertical)
    assert [s.id_info.use_case_id for s in subs] == [uc.use_case_id for uc in vertical.use_cases]
    assert subs == derive_snsits(GN, vertical)
    for s in subs:
        assert set(s.attribute_names()) <= set(GN.attribute_names())


def test_looser_override_rejected():
    loose = Vertical("v2x", "tenant-1", (UseCase("a", ServiceCategory.URLLC,
                                                 {"Latency": parse_value("<500 ms", "ms")}, None),))
    with pytest.raises(InvalidOverride):
        derive_snsits(GN, loose)
    unknown = Vertical("v2x", "tenant-1", (UseCase("a", ServiceCategory.URLLC,
                                                   {"Colour": Text("red")}, None),))
    with pytest.raises(InvalidOverride):
        derive_snsits(GN, unknown)


def test_derive_snsits_needs_generic_parent():
    with pytest.raises(InvalidParent):
        derive_snsits(US[ServiceCategory.URLLC], v2x.build_vertical())
    with pytest.raises(InvalidParent):
        derive_snsits(GN, vertical_of(2, "other"))


def test_nssit_split_example():
    tpl = replace(US[ServiceCategory.URLLC],
                  resources=ResourceRequirement(communication=4, computation=10, storage=0, radio=6))
    core, ran, tn = derive_nssits(tpl)
    assert (core.resources.computation, ran.resources.radio, tn.resources.communication) == (10, 6, 4)
    assert [c.flavor for c in (core, ran, tn)] == [Flavor.NSSIT_5GC, Flavor.NSSIT_NG_RAN, Flavor.NSSIT_TN]
    assert all(validate_template(c).ok for c in (core, ran, tn))


def test_nssit_zero_resources_keep_parent_id():
    tpl = replace(US[ServiceCategory.MMTC], resources=ResourceRequirement(0, 0, 0, 0))
    for child in derive_nssits(tpl):
        assert child.resources.quantities() == {"communication": 0, "computation": 0, "storage": 0, "radio": 0}
        assert child.template_id.startswith(tpl.template_id + "#")


@given(resources, st.sampled_from([*US.values(), *SUBS]))
def test_nssit_children_sum_to_parent(res, base):
    tpl = replace(base, resources=res)
    children = derive_nssits(tpl)
    total = {d: sum(c.resources.quantities()[d] for c in children) for d in ResourceRequirement.DIMENSIONS}
    assert total == res.quantities()


def test_required_slice_count():
    def count(vertical, mode):
        c = required_slice_count(vertical, mode)
        return c.top_level, c.sub

    assert count(v2x.build_vertical(), ProvisioningMode.USE_CASE_SPECIFIC) == (3, 0)
    assert count(vertical_of(1), ProvisioningMode.USE_CASE_SPECIFIC) == (1, 0)
    assert count(vertical_of(1), ProvisioningMode.SUB_NETWORK_SLICING) == (1, 1)
    assert count(vertical_of(8), ProvisioningMode.SUB_NETWORK_SLICING) == (1, 8)


@settings(max_examples=50)
@given(st.integers(1, 8), st.sampled_from(ProvisioningMode))
def test_required_slice_count_law(n, mode):
    c = required_slice_count(vertical_of(n), mode)
    expected = (n, 0) if mode is ProvisioningMode.USE_CASE_SPECIFIC else (1, n)
    assert (c.top_level, c.sub) == expected
