"""Slice templates: attribute values, per-flavor schemas, validation and derivation.

A template is an attribute set (performance, functional, operational) plus a
resource requirement and identification info. Four flavors exist: the
use-case specific NSIT, the generic (per-vertical) NSIT, the sub NSIT that a
generic template clusters, and the three subnet templates (5GC, NG-RAN, TN)
every end-to-end template decomposes into.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from typing import Mapping, NamedTuple, Sequence, Union

from .errors import InvalidOverride, InvalidParent, TooManyUseCases

MAX_SUB_SLICES = 8


class Category(str, enum.Enum):
    PERFORMANCE = "Performance"
    FUNCTIONAL = "Functional"
    OPERATIONAL = "Operational"


class Presence(str, enum.Enum):
    MANDATORY = "Mandatory"
    OPTIONAL = "Optional"
    CONDITIONAL = "Conditional"


class Level(enum.IntEnum):
    """Ordinal requirement level. Total order with NOT_A_CONCERN lowest."""

    NOT_A_CONCERN = 0
    MEDIUM = 1
    HIGH = 2
    VERY_HIGH = 3

    @property
    def label(self) -> str:
        return _LEVEL_LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "Level":
        for level, label in _LEVEL_LABELS.items():
            if label.lower() == text.strip().lower():
                return level
        raise ValueError(f"not a level: {text!r}")


_LEVEL_LABELS = {
    Level.NOT_A_CONCERN: "Not a concern",
    Level.MEDIUM: "Medium",
    Level.HIGH: "High",
    Level.VERY_HIGH: "Very high",
}


class ServiceCategory(str, enum.Enum):
    EMBB = "eMBB"
    MMTC = "mMTC"
    URLLC = "uRLLC"


class Flavor(str, enum.Enum):
    US_NSIT = "UsNsit"
    GN_NSIT = "GnNsit"
    S_NSIT = "SNsit"
    NSSIT_5GC = "Nssit5GC"
    NSSIT_NG_RAN = "NssitNgRan"
    NSSIT_TN = "NssitTn"

    @property
    def is_subnet(self) -> bool:
        return self in SUBNET_FLAVORS


SUBNET_FLAVORS = (Flavor.NSSIT_5GC, Flavor.NSSIT_NG_RAN, Flavor.NSSIT_TN)


class IdLevel(str, enum.Enum):
    VERTICAL_GENERIC = "VerticalGeneric"
    SUB = "Sub"
    USE_CASE_SPECIFIC = "UseCaseSpecific"
    SUBNET = "Subnet"


FLAVOR_LEVEL = {
    Flavor.US_NSIT: IdLevel.USE_CASE_SPECIFIC,
    Flavor.GN_NSIT: IdLevel.VERTICAL_GENERIC,
    Flavor.S_NSIT: IdLevel.SUB,
    Flavor.NSSIT_5GC: IdLevel.SUBNET,
    Flavor.NSSIT_NG_RAN: IdLevel.SUBNET,
    Flavor.NSSIT_TN: IdLevel.SUBNET,
}


class Sharing(str, enum.Enum):
    DEDICATED = "Dedicated"
    SHARED = "Shared"


class ProvisioningMode(str, enum.Enum):
    USE_CASE_SPECIFIC = "UseCaseSpecific"
    SUB_NETWORK_SLICING = "SubNetworkSlicing"

    @classmethod
    def parse(cls, text: str) -> "ProvisioningMode":
        short = {"us": cls.USE_CASE_SPECIFIC, "gn": cls.SUB_NETWORK_SLICING}
        if text.lower() in short:
            return short[text.lower()]
        return cls(text)

    @property
    def short(self) -> str:
        return "us" if self is ProvisioningMode.USE_CASE_SPECIFIC else "gn"


# -- attribute values -------------------------------------------------------


@dataclass(frozen=True)
class Numeric:
    number: Decimal


@dataclass(frozen=True)
class NumericRange:
    """Closed interval; ``lower=None`` is an open-ended "below upper" bound."""

    lower: Decimal | None
    upper: Decimal


@dataclass(frozen=True)
class Ordinal:
    level: Level


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class Flag:
    value: bool


AttributeValue = Union[Numeric, NumericRange, Ordinal, Text, Flag]
NUMERIC_KINDS = (Numeric, NumericRange)
PERCENT = "%"


def _dec(text: str) -> Decimal:
    try:
        d = Decimal(text.strip())
    except InvalidOperation:
        raise ValueError(f"not a number: {text!r}") from None
    if not d.is_finite():
        raise ValueError(f"not a finite number: {text!r}")
    return d


def parse_value(text: str, unit: str | None = None) -> AttributeValue:
    """Parse a table cell such as ``"1-10 ms"``, ``"<20 ms"`` or ``"Very high"``.

    Numeric cells need ``unit``; without one the cell is read as a level,
    a Yes/No flag or free text, in that order.
    """
    text = text.strip()
    if unit:
        body = text[: -len(unit)].strip() if text.endswith(unit) else text
        if body.startswith("<"):
            return NumericRange(None, _dec(body[1:]))
        # split on a dash that is not a leading sign
        dash = body.find("-", 1)
        if dash > 0:
            return NumericRange(_dec(body[:dash]), _dec(body[dash + 1:]))
        return Numeric(_dec(body))
    if text in ("Yes", "No"):
        return Flag(text == "Yes")
    try:
        return Ordinal(Level.from_label(text))
    except ValueError:
        return Text(text)


def render_value(value: AttributeValue, unit: str | None = None) -> str:
    """Inverse of :func:`parse_value`."""
    if isinstance(value, (Numeric, NumericRange)):
        if isinstance(value, Numeric):
            body = str(value.number)
        elif value.lower is None:
            body = f"<{value.upper}"
        else:
            body = f"{value.lower}-{value.upper}"
        if not unit:
            return body
        return f"{body}{unit}" if unit == PERCENT else f"{body} {unit}"
    if isinstance(value, Ordinal):
        return value.level.label
    if isinstance(value, Flag):
        return "Yes" if value.value else "No"
    return value.text


def interval(value: AttributeValue) -> tuple[Decimal | None, Decimal]:
    """Numeric value as ``(lower, upper)``; ``None`` lower means unbounded."""
    if isinstance(value, Numeric):
        return value.number, value.number
    if isinstance(value, NumericRange):
        return value.lower, value.upper
    raise TypeError(f"not numeric: {value!r}")


def interval_within(inner: AttributeValue, outer: AttributeValue) -> bool:
    ilo, ihi = interval(inner)
    olo, ohi = interval(outer)
    if ihi > ohi:
        return False
    if olo is None:
        return True
    return ilo is not None and ilo >= olo


def interval_intersection(a: AttributeValue, b: AttributeValue) -> AttributeValue | None:
    """Intersection of two numeric values, keeping the shape of ``a`` where possible."""
    alo, ahi = interval(a)
    blo, bhi = interval(b)
    lo = blo if alo is None else alo if blo is None else max(alo, blo)
    hi = min(ahi, bhi)
    if lo is not None and lo > hi:
        return None
    if isinstance(a, Numeric):
        return a
    return NumericRange(lo, hi)


# -- templates --------------------------------------------------------------


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    category: Category
    value: AttributeValue
    presence: Presence = Presence.MANDATORY
    unit: str | None = None

    def cell(self) -> str:
        return render_value(self.value, self.unit)


@dataclass(frozen=True)
class IdentificationInfo:
    tenant_id: str
    vertical_id: str
    level: IdLevel
    use_case_id: str | None = None
    template_id: str = ""


COMPONENT_CLASSES = ("core", "cu", "du", "ru", "tn")
DEFAULT_SHARING = {c: Sharing.DEDICATED for c in COMPONENT_CLASSES}


@dataclass(frozen=True)
class ResourceRequirement:
    communication: int = 0
    computation: int = 0
    storage: int = 0
    radio: int = 0
    sharing: Mapping[str, Sharing] = field(default_factory=lambda: dict(DEFAULT_SHARING))

    DIMENSIONS = ("communication", "computation", "storage", "radio")

    def quantities(self) -> dict[str, int]:
        return {d: getattr(self, d) for d in self.DIMENSIONS}

    def sharing_for(self, component_class: str) -> Sharing:
        return self.sharing.get(component_class, Sharing.DEDICATED)

    def __hash__(self):
        return hash((tuple(self.quantities().items()), tuple(sorted(self.sharing.items()))))


@dataclass(frozen=True)
class SliceTemplate:
    id_info: IdentificationInfo
    flavor: Flavor
    attributes: tuple[AttributeSpec, ...] = ()
    resources: ResourceRequirement = field(default_factory=ResourceRequirement)
    service_category: ServiceCategory | None = None
    sub_templates: tuple[str, ...] = ()

    @property
    def template_id(self) -> str:
        return self.id_info.template_id

    def attribute(self, name: str) -> AttributeSpec | None:
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    def attribute_names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def with_id(self, template_id: str) -> "SliceTemplate":
        return replace(self, id_info=replace(self.id_info, template_id=template_id))

    def without(self, name: str) -> "SliceTemplate":
        return replace(self, attributes=tuple(a for a in self.attributes if a.name != name))


@dataclass(frozen=True)
class UseCase:
    use_case_id: str
    service_category: ServiceCategory
    overrides: Mapping[str, AttributeValue] = field(default_factory=dict)
    resources: ResourceRequirement | None = None

    def __hash__(self):
        return hash((self.use_case_id, self.service_category))


@dataclass(frozen=True)
class Vertical:
    vertical_id: str
    tenant_id: str
    use_cases: tuple[UseCase, ...]

    @property
    def n(self) -> int:
        return len(self.use_cases)

    def use_case(self, use_case_id: str) -> UseCase:
        for uc in self.use_cases:
            if uc.use_case_id == use_case_id:
                return uc
        raise KeyError(use_case_id)

    def problems(self) -> list[str]:
        out = []
        if not self.use_cases:
            out.append("vertical has no use cases")
        ids = [uc.use_case_id for uc in self.use_cases]
        if len(set(ids)) != len(ids):
            out.append("duplicate use-case ids")
        return out


# -- schema -----------------------------------------------------------------


@dataclass(frozen=True)
class FieldRule:
    name: str
    category: Category
    kinds: tuple[type, ...]
    unit: str | None = None
    presence: Presence = Presence.MANDATORY


_P, _F, _O = Category.PERFORMANCE, Category.FUNCTIONAL, Category.OPERATIONAL
_NUM = (Numeric, NumericRange)

# Row set of the V2X requirement table, in table order.
TABLE_ROWS: tuple[FieldRule, ...] = (
    FieldRule("Latency", _P, _NUM, "ms"),
    FieldRule("Reliability", _P, _NUM, PERCENT),
    FieldRule("Availability", _P, _NUM, PERCENT),
    FieldRule("Mobility", _P, _NUM, "Km/hr"),
    FieldRule("Device density", _P, (Ordinal,)),
    FieldRule("Data rate", _P, _NUM, "Mbps"),
    FieldRule("Isolation", _F, (Ordinal,)),
    FieldRule("Security", _F, (Ordinal,)),
    FieldRule("Application server positioning", _F, (Text,)),
    FieldRule("Scheduling", _F, (Text,)),
    FieldRule("Priority", _F, (Ordinal,)),
    FieldRule("Battery life", _F, (Ordinal,)),
    FieldRule("Coverage type", _O, (Text,)),
    FieldRule("Supported APIs", _O, (Flag,)),
    FieldRule("Energy efficiency", _O, (Ordinal,)),
    FieldRule("Resources/policies", _O, (Text,)),
    FieldRule("Monitoring", _O, (Text,)),
    FieldRule("Communication mode", _O, (Text,)),
    FieldRule("Communication primitive", _O, (Text,)),
)
TABLE_ROW_NAMES = tuple(r.name for r in TABLE_ROWS)


@dataclass(frozen=True)
class Schema:
    flavor: Flavor
    rules: tuple[FieldRule, ...]

    def rule(self, name: str) -> FieldRule | None:
        for r in self.rules:
            if r.name == name:
                return r
        return None

    @property
    def mandatory(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.rules if r.presence is Presence.MANDATORY)


def schema_for(flavor: Flavor) -> Schema:
    if flavor.is_subnet:
        # subnet templates carry the parent's attributes but require none
        return Schema(flavor, tuple(replace(r, presence=Presence.OPTIONAL) for r in TABLE_ROWS))
    return Schema(flavor, TABLE_ROWS)


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.subject}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    template_id: str
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def names(self) -> set[str]:
        return {v.subject for v in self.violations}


def _value_violations(attr: AttributeSpec) -> list[Violation]:
    out = []
    v = attr.value
    numeric = isinstance(v, NUMERIC_KINDS)
    if numeric and not attr.unit:
        out.append(Violation("unit-missing", attr.name, "numeric value without unit"))
    if not numeric and attr.unit:
        out.append(Violation("unit-unexpected", attr.name, f"unit {attr.unit!r} on non-numeric value"))
    if isinstance(v, NumericRange) and v.lower is not None and v.lower > v.upper:
        out.append(Violation("range-inverted", attr.name, f"lower {v.lower} > upper {v.upper}"))
    if numeric and attr.unit == PERCENT:
        lo, hi = interval(v)
        if (lo is not None and lo < 0) or hi < 0 or hi > 100:
            out.append(Violation("percent-out-of-range", attr.name, "percentage outside [0,100]"))
    if numeric and any(x is not None and x < 0 for x in interval(v)) and attr.unit != PERCENT:
        out.append(Violation("negative-value", attr.name, "negative quantity"))
    if not isinstance(attr.presence, Presence):
        out.append(Violation("presence-missing", attr.name, "presence class not set"))
    return out


def validate_template(tpl: SliceTemplate, schema: Schema | None = None) -> ValidationReport:
    """Check ``tpl`` against its flavor schema and the structural invariants.

    Pure: returns every violation found, never raises for a bad template.
    """
    if schema is None:
        schema = schema_for(tpl.flavor)
    elif schema.flavor is not tpl.flavor:
        raise ValueError(f"schema for {schema.flavor.value} applied to {tpl.flavor.value}")
    out: list[Violation] = []
    info = tpl.id_info

    expected_level = FLAVOR_LEVEL[tpl.flavor]
    if info.level is not expected_level:
        out.append(Violation("id-level", "id_info", f"{tpl.flavor.value} requires level {expected_level.value}"))
    if info.level in (IdLevel.SUB, IdLevel.USE_CASE_SPECIFIC) and not info.use_case_id:
        out.append(Violation("id-use-case", "id_info", "use_case_id required at this level"))
    if info.level is IdLevel.VERTICAL_GENERIC and info.use_case_id:
        out.append(Violation("id-use-case", "id_info", "use_case_id not allowed at vertical level"))
    if not info.tenant_id or not info.vertical_id:
        out.append(Violation("id-missing", "id_info", "tenant_id and vertical_id are required"))

    if tpl.flavor is Flavor.GN_NSIT:
        if tpl.service_category is not None:
            out.append(Violation("service-category", "service_category", "generic template aggregates categories"))
        if not 1 <= len(tpl.sub_templates) <= MAX_SUB_SLICES:
            out.append(Violation("sub-templates", "sub_templates",
                                 f"needs 1..{MAX_SUB_SLICES} sub templates, has {len(tpl.sub_templates)}"))
        if len(set(tpl.sub_templates)) != len(tpl.sub_templates):
            out.append(Violation("sub-templates", "sub_templates", "duplicate sub template id"))
    else:
        if tpl.sub_templates:
            out.append(Violation("sub-templates", "sub_templates", "only generic templates have sub templates"))
        if tpl.flavor in (Flavor.US_NSIT, Flavor.S_NSIT) and tpl.service_category is None:
            out.append(Violation("service-category", "service_category", "service category required"))

    res = tpl.resources
    for dim, q in res.quantities().items():
        if not isinstance(q, int) or q < 0:
            out.append(Violation("resource-negative", dim, f"quantity {q!r} must be a non-negative integer"))
    for cls_, mode in res.sharing.items():
        if cls_ not in COMPONENT_CLASSES or not isinstance(mode, Sharing):
            out.append(Violation("sharing", cls_, f"bad sharing entry {cls_}={mode!r}"))

    seen: set[str] = set()
    for attr in tpl.attributes:
        if attr.name in seen:
            out.append(Violation("duplicate-attribute", attr.name, "attribute listed twice"))
        seen.add(attr.name)
        rule = schema.rule(attr.name)
        if rule is None:
            if attr.presence is Presence.MANDATORY:
                out.append(Violation("unknown-attribute", attr.name, "not in schema but marked Mandatory"))
        else:
            if attr.category is not rule.category:
                out.append(Violation("category", attr.name, f"expected {rule.category.value}"))
            if not isinstance(attr.value, rule.kinds):
                kinds = "/".join(k.__name__ for k in rule.kinds)
                out.append(Violation("kind", attr.name, f"expected {kinds}"))
            elif rule.unit is not None and attr.unit != rule.unit:
                out.append(Violation("unit", attr.name, f"expected unit {rule.unit}"))
        out.extend(_value_violations(attr))

    for name in schema.mandatory:
        if name not in seen:
            out.append(Violation("missing-mandatory", name, "missing mandatory attribute"))
    return ValidationReport(info.template_id, tuple(out))


# -- derivation -------------------------------------------------------------


def _apply_override(parent: AttributeSpec, value: AttributeValue) -> AttributeSpec:
    if isinstance(parent.value, NUMERIC_KINDS):
        if not isinstance(value, NUMERIC_KINDS):
            raise InvalidOverride(f"{parent.name}: numeric attribute overridden with {value!r}")
        if isinstance(parent.value, Numeric):
            if interval(value) != interval(parent.value):
                raise InvalidOverride(f"{parent.name}: scalar parent value may only be repeated")
        elif not interval_within(value, parent.value):
            raise InvalidOverride(f"{parent.name}: {render_value(value, parent.unit)} is looser than "
                                  f"{parent.cell()}")
    elif type(value) is not type(parent.value):
        raise InvalidOverride(f"{parent.name}: override kind differs from parent")
    return replace(parent, value=value)


def sub_template_id(gn: SliceTemplate, use_case_id: str) -> str:
    base = gn.template_id or gn.id_info.vertical_id
    return f"{base}.{use_case_id}"


def derive_snsits(gn: SliceTemplate, vertical: Vertical) -> list[SliceTemplate]:
    """One sub template per use case, in use-case order.

    Each S-NSIT starts from the generic template's attributes; a use case may
    override values with equal-or-tighter numeric ranges, and may carry its own
    resource requirement (otherwise it inherits the parent's).
    """
    if vertical.n > MAX_SUB_SLICES:
        raise TooManyUseCases(f"{vertical.n} use cases; a generic slice clusters at most {MAX_SUB_SLICES}")
    if gn.flavor is not Flavor.GN_NSIT:
        raise InvalidParent(f"{gn.template_id}: expected GnNsit, got {gn.flavor.value}")
    report = validate_template(replace(gn, sub_templates=gn.sub_templates or ("_",)))
    if not report.ok:
        raise InvalidParent(f"{gn.template_id}: parent template invalid", report)
    if vertical.problems():
        raise InvalidParent("; ".join(vertical.problems()))
    if vertical.vertical_id != gn.id_info.vertical_id:
        raise InvalidParent(f"template is for vertical {gn.id_info.vertical_id}, not {vertical.vertical_id}")

    parents = {a.name: a for a in gn.attributes}
    out = []
    for uc in vertical.use_cases:
        unknown = set(uc.overrides) - set(parents)
        if unknown:
            raise InvalidOverride(f"{uc.use_case_id}: overrides not in parent: {sorted(unknown)}")
        attrs = tuple(
            _apply_override(a, uc.overrides[a.name]) if a.name in uc.overrides else a
            for a in gn.attributes
        )
        tpl = SliceTemplate(
            id_info=IdentificationInfo(
                tenant_id=gn.id_info.tenant_id,
                vertical_id=gn.id_info.vertical_id,
                level=IdLevel.SUB,
                use_case_id=uc.use_case_id,
                template_id=sub_template_id(gn, uc.use_case_id),
            ),
            flavor=Flavor.S_NSIT,
            attributes=attrs,
            resources=uc.resources if uc.resources is not None else gn.resources,
            service_category=uc.service_category,
        )
        rep = validate_template(tpl)
        if not rep.ok:
            raise InvalidOverride(f"{uc.use_case_id}: derived sub template invalid: {rep.violations[0]}")
        out.append(tpl)
    return out


def build_cluster(gn: SliceTemplate, vertical: Vertical) -> tuple[SliceTemplate, list[SliceTemplate]]:
    """Derive the sub templates and return the generic template pointing at them."""
    snsits = derive_snsits(gn, vertical)
    return replace(gn, sub_templates=tuple(s.template_id for s in snsits)), snsits


class NssitTriple(NamedTuple):
    core: SliceTemplate
    ran: SliceTemplate
    tn: SliceTemplate


def derive_nssits(nsit: SliceTemplate) -> NssitTriple:
    """Split an end-to-end template into its 5GC, NG-RAN and TN subnet templates.

    computation and storage go to 5GC, radio to NG-RAN, communication to TN,
    so the dimension-wise sum of the children is exactly the parent.
    """
    if nsit.flavor not in (Flavor.US_NSIT, Flavor.S_NSIT):
        raise InvalidParent(f"subnet templates derive from UsNsit/SNsit, not {nsit.flavor.value}")
    report = validate_template(nsit)
    if not report.ok:
        raise InvalidParent(f"{nsit.template_id}: parent template invalid", report)
    r = nsit.resources
    parts = {
        Flavor.NSSIT_5GC: ("5gc", ResourceRequirement(0, r.computation, r.storage, 0, r.sharing)),
        Flavor.NSSIT_NG_RAN: ("ngran", ResourceRequirement(0, 0, 0, r.radio, r.sharing)),
        Flavor.NSSIT_TN: ("tn", ResourceRequirement(r.communication, 0, 0, 0, r.sharing)),
    }
    children = []
    for flavor, (suffix, res) in parts.items():
        info = replace(nsit.id_info, level=IdLevel.SUBNET, template_id=f"{nsit.template_id}#{suffix}")
        children.append(SliceTemplate(
            id_info=info,
            flavor=flavor,
            attributes=tuple(replace(a, presence=Presence.OPTIONAL) for a in nsit.attributes),
            resources=res,
            service_category=nsit.service_category,
        ))
    return NssitTriple(*children)


@dataclass(frozen=True)
class SliceCardinality:
    top_level: int
    sub: int


def required_slice_count(vertical: Vertical, mode: ProvisioningMode) -> SliceCardinality:
    n = vertical.n
    if n < 1:
        raise ValueError("vertical has no use cases")
    if mode is ProvisioningMode.USE_CASE_SPECIFIC:
        return SliceCardinality(n, 0)
    return SliceCardinality(1, n)


def level_of(tpl: SliceTemplate, name: str, default: Level | None = None) -> Level | None:
    attr = tpl.attribute(name)
    if attr is not None and isinstance(attr.value, Ordinal):
        return attr.value.level
    return default


def top_level_flavors(mode: ProvisioningMode) -> Sequence[Flavor]:
    return (Flavor.US_NSIT,) if mode is ProvisioningMode.USE_CASE_SPECIFIC else (Flavor.GN_NSIT,)
