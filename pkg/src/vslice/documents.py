"""YAML documents for templates and verticals.

Field names follow the domain types one-to-one. Attribute values are stored as
their table-cell text (``"1-10 ms"``, ``"99.999%"``, ``"Very high"``) so a
template file reads like the requirement table it came from.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from .errors import DocumentError
from .model import (
    AttributeSpec,
    Category,
    Flavor,
    IdentificationInfo,
    IdLevel,
    Presence,
    ResourceRequirement,
    ServiceCategory,
    TABLE_ROWS,
    Sharing,
    SliceTemplate,
    UseCase,
    Vertical,
    parse_value,
    render_value,
)


TABLE_UNITS = {r.name: r.unit for r in TABLE_ROWS}


def dump_yaml(data: Any) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False, allow_unicode=True, width=100)


def read_yaml(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"{path}: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise DocumentError(f"{path}: {exc}") from None
    if data is None:
        raise DocumentError(f"{path}: empty document")
    return data


def _need(d: dict, key: str, where: str) -> Any:
    if not isinstance(d, dict):
        raise DocumentError(f"{where}: expected a mapping")
    if key not in d:
        raise DocumentError(f"{where}: missing field {key!r}")
    return d[key]


def _enum(cls, raw, where):
    try:
        return cls(raw)
    except ValueError:
        raise DocumentError(f"{where}: {raw!r} is not a valid {cls.__name__}") from None


def _cell_text(raw) -> str:
    # tolerate YAML 1.1 coercions of unquoted cells
    if isinstance(raw, bool):
        return "Yes" if raw else "No"
    if isinstance(raw, (int, float)):
        return str(raw)
    if not isinstance(raw, str):
        raise DocumentError(f"attribute value {raw!r} is not text")
    return raw


# -- resources --------------------------------------------------------------


def resources_to_dict(r: ResourceRequirement) -> dict:
    d: dict[str, Any] = dict(r.quantities())
    d["sharing"] = {k: v.value for k, v in sorted(r.sharing.items())}
    return d


def resources_from_dict(d: dict, where: str = "resources") -> ResourceRequirement:
    if not isinstance(d, dict):
        raise DocumentError(f"{where}: expected a mapping")
    kwargs = {}
    for dim in ResourceRequirement.DIMENSIONS:
        q = d.get(dim, 0)
        if isinstance(q, bool) or not isinstance(q, int):
            raise DocumentError(f"{where}.{dim}: expected an integer, got {q!r}")
        kwargs[dim] = q
    sharing = {k: _enum(Sharing, v, f"{where}.sharing.{k}") for k, v in (d.get("sharing") or {}).items()}
    base = ResourceRequirement().sharing
    return ResourceRequirement(**kwargs, sharing={**base, **sharing})


# -- templates --------------------------------------------------------------


def attribute_to_dict(a: AttributeSpec) -> dict:
    return {
        "name": a.name,
        "category": a.category.value,
        "value": a.cell(),
        "presence": a.presence.value if a.presence is not None else None,
        "unit": a.unit,
    }


def attribute_from_dict(d: dict, where: str) -> AttributeSpec:
    name = _need(d, "name", where)
    where = f"{where}[{name}]"
    unit = d.get("unit")
    try:
        value = parse_value(_cell_text(_need(d, "value", where)), unit)
    except ValueError as exc:
        raise DocumentError(f"{where}: {exc}") from None
    presence = d.get("presence")
    return AttributeSpec(
        name=name,
        category=_enum(Category, _need(d, "category", where), where),
        value=value,
        # a missing presence class survives parsing so validation can report it
        presence=_enum(Presence, presence, where) if presence is not None else None,
        unit=unit,
    )


def template_to_dict(t: SliceTemplate) -> dict:
    info = t.id_info
    return {
        "id_info": {
            "tenant_id": info.tenant_id,
            "vertical_id": info.vertical_id,
            "use_case_id": info.use_case_id,
            "level": info.level.value,
            "template_id": info.template_id,
        },
        "flavor": t.flavor.value,
        "service_category": t.service_category.value if t.service_category else None,
        "attributes": [attribute_to_dict(a) for a in t.attributes],
        "resources": resources_to_dict(t.resources),
        "sub_templates": list(t.sub_templates),
    }


def template_from_dict(d: dict, where: str = "template") -> SliceTemplate:
    info = _need(d, "id_info", where)
    sc = d.get("service_category")
    attrs = d.get("attributes") or []
    if not isinstance(attrs, list):
        raise DocumentError(f"{where}.attributes: expected a list")
    return SliceTemplate(
        id_info=IdentificationInfo(
            tenant_id=str(_need(info, "tenant_id", f"{where}.id_info")),
            vertical_id=str(_need(info, "vertical_id", f"{where}.id_info")),
            level=_enum(IdLevel, _need(info, "level", f"{where}.id_info"), f"{where}.id_info"),
            use_case_id=info.get("use_case_id"),
            template_id=str(info.get("template_id") or ""),
        ),
        flavor=_enum(Flavor, _need(d, "flavor", where), where),
        attributes=tuple(attribute_from_dict(a, f"{where}.attributes") for a in attrs),
        resources=resources_from_dict(d.get("resources") or {}, f"{where}.resources"),
        service_category=_enum(ServiceCategory, sc, where) if sc is not None else None,
        sub_templates=tuple(d.get("sub_templates") or ()),
    )


def dump_template(t: SliceTemplate) -> str:
    return dump_yaml(template_to_dict(t))


def load_template(path: str | Path) -> SliceTemplate:
    return template_from_dict(read_yaml(path), str(path))


def save_template(t: SliceTemplate, path: str | Path) -> None:
    Path(path).write_text(dump_template(t), encoding="utf-8")


# -- verticals --------------------------------------------------------------


def vertical_to_dict(v: Vertical, units: dict[str, str | None] | None = None) -> dict:
    if units is None:
        units = TABLE_UNITS
    return {
        "vertical_id": v.vertical_id,
        "tenant_id": v.tenant_id,
        "use_cases": [
            {
                "use_case_id": uc.use_case_id,
                "service_category": uc.service_category.value,
                "overrides": {k: render_value(val, units.get(k)) for k, val in uc.overrides.items()},
                "resources": resources_to_dict(uc.resources) if uc.resources is not None else None,
            }
            for uc in v.use_cases
        ],
    }


def vertical_from_dict(d: dict, units: dict[str, str | None] | None = None, where: str = "vertical") -> Vertical:
    """``units`` maps attribute name to unit, needed to read numeric overrides."""
    if units is None:
        units = TABLE_UNITS
    ucs = []
    for i, u in enumerate(_need(d, "use_cases", where) or []):
        w = f"{where}.use_cases[{i}]"
        overrides = {}
        for k, raw in (u.get("overrides") or {}).items():
            try:
                overrides[k] = parse_value(_cell_text(raw), units.get(k))
            except ValueError as exc:
                raise DocumentError(f"{w}.overrides.{k}: {exc}") from None
        res = u.get("resources")
        ucs.append(UseCase(
            use_case_id=str(_need(u, "use_case_id", w)),
            service_category=_enum(ServiceCategory, _need(u, "service_category", w), w),
            overrides=overrides,
            resources=resources_from_dict(res, f"{w}.resources") if res is not None else None,
        ))
    return Vertical(
        vertical_id=str(_need(d, "vertical_id", where)),
        tenant_id=str(_need(d, "tenant_id", where)),
        use_cases=tuple(ucs),
    )
