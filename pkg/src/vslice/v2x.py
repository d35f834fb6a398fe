"""The bundled V2X vertical: three use cases with the requirement table values.

``build_*`` functions construct the fixture objects; ``write_fixtures`` renders
them into ``data/v2x`` (the files shipped with the package are its output).
"""
from __future__ import annotations

from pathlib import Path

from .model import (
    TABLE_ROWS,
    AttributeSpec,
    Flavor,
    IdentificationInfo,
    IdLevel,
    ResourceRequirement,
    ServiceCategory,
    Sharing,
    SliceTemplate,
    UseCase,
    Vertical,
    build_cluster,
    parse_value,
)

TENANT = "tenant-1"
VERTICAL = "v2x"

USE_CASES = (
    ("autonomous-driving", ServiceCategory.URLLC),
    ("infotainment", ServiceCategory.EMBB),
    ("remote-diagnostics", ServiceCategory.MMTC),
)

# row name -> (autonomous driving, infotainment, remote diagnostics)
REQUIREMENTS = {
    "Latency": ("1-10 ms", "<20 ms", "<100 ms"),
    "Reliability": ("99.999%", "99.99%", "95%"),
    "Availability": ("99.9999%", "99.999%", "99%"),
    "Mobility": ("0-250 Km/hr", "0-250 Km/hr", "0-250 Km/hr"),
    "Device density": ("High", "High", "Very high"),
    "Data rate": ("50 Mbps", "1-100 Mbps", "0.55 Mbps"),
    "Isolation": ("Very high", "High", "Medium"),
    "Security": ("Very high", "High", "Not a concern"),
    "Application server positioning": ("Not required", "Edge/remote-cloud", "Remote cloud"),
    "Scheduling": ("Semi-persistent", "Dynamic", "Semi-persistent"),
    "Priority": ("Very high", "High", "Medium"),
    "Battery life": ("High", "High", "Very high"),
    "Coverage type": ("Nationwide", "Global", "Nationwide"),
    "Supported APIs": ("Yes", "Yes", "Yes"),
    "Energy efficiency": ("High", "High", "Very high"),
    "Resources/policies": ("Self management", "Self management", "Self management"),
    "Monitoring": ("Real", "Real/non-real", "Real/non-real"),
    "Communication mode": ("PC5", "LTE-Uu/NR", "LTE-Uu/NR"),
    "Communication primitive": ("Broadcast", "Unicast", "Unicast"),
}

# Envelope the generic template declares; every use-case column fits inside it.
GENERIC_ENVELOPE = {
    "Latency": "<100 ms",
    "Reliability": "95-99.999%",
    "Availability": "99-99.9999%",
    "Mobility": "0-250 Km/hr",
    "Device density": "Very high",
    "Data rate": "0.55-100 Mbps",
    "Isolation": "Very high",
    "Security": "Very high",
    "Application server positioning": "Edge/remote-cloud",
    "Scheduling": "Dynamic",
    "Priority": "Very high",
    "Battery life": "Very high",
    "Coverage type": "Global",
    "Supported APIs": "Yes",
    "Energy efficiency": "Very high",
    "Resources/policies": "Self management",
    "Monitoring": "Real/non-real",
    "Communication mode": "LTE-Uu/NR",
    "Communication primitive": "Unicast",
}

SHARING = {
    "core": Sharing.DEDICATED,
    "cu": Sharing.SHARED,
    "du": Sharing.DEDICATED,
    "ru": Sharing.DEDICATED,
    "tn": Sharing.DEDICATED,
}

# abstract units: communication, computation, storage, radio
RESOURCES = {
    "autonomous-driving": ResourceRequirement(10, 8, 4, 6, SHARING),
    "infotainment": ResourceRequirement(20, 6, 8, 10, SHARING),
    "remote-diagnostics": ResourceRequirement(2, 2, 2, 4, SHARING),
}


def attributes(cells: dict[str, str]) -> tuple[AttributeSpec, ...]:
    return tuple(
        AttributeSpec(r.name, r.category, parse_value(cells[r.name], r.unit), unit=r.unit)
        for r in TABLE_ROWS
    )


def column(index: int) -> dict[str, str]:
    return {name: cells[index] for name, cells in REQUIREMENTS.items()}


def build_vertical(vertical_id: str = VERTICAL, tenant_id: str = TENANT) -> Vertical:
    ucs = []
    for i, (uc_id, cat) in enumerate(USE_CASES):
        overrides = {a.name: a.value for a in attributes(column(i))}
        ucs.append(UseCase(uc_id, cat, overrides, RESOURCES[uc_id]))
    return Vertical(vertical_id, tenant_id, tuple(ucs))


def build_us_nsits() -> list[SliceTemplate]:
    out = []
    for i, (uc_id, cat) in enumerate(USE_CASES):
        out.append(SliceTemplate(
            id_info=IdentificationInfo(TENANT, VERTICAL, IdLevel.USE_CASE_SPECIFIC, uc_id, f"v2x-us-{cat.value.lower()}"),
            flavor=Flavor.US_NSIT,
            attributes=attributes(column(i)),
            resources=RESOURCES[uc_id],
            service_category=cat,
        ))
    return out


def build_gn_cluster() -> tuple[SliceTemplate, list[SliceTemplate]]:
    total = ResourceRequirement(
        *(sum(getattr(r, d) for r in RESOURCES.values()) for d in ResourceRequirement.DIMENSIONS),
        sharing=SHARING,
    )
    gn = SliceTemplate(
        id_info=IdentificationInfo(TENANT, VERTICAL, IdLevel.VERTICAL_GENERIC, None, "v2x-gn"),
        flavor=Flavor.GN_NSIT,
        attributes=attributes(GENERIC_ENVELOPE),
        resources=total,
    )
    return build_cluster(gn, build_vertical())


def build_single_use_case() -> tuple[Vertical, list[SliceTemplate]]:
    """A one-use-case vertical (fleet telemetry) provisioned both ways."""
    uc_id = "telemetry"
    res = RESOURCES["remote-diagnostics"]
    vertical = Vertical("fleet", "tenant-2", (UseCase(uc_id, ServiceCategory.MMTC, {}, None),))
    cells = column(2)
    us = SliceTemplate(
        IdentificationInfo("tenant-2", "fleet", IdLevel.USE_CASE_SPECIFIC, uc_id, "fleet-us-mmtc"),
        Flavor.US_NSIT, attributes(cells), res, ServiceCategory.MMTC,
    )
    gn = SliceTemplate(
        IdentificationInfo("tenant-2", "fleet", IdLevel.VERTICAL_GENERIC, None, "fleet-gn"),
        Flavor.GN_NSIT, attributes(cells), res,
    )
    gn, subs = build_cluster(gn, vertical)
    return vertical, [us, gn, *subs]


def _substrate(radio: int, dus: int, gnbs: int, links: list[tuple[str, str, str, int]], cores) -> dict:
    return {
        "core_nodes": [
            {"id": cid, "functions": list(funcs), "compute": c, "storage": s} for cid, funcs, c, s in cores
        ],
        "gnbs": [
            {
                "id": f"gnb-{g}",
                "cu": f"cu-{g}",
                "dus": [{"id": f"du-{g}-{d}", "cu": f"cu-{g}"} for d in range(1, dus + 1)],
                "rus": [{"id": f"ru-{g}-{d}", "du": f"du-{g}-{d}"} for d in range(1, dus + 1)],
                "radio": radio,
            }
            for g in range(1, gnbs + 1)
        ],
        "tn_links": [{"id": lid, "endpoints": [a, b], "bandwidth": bw} for lid, a, b, bw in links],
    }


CORE_FUNCTIONS = ("AMF", "NEF", "NSB", "PCF", "SMF", "UPF")


def substrate_doc() -> dict:
    return _substrate(
        radio=40, dus=4, gnbs=2,
        links=[("tn-1", "core-1", "gnb-1", 40), ("tn-2", "core-1", "gnb-2", 40), ("tn-3", "core-2", "gnb-1", 20)],
        cores=[("core-1", CORE_FUNCTIONS, 32, 32), ("core-2", ("SMF", "UPF"), 16, 16)],
    )


def tight_substrate_doc() -> dict:
    # radio 16 holds autonomous driving (6) + infotainment (10) but not diagnostics (4) on top
    return _substrate(
        radio=16, dus=4, gnbs=1,
        links=[("tn-1", "core-1", "gnb-1", 40)],
        cores=[("core-1", CORE_FUNCTIONS, 32, 32)],
    )


def write_fixtures(directory: str | Path) -> None:
    from .catalogue import Catalogue, Provenance
    from .documents import dump_yaml, save_template, vertical_to_dict

    directory = Path(directory)
    (directory / "templates").mkdir(parents=True, exist_ok=True)
    gn, subs = build_gn_cluster()
    us = build_us_nsits()
    names = {}
    for t in us:
        names[t.template_id] = f"us-{t.service_category.value.lower()}.yaml"
    names[gn.template_id] = "gn.yaml"
    for s in subs:
        names[s.template_id] = f"s-{s.service_category.value.lower()}.yaml"
    for t in [*us, gn, *subs]:
        save_template(t, directory / "templates" / names[t.template_id])

    cat = Catalogue()
    cat.insert_batch([*us, *subs, gn], Provenance.STANDARD)
    single_vertical, single = build_single_use_case()
    cat.insert_batch([single[0], *single[2:], single[1]], Provenance.STANDARD)
    cat.save(directory / "catalogue.yaml")

    (directory / "vertical.yaml").write_text(dump_yaml(vertical_to_dict(build_vertical())), encoding="utf-8")
    (directory / "vertical-fleet.yaml").write_text(dump_yaml(vertical_to_dict(single_vertical)), encoding="utf-8")
    (directory / "substrate.yaml").write_text(dump_yaml(substrate_doc()), encoding="utf-8")
    (directory / "substrate-tight.yaml").write_text(dump_yaml(tight_substrate_doc()), encoding="utf-8")

