"""Network slice catalogue: template store, lookup and non-standard onboarding."""
from __future__ import annotations

import enum
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

from .documents import dump_yaml, read_yaml, template_from_dict, template_to_dict
from .errors import DanglingSubTemplate, DocumentError, DuplicateId, IntegrityViolation, InvalidTemplate
from .model import (
    NUMERIC_KINDS,
    AttributeValue,
    Flag,
    Flavor,
    Ordinal,
    Presence,
    ProvisioningMode,
    SliceTemplate,
    Text,
    ValidationReport,
    Violation,
    interval_intersection,
    render_value,
    validate_template,
)


class Provenance(str, enum.Enum):
    STANDARD = "Standard"
    NON_STANDARD = "NonStandard"


@dataclass(frozen=True)
class Entry:
    template: SliceTemplate
    provenance: Provenance


@dataclass(frozen=True)
class LookupResult:
    entries: tuple[Entry, ...] = ()

    def __len__(self):
        return len(self.entries)

    @property
    def templates(self) -> list[SliceTemplate]:
        return [e.template for e in self.entries]

    def ids(self) -> list[str]:
        return [e.template.template_id for e in self.entries]


@dataclass(frozen=True)
class RejectionReport:
    reasons: tuple[Violation, ...]

    def names(self) -> set[str]:
        return {v.subject for v in self.reasons}


class Catalogue:
    """Template store keyed by template id.

    Mutations go through :meth:`insert`/:meth:`insert_batch`, which check
    validity and referential integrity before anything is stored; one writer
    at a time is assumed.
    """

    def __init__(self):
        self.entries: dict[str, SliceTemplate] = {}
        self.provenance: dict[str, Provenance] = {}
        self.index: dict[tuple[str, str | None], set[str]] = {}
        self._next_id = 1

    def __contains__(self, template_id):
        return template_id in self.entries

    def __len__(self):
        return len(self.entries)

    def get(self, template_id: str) -> SliceTemplate:
        return self.entries[template_id]

    def _assign_id(self, tpl: SliceTemplate) -> SliceTemplate:
        if tpl.template_id:
            return tpl
        while f"nst-{self._next_id:04d}" in self.entries:
            self._next_id += 1
        tid = f"nst-{self._next_id:04d}"
        self._next_id += 1
        return tpl.with_id(tid)

    def insert(self, tpl: SliceTemplate, provenance: Provenance = Provenance.STANDARD) -> SliceTemplate:
        return self.insert_batch([tpl], provenance)[0]

    def insert_batch(self, templates: Iterable[SliceTemplate], provenance: Provenance = Provenance.STANDARD):
        """Insert templates atomically; generic templates may reference sub templates in the same batch.

        Templates with an empty id get one assigned here. Returns the stored templates.
        """
        batch = [self._assign_id(t) for t in templates]
        ids = [t.template_id for t in batch]
        for tid in ids:
            if tid in self.entries or ids.count(tid) > 1:
                raise DuplicateId(tid)
        known = {**self.entries, **{t.template_id: t for t in batch}}
        for t in batch:
            report = validate_template(t)
            if not report.ok:
                raise InvalidTemplate(f"{t.template_id}: {report.violations[0]}", report)
            if t.flavor is Flavor.GN_NSIT:
                for sid in t.sub_templates:
                    sub = known.get(sid)
                    if sub is None:
                        raise DanglingSubTemplate(f"{t.template_id} -> {sid}")
                    if sub.flavor is not Flavor.S_NSIT:
                        raise InvalidTemplate(f"{t.template_id}: sub template {sid} is {sub.flavor.value}")
                    extra = set(sub.attribute_names()) - set(t.attribute_names())
                    if extra:
                        raise InvalidTemplate(f"{sid}: attributes not in parent {t.template_id}: {sorted(extra)}")
        for t in batch:
            self.entries[t.template_id] = t
            self.provenance[t.template_id] = provenance
            self.index.setdefault((t.id_info.vertical_id, t.id_info.use_case_id), set()).add(t.template_id)
        return batch

    def remove(self, template_id: str, force: bool = False) -> None:
        """Drop an entry. Without ``force`` a referenced sub template cannot be removed."""
        if template_id not in self.entries:
            raise KeyError(template_id)
        users = [t.template_id for t in self.entries.values() if template_id in t.sub_templates]
        if users and not force:
            raise IntegrityViolation([f"{template_id} is referenced by {', '.join(sorted(users))}"])
        t = self.entries.pop(template_id)
        del self.provenance[template_id]
        key = (t.id_info.vertical_id, t.id_info.use_case_id)
        self.index[key].discard(template_id)
        if not self.index[key]:
            del self.index[key]

    def problems(self) -> list[str]:
        """Full re-validation pass over every entry."""
        out = []
        rebuilt: dict[tuple[str, str | None], set[str]] = {}
        for tid, t in sorted(self.entries.items()):
            if t.template_id != tid:
                out.append(f"{tid}: stored under a different id than {t.template_id}")
            rebuilt.setdefault((t.id_info.vertical_id, t.id_info.use_case_id), set()).add(tid)
            report = validate_template(t)
            out.extend(f"{tid}: {v}" for v in report.violations)
            for sid in t.sub_templates:
                if sid not in self.entries:
                    out.append(f"{tid}: dangling sub template {sid}")
            if tid not in self.provenance:
                out.append(f"{tid}: no provenance")
        if rebuilt != self.index:
            out.append("index out of sync with entries")
        return out

    def check(self) -> None:
        problems = self.problems()
        if problems:
            raise IntegrityViolation(problems)

    def lookup(self, vertical_id: str, mode: ProvisioningMode) -> LookupResult:
        """Templates of ``vertical_id`` for ``mode``; missing entries give an empty result.

        UseCaseSpecific gives the US-NSITs; SubNetworkSlicing gives each GN-NSIT
        (Standard first) followed by its resolvable S-NSITs.
        """
        ids = sorted(tid for (vid, _), tids in self.index.items() if vid == vertical_id for tid in tids)
        out: list[Entry] = []
        if mode is ProvisioningMode.USE_CASE_SPECIFIC:
            out = [self._entry(t) for t in ids if self.entries[t].flavor is Flavor.US_NSIT]
        else:
            gns = [t for t in ids if self.entries[t].flavor is Flavor.GN_NSIT]
            gns.sort(key=lambda t: (self.provenance[t] is not Provenance.STANDARD, t))
            for gid in gns:
                out.append(self._entry(gid))
                out.extend(self._entry(s) for s in self.entries[gid].sub_templates if s in self.entries)
        return LookupResult(tuple(out))

    def lookup_use_case(self, vertical_id: str, use_case_id: str, flavor: Flavor) -> SliceTemplate | None:
        ids = sorted(self.index.get((vertical_id, use_case_id), ()))
        ids.sort(key=lambda t: self.provenance[t] is not Provenance.STANDARD)
        for tid in ids:
            if self.entries[tid].flavor is flavor:
                return self.entries[tid]
        return None

    def _entry(self, tid: str) -> Entry:
        return Entry(self.entries[tid], self.provenance[tid])

    # -- persistence

    def to_dict(self) -> dict:
        ids = sorted(self.entries)
        return {
            "templates": [template_to_dict(self.entries[t]) for t in ids],
            "provenance": {t: self.provenance[t].value for t in ids},
        }

    @classmethod
    def from_dict(cls, d: dict, where: str = "catalogue") -> "Catalogue":
        if not isinstance(d, dict) or "templates" not in d:
            raise DocumentError(f"{where}: expected a mapping with 'templates'")
        cat = cls()
        prov = d.get("provenance") or {}
        for i, raw in enumerate(d["templates"] or []):
            t = template_from_dict(raw, f"{where}.templates[{i}]")
            if t.template_id in cat.entries:
                raise DocumentError(f"{where}: duplicate template id {t.template_id}")
            try:
                p = Provenance(prov.get(t.template_id, Provenance.STANDARD.value))
            except ValueError:
                raise DocumentError(f"{where}: bad provenance for {t.template_id}") from None
            # stored verbatim; integrity is a separate check() pass
            cat.entries[t.template_id] = t
            cat.provenance[t.template_id] = p
            cat.index.setdefault((t.id_info.vertical_id, t.id_info.use_case_id), set()).add(t.template_id)
        return cat

    def save(self, path: str | Path) -> None:
        path = Path(path)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(dump_yaml(self.to_dict()))
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "Catalogue":
        return cls.from_dict(read_yaml(path), str(path))

    def content(self) -> dict:
        return {t: (self.entries[t], self.provenance[t]) for t in self.entries}


# -- non-standard onboarding ---------------------------------------------------

OperatorPolicy = Mapping[str, AttributeValue]


def _clamp(name: str, proposed: AttributeValue, bound: AttributeValue, unit) -> tuple[AttributeValue | None, str]:
    """Intersect one proposed value with the operator's bound for it."""
    if isinstance(proposed, NUMERIC_KINDS) and isinstance(bound, NUMERIC_KINDS):
        got = interval_intersection(proposed, bound)
        if got is None:
            return None, f"{render_value(proposed, unit)} outside operator bound {render_value(bound, unit)}"
        return got, ""
    if isinstance(proposed, Ordinal) and isinstance(bound, Ordinal):
        if proposed.level > bound.level:
            return None, f"{proposed.level.label} exceeds operator maximum {bound.level.label}"
        return proposed, ""
    if isinstance(proposed, (Text, Flag)) and type(bound) is type(proposed):
        if proposed != bound:
            return None, f"{render_value(proposed)} not offered (operator offers {render_value(bound)})"
        return proposed, ""
    return None, "proposal and operator bound have different kinds"


def negotiate_non_standard(
    cat: Catalogue,
    proposal: SliceTemplate,
    operator_policy: OperatorPolicy,
    sub_proposals: Iterable[SliceTemplate] = (),
) -> SliceTemplate | RejectionReport:
    """Single-round clamp-and-check of a tenant draft against operator bounds.

    Numeric attributes are narrowed to the intersection with the bound, levels
    must not exceed the bound, text/flag values must match it. Any empty
    intersection on a Mandatory attribute rejects the whole draft. Accepted
    drafts are inserted with NonStandard provenance and fresh ids; for a
    generic draft, ``sub_proposals`` are clamped too and the parent is
    re-pointed at their new ids.
    """
    if not proposal.id_info.vertical_id:
        return RejectionReport((Violation("draft", "id_info", "draft names no vertical"),))
    subs = list(sub_proposals)
    if proposal.flavor is Flavor.GN_NSIT and not subs:
        return RejectionReport((Violation("draft", "sub_templates", "generic draft needs at least one use case"),))

    reasons: list[Violation] = []

    def clamp(t: SliceTemplate) -> SliceTemplate:
        attrs = []
        for a in t.attributes:
            bound = operator_policy.get(a.name)
            if bound is None:
                attrs.append(a)
                continue
            got, why = _clamp(a.name, a.value, bound, a.unit)
            if got is None:
                if a.presence is Presence.MANDATORY:
                    reasons.append(Violation("policy", a.name, why))
                continue  # optional attribute outside policy is dropped
            attrs.append(replace(a, value=got))
        return replace(t, attributes=tuple(attrs), id_info=replace(t.id_info, template_id=""))

    clamped_subs = [clamp(s) for s in subs]
    clamped = clamp(proposal)
    if reasons:
        return RejectionReport(tuple(reasons))

    staged = Catalogue()
    staged._next_id = cat._next_id
    staged.entries = dict(cat.entries)
    # give fresh ids first so the parent can point at them
    new_subs = [staged._assign_id(s) for s in clamped_subs]
    for s in new_subs:
        staged.entries[s.template_id] = s
    if proposal.flavor is Flavor.GN_NSIT:
        clamped = replace(clamped, sub_templates=tuple(s.template_id for s in new_subs))
    clamped = staged._assign_id(clamped)
    cat._next_id = staged._next_id

    for t in [*new_subs, clamped]:
        report: ValidationReport = validate_template(t)
        if not report.ok:
            return RejectionReport(report.violations)
    try:
        stored = cat.insert_batch([*new_subs, clamped], Provenance.NON_STANDARD)
    except (InvalidTemplate, DanglingSubTemplate) as exc:
        report = getattr(exc, "report", None)
        return RejectionReport(report.violations if report else (Violation("draft", "catalogue", str(exc)),))
    return stored[-1]
