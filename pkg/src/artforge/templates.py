"""Category templates: allowed part labels, motion options, dependency options.

Template documents are JSON shaped like:

    {"main_category": "fan", "gloss": "...", "content": [
        {"name": "base", "gloss": "...",
         "kinematic": {"articulatable": false, "link_dependency": [], "joint_type": []},
         "parts": [ ...nested entries... ]}]}

Nested entries are flattened with their parent's name retained. Extra optional
keys carried per entry: "affordance" (list of tags), "interior" (completion
kind for hollow parts), kinematic "non_recessing" (true clamps the inward
prismatic limit at 0, e.g. drawers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .errors import SchemaViolation, UnknownLabel

FIXED = "fixed"
REVOLUTE = "revolute"
CONTINUOUS = "continuous"
PRISMATIC = "prismatic"
CYLINDRICAL = "cylindrical"
UNIVERSAL = "universal"

MOTION_TYPES = (FIXED, REVOLUTE, CONTINUOUS, PRISMATIC, CYLINDRICAL, UNIVERSAL)
TWO_DOF = (CYLINDRICAL, UNIVERSAL)

ROOT_DEP = "root"


@dataclass(frozen=True)
class TemplateEntry:
    name: str
    gloss: str = ""
    articulatable: bool = False
    link_dependency: Tuple[str, ...] = ()
    joint_type: Tuple[str, ...] = ()
    parent_name: Optional[str] = None      # enclosing entry when nested
    affordance: Tuple[str, ...] = ()
    interior: Optional[str] = None
    non_recessing: bool = False


@dataclass(frozen=True)
class CategoryTemplate:
    main_category: str
    gloss: str = ""
    entries: Tuple[TemplateEntry, ...] = ()

    def entry(self, name: str) -> TemplateEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise UnknownLabel(f"label {name!r} not in template {self.main_category!r}")

    def has(self, name: str) -> bool:
        return any(e.name == name for e in self.entries)

    def root_labels(self) -> Tuple[str, ...]:
        """Names of entries usable as the kinematic root (no dependencies)."""
        return tuple(e.name for e in self.entries
                     if not e.articulatable and not e.link_dependency)


def _flatten(record, parent_name, out):
    if not isinstance(record, dict) or "name" not in record:
        raise SchemaViolation("template entry without a name")
    kin = record.get("kinematic", {})
    if not isinstance(kin, dict):
        raise SchemaViolation(f"entry {record['name']!r}: kinematic must be an object")
    entry = TemplateEntry(
        name=str(record["name"]),
        gloss=str(record.get("gloss", "")),
        articulatable=bool(kin.get("articulatable", False)),
        link_dependency=tuple(str(x) for x in kin.get("link_dependency", [])),
        joint_type=tuple(str(x) for x in kin.get("joint_type", [])),
        parent_name=parent_name,
        affordance=tuple(str(x) for x in record.get("affordance", [])),
        interior=record.get("interior"),
        non_recessing=bool(kin.get("non_recessing", False)),
    )
    out.append(entry)
    for sub in record.get("parts", []):
        _flatten(sub, entry.name, out)


def load_template(document) -> CategoryTemplate:
    """Parse and validate a template document (bytes or str)."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"template is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "main_category" not in data:
        raise SchemaViolation("template missing main_category")

    entries = []
    for record in data.get("content", []):
        _flatten(record, None, entries)
    if not entries:
        raise SchemaViolation("template has no entries")

    names = [e.name for e in entries]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise SchemaViolation(f"duplicate part names: {sorted(dupes)}")
    for e in entries:
        for dep in e.link_dependency:
            if dep != ROOT_DEP and dep not in names:
                raise SchemaViolation(f"entry {e.name!r}: link_dependency {dep!r} names no entry")
        if e.articulatable and not e.joint_type:
            raise SchemaViolation(f"entry {e.name!r}: articulatable but joint_type is empty")
        for jt in e.joint_type:
            if jt not in MOTION_TYPES:
                raise SchemaViolation(f"entry {e.name!r}: unknown joint type {jt!r}")

    return CategoryTemplate(main_category=str(data["main_category"]),
                            gloss=str(data.get("gloss", "")),
                            entries=tuple(entries))


# Geometric disambiguation rules may be registered by name; none ship in v1,
# so multi-option entries resolve by template order.
DISAMBIGUATION_RULES = {}


def resolve_motion_type(part, template: CategoryTemplate) -> str:
    """Motion type for a part: template order encodes expected prevalence."""
    entry = template.entry(part.label_name if part.label_name else str(part.label_id))
    if not entry.articulatable:
        return FIXED
    options = entry.joint_type
    if len(options) > 1:
        for rule in DISAMBIGUATION_RULES.values():
            picked = rule(part, entry, options)
            if picked is not None:
                return picked
    return options[0]
