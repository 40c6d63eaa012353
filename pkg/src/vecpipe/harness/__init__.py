"""Native scaffold templates and their instantiation.

The templates are plain C text assets with ``{{SLOT}}`` markers; the
``testing`` and ``bench`` modules fill them and hand the result to the
compiler.  Instantiation is pure textual substitution.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import IoError, SlotMissing

_TEMPLATE_DIR = Path(__file__).parent / "templates"
_SLOT_RE = re.compile(r"\{\{([A-Z_]+)\}\}")

KNOWN_SLOTS = {
    "CONTEXT",
    "ORIGINAL_FN",
    "CANDIDATE_FN",
    "SLOT_NAME",
    "TRIALS",
    "SEED",
    "RANGES",
    "COMPARE_POLICY",
}


@dataclass(frozen=True)
class HarnessTemplate:
    body: str

    def slots(self) -> set[str]:
        return set(_SLOT_RE.findall(self.body))


def load_template(name: str) -> HarnessTemplate:
    filename = name if name.endswith(".c") else f"{name}.c"
    path = _TEMPLATE_DIR / filename
    if not path.exists():
        raise IoError(f"no harness template named {name!r}")
    return HarnessTemplate(path.read_text())


def instantiate(template: HarnessTemplate, slots: dict[str, str]) -> str:
    """Fill every slot marker in the template body.

    The provided slot values themselves are not re-scanned for markers, so
    substitution cannot cascade.
    """
    needed = template.slots()
    missing = needed - slots.keys()
    if missing:
        raise SlotMissing(f"template slots not provided: {sorted(missing)}")
    parts: list[str] = []
    pos = 0
    for m in _SLOT_RE.finditer(template.body):
        parts.append(template.body[pos : m.start()])
        parts.append(str(slots[m.group(1)]))
        pos = m.end()
    parts.append(template.body[pos:])
    return "".join(parts)
