"""Interpretable text features: templates, baselines and feature-group masks.

A :class:`TemplateInput` holds a prompt template whose slots are the units of
attribution.  Each slot has an original value and a baseline (the text it
takes when its group is absent from an include set).  Slots may be grouped
with a mask so that several slots are perturbed, and scored, together.

Baselines left unspecified default to the empty string, which amounts to
feature dropout.  An empty replacement often produces text outside the
natural distribution of prompts the model has seen; prefer a replacement of
the same kind (another city for a city, another name for a name).
"""

from __future__ import annotations

import string
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ArityError, BaselineError, ConfigError, MaskConflictError

Slot = Union[int, str]
IncludeSet = frozenset


@dataclass(frozen=True)
class BaselineSpec:
    """Replacement values for every slot.

    ``entries`` is a tuple of ``(slots, options)`` pairs.  ``slots`` is a tuple
    of one or more slots that are always replaced together and ``options``
    lists the joint replacement tuples one of which is drawn uniformly.  A
    fixed baseline is the special case of one option per entry.
    """

    kind: str
    entries: tuple

    @classmethod
    def fixed(cls, mapping) -> BaselineSpec:
        mapping = _as_mapping(mapping)
        return cls("fixed", tuple(((s,), ((str(v),),)) for s, v in mapping.items()))

    @classmethod
    def choices(cls, mapping) -> BaselineSpec:
        entries = []
        for slot, options in _as_mapping(mapping).items():
            if isinstance(options, str):
                options = [options]
            entries.append(((slot,), tuple((str(o),) for o in options)))
        return cls("choices", tuple(entries))

    @classmethod
    def product(cls, mapping) -> BaselineSpec:
        entries = []
        for key, options in mapping.items():
            if isinstance(key, tuple):
                opts = []
                for opt in options:
                    if isinstance(opt, str) or len(opt) != len(key):
                        raise BaselineError(
                            f"joint baseline for {key} must be {len(key)}-tuples, got {opt!r}"
                        )
                    opts.append(tuple(str(o) for o in opt))
                entries.append((key, tuple(opts)))
            else:
                if isinstance(options, str):
                    options = [options]
                entries.append(((key,), tuple((str(o),) for o in options)))
        return cls("product", tuple(entries))

    def slots(self) -> list:
        return [s for key, _ in self.entries for s in key]

    def validate(self, slots: Sequence[Slot]) -> None:
        covered = self.slots()
        seen = set()
        for s in covered:
            if s in seen:
                raise BaselineError(f"slot {s!r} appears in more than one baseline entry")
            seen.add(s)
        if seen != set(slots):
            missing = [s for s in slots if s not in seen]
            extra = [s for s in covered if s not in set(slots)]
            raise BaselineError(f"baselines must cover every slot; missing={missing}, extra={extra}")
        for key, options in self.entries:
            if not options:
                raise BaselineError(f"empty baseline choice list for {key}")

    @property
    def is_random(self) -> bool:
        return any(len(options) > 1 for _, options in self.entries)


def ProductBaselines(mapping) -> BaselineSpec:
    """Joint baseline distribution; tuple keys are co-sampled slots."""
    return BaselineSpec.product(mapping)


def _as_mapping(obj) -> dict:
    if isinstance(obj, Mapping):
        return dict(obj)
    return dict(enumerate(obj))


def sample_baseline(spec: BaselineSpec, rng: np.random.Generator) -> dict:
    """Draw one baseline assignment ``slot -> text`` from ``spec``."""
    draw = {}
    for key, options in spec.entries:
        if not options:
            raise BaselineError(f"empty baseline choice list for {key}")
        choice = options[0] if len(options) == 1 else options[int(rng.integers(len(options)))]
        draw.update(zip(key, choice))
    return draw


def _parse_template(template: str):
    segments = []
    positional = named = False
    auto = 0
    try:
        parsed = list(string.Formatter().parse(template))
    except ValueError as exc:
        raise ConfigError(f"malformed template {template!r}: {exc}") from exc
    for literal, field, spec, conversion in parsed:
        if literal:
            segments.append(literal)
        if field is None:
            continue
        if spec or conversion:
            raise ConfigError(f"format specs are not supported in templates: {{{field}}}")
        if field == "":
            slot = auto
            auto += 1
            positional = True
        elif field.isdigit():
            slot = int(field)
            positional = True
        elif field.isidentifier():
            slot = field
            named = True
        else:
            raise ConfigError(f"invalid placeholder {{{field}}}")
        segments.append(_SlotRef(slot))
    if positional and named:
        raise ConfigError("template mixes positional and named placeholders")
    return segments


@dataclass(frozen=True)
class _SlotRef:
    slot: Slot


class TemplateInput:
    """Prompt template plus per-slot values, baselines and an optional mask.

    ``template`` is either a format string with ``{}`` or ``{name}``
    placeholders (``{{`` and ``}}`` escape literal braces) or a callable
    building the prompt from slot values.  A callable receives values
    positionally when ``values`` is a list and as keywords when it is a dict.
    """

    def __init__(self, template, values, baselines=None, mask=None):
        if isinstance(values, Mapping):
            self.slots = tuple(values)
            self.values = {k: str(v) for k, v in values.items()}
            self.named = True
        else:
            self.slots = tuple(range(len(values)))
            self.values = {i: str(v) for i, v in enumerate(values)}
            self.named = False
        self.template = template
        if callable(template):
            self._segments = None
        else:
            self._segments = _parse_template(template)
            refs = [seg.slot for seg in self._segments if isinstance(seg, _SlotRef)]
            if set(refs) != set(self.slots):
                raise ArityError(
                    f"template placeholders {sorted(set(refs), key=str)} do not match "
                    f"value keys {sorted(self.slots, key=str)}"
                )
            if refs and isinstance(refs[0], int) and self.named:
                raise ArityError("positional template requires a list of values")
        self.baselines = coerce_baselines(baselines, self.slots)
        self.mask = mask
        self.groups = normalize_mask(self)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def format(self, assignment: Mapping) -> str:
        return format(self, assignment)

    def original(self) -> str:
        return format(self, self.values)

    def group_labels(self) -> list[str]:
        return [" / ".join(self.values[s] for s in group) for group in self.groups]

    def __repr__(self):
        return f"TemplateInput({self.template!r}, {self.values!r}, groups={self.groups!r})"


def coerce_baselines(baselines, slots: Sequence[Slot]) -> BaselineSpec:
    """Turn user baseline input into a validated :class:`BaselineSpec`.

    Accepts ``None`` (empty string for every slot), a list matched to
    positional slots, a dict of ``slot -> text`` or ``slot -> [texts]``, or a
    ready ``BaselineSpec``.
    """
    if baselines is None:
        spec = BaselineSpec.fixed({s: "" for s in slots})
    elif isinstance(baselines, BaselineSpec):
        spec = baselines
    else:
        mapping = _as_mapping(baselines)
        if any(isinstance(k, tuple) for k in mapping):
            spec = BaselineSpec.product(mapping)
        elif any(not isinstance(v, str) for v in mapping.values()):
            spec = BaselineSpec.choices(mapping)
        else:
            spec = BaselineSpec.fixed(mapping)
    spec.validate(slots)
    return spec


def format(input: TemplateInput, assignment: Mapping) -> str:
    """Fill every slot of ``input``'s template from ``assignment``."""
    keys = set(assignment)
    if keys != set(input.slots):
        missing = [s for s in input.slots if s not in keys]
        extra = [k for k in assignment if k not in set(input.slots)]
        raise ArityError(f"slot assignment mismatch; missing={missing}, extra={extra}")
    if input._segments is None:
        if input.named:
            return str(input.template(**{s: assignment[s] for s in input.slots}))
        return str(input.template(*[assignment[s] for s in input.slots]))
    parts = []
    for seg in input._segments:
        parts.append(assignment[seg.slot] if isinstance(seg, _SlotRef) else seg)
    return "".join(parts)


def normalize_mask(input: TemplateInput) -> tuple:
    """Feature groups as a tuple of slot tuples, ordered by first slot.

    The mask may map ``slot -> group id``, ``tuple of slots -> group id``, or
    be a sequence of group ids aligned with positional slots.  Slots the mask
    does not mention form singleton groups.
    """
    mask = input.mask
    order = {s: i for i, s in enumerate(input.slots)}
    if mask is None:
        return tuple((s,) for s in input.slots)
    if isinstance(mask, Mapping):
        items = mask.items()
    else:
        mask = list(mask)
        if len(mask) != len(input.slots):
            raise ArityError(f"mask has {len(mask)} entries for {len(input.slots)} slots")
        items = zip(input.slots, mask)
    owner = {}
    for key, gid in items:
        for slot in key if isinstance(key, tuple) else (key,):
            if slot not in order:
                raise ArityError(f"mask references unknown slot {slot!r}")
            if slot in owner and owner[slot] != gid:
                raise MaskConflictError(f"slot {slot!r} assigned to groups {owner[slot]!r} and {gid!r}")
            if slot in owner:
                raise MaskConflictError(f"slot {slot!r} listed twice in mask")
            owner[slot] = gid
    members: dict = {}
    for slot in input.slots:
        gid = owner.get(slot, ("__single__", slot))
        members.setdefault(gid, []).append(slot)
    # dict preserves first-occurrence order of group ids
    return tuple(tuple(v) for v in members.values())


def perturbed_prompt(input: TemplateInput, present, baseline_draw: Mapping) -> str:
    """Prompt with present groups at original values, others at baselines."""
    present = frozenset(present)
    bad = [g for g in present if not 0 <= g < input.n_groups]
    if bad:
        raise ConfigError(f"include set references unknown groups {sorted(bad)}")
    assignment = {}
    for gid, group in enumerate(input.groups):
        for slot in group:
            if gid in present:
                assignment[slot] = input.values[slot]
            else:
                if slot not in baseline_draw:
                    raise ArityError(f"baseline draw lacks slot {slot!r}")
                assignment[slot] = baseline_draw[slot]
    return format(input, assignment)
